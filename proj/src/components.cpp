#include "pnpcert/components.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

namespace pnpcert {

namespace {

// d/dt in a frame rotating at w contributes +w * Jrot * x,
// Jrot = [[0, 1], [-1, 0]].
inline Eigen::Vector2d rot_coupling(const Eigen::Vector2d& x) {
  return {x(1), -x(0)};
}

inline Eigen::Matrix2d rotation(double delta) {
  Eigen::Matrix2d R;
  R << std::cos(delta), -std::sin(delta), std::sin(delta), std::cos(delta);
  return R;
}

struct GfmIndex {
  int delta = 0, P = 1, Q = 2;
  int phi_d = -1, phi_q = -1;
  int gam_d, gam_q, il_d, il_q, vo_d, vo_q, io_d, io_q;
  int n;

  explicit GfmIndex(const GfmParams& p) {
    int k = 3;
    if (p.K_iv > 0.0) {
      phi_d = k++;
      phi_q = k++;
    }
    gam_d = k++;
    gam_q = k++;
    il_d = k++;
    il_q = k++;
    vo_d = k++;
    vo_q = k++;
    io_d = k++;
    io_q = k++;
    n = k;
  }
};

}  // namespace

void LineParams::validate() const {
  if (!(R > 0.0) || !(L > 0.0) || !(omega0 > 0.0))
    throw ValidationError("LineParams: R, L, omega0 must be positive");
}

void GfmParams::validate() const {
  if (!(m_p > 0.0) || m_p > 0.1 || !(n_q > 0.0) || n_q > 0.1)
    throw ValidationError("GfmParams: droop gains must lie in (0, 0.1]");
  if (!(C_f > 0.0) || !(L_f > 0.0))
    throw ValidationError("GfmParams: C_f, L_f must be positive");
  if (K_pv < 0.0 || K_iv < 0.0 || K_ic < 0.0 || omega_c <= 0.0)
    throw ValidationError("GfmParams: gains must be non-negative, omega_c > 0");
  if (!(omega0 > 0.0) || !(S_rated > 0.0))
    throw ValidationError("GfmParams: omega0, S_rated must be positive");
}

StateSpaceModel line_admittance(const LineParams& p) {
  p.validate();
  Mat A(2, 2), B(2, 2);
  A << -p.R / p.L, p.omega0, -p.omega0, -p.R / p.L;
  B = Mat::Identity(2, 2) / p.L;
  return StateSpaceModel(A, B, Mat::Identity(2, 2), Mat::Zero(2, 2));
}

Vec gfm_dynamics(const GfmParams& p, const Vec& x, const Vec& v_global) {
  const GfmIndex ix(p);
  const double Lf = p.L_f / p.omega0;   // p.u. inductance (seconds)
  const double Cf = p.C_f / p.omega0;
  const double Lc = p.X_c / p.omega0;

  const double delta = x(ix.delta);
  const double P = x(ix.P), Q = x(ix.Q);
  const Eigen::Vector2d il(x(ix.il_d), x(ix.il_q));
  const Eigen::Vector2d vo(x(ix.vo_d), x(ix.vo_q));
  const Eigen::Vector2d io(x(ix.io_d), x(ix.io_q));

  // Per-unit droop: a 1 p.u. power excursion moves frequency by m_p * omega0.
  const double omega = p.omega0 * (1.0 - p.m_p * (P - p.P0));

  const double p_inst = vo(0) * io(0) + vo(1) * io(1);
  const double q_inst = vo(1) * io(0) - vo(0) * io(1);

  // Droop voltage reference; q-axis reference is zero in the local frame.
  const Eigen::Vector2d v_ref(p.V0 - p.n_q * (Q - p.Q0), 0.0);
  const Eigen::Vector2d e_v = v_ref - vo;

  Eigen::Vector2d phi = Eigen::Vector2d::Zero();
  if (ix.phi_d >= 0) phi << x(ix.phi_d), x(ix.phi_q);

  // Voltage loop: proportional(-integral) regulation with output-current
  // feed-forward and compensation of the capacitor's standing current
  // (+ j C_f vo in per-unit). The feed-forward makes the (slow) current
  // loop settle at v_o = v_ref, so the device can source its scheduled
  // power through an angle advance.
  Eigen::Vector2d il_ref;
  il_ref(0) = io(0) - p.C_f * vo(1) + p.K_pv * e_v(0) + p.K_iv * phi(0);
  il_ref(1) = io(1) + p.C_f * vo(0) + p.K_pv * e_v(1) + p.K_iv * phi(1);

  const Eigen::Vector2d gam(x(ix.gam_d), x(ix.gam_q));
  const Eigen::Vector2d e_c = il_ref - il;

  // Slow current PI around the droop reference feed-forward; ideal
  // modulation, v_i = v_i*. The filter inductor is left undecoupled: its
  // physical stationary-frame behaviour is what the certificate relies on.
  Eigen::Vector2d vi;
  vi(0) = v_ref(0) + p.current_kp() * e_c(0) + p.current_ki() * gam(0);
  vi(1) = v_ref(1) + p.current_kp() * e_c(1) + p.current_ki() * gam(1);

  const Eigen::Vector2d vb_loc = rotation(-delta) * Eigen::Vector2d(v_global(0), v_global(1));

  Vec f(ix.n);
  f(ix.delta) = omega - p.omega0;
  f(ix.P) = p.omega_c * (p_inst - P);
  f(ix.Q) = p.omega_c * (q_inst - Q);
  if (ix.phi_d >= 0) {
    f(ix.phi_d) = e_v(0);
    f(ix.phi_q) = e_v(1);
  }
  f(ix.gam_d) = e_c(0);
  f(ix.gam_q) = e_c(1);

  const Eigen::Vector2d dil = (vi - vo - p.R_f * il) / Lf + omega * rot_coupling(il);
  const Eigen::Vector2d dvo = (il - io) / Cf + omega * rot_coupling(vo);
  const Eigen::Vector2d dio = (vo - vb_loc - p.R_c * io) / Lc + omega * rot_coupling(io);
  f(ix.il_d) = dil(0);
  f(ix.il_q) = dil(1);
  f(ix.vo_d) = dvo(0);
  f(ix.vo_q) = dvo(1);
  f(ix.io_d) = dio(0);
  f(ix.io_q) = dio(1);
  return f;
}

Vec gfm_output(const GfmParams& p, const Vec& x) {
  const GfmIndex ix(p);
  const Eigen::Vector2d io(x(ix.io_d), x(ix.io_q));
  const Eigen::Vector2d ig = rotation(x(ix.delta)) * io;
  Vec y(2);
  y << ig(0), ig(1);
  return y;
}

OperatingPoint gfm_equilibrium(const GfmParams& p, const Vec& terminal_voltage_dq) {
  p.validate();
  const double vmag = terminal_voltage_dq.norm();
  if (vmag < 0.8 || vmag > 1.2)
    throw ValidationError("gfm_equilibrium: terminal voltage magnitude outside [0.8, 1.2] p.u.");

  const GfmIndex ix(p);
  Vec x = Vec::Zero(ix.n);
  x(ix.P) = p.P0;
  x(ix.Q) = p.Q0;
  x(ix.vo_d) = terminal_voltage_dq(0);
  x(ix.vo_q) = terminal_voltage_dq(1);

  // Warm start from the phasor steady state. At equilibrium the frequency
  // settles at omega0 (P = P0) and the current PI plus output-current
  // feed-forward pin v_o = v_ref, which in complex notation
  // (z = d + j q, local frame) gives
  //   v_o = V_r,  i_o = (V_r - v_b e^{-j delta}) / z_c,
  // leaving a 2-unknown solve for (delta, Q).
  {
    using Cx = std::complex<double>;
    const Cx zc(p.R_c, p.X_c);
    const Cx vb0(terminal_voltage_dq(0), terminal_voltage_dq(1));
    double delta = 0.0, Q = p.Q0;
    auto residual2 = [&](double d, double q, double* rp, double* rq) {
      const double Vr = p.V0 - p.n_q * (q - p.Q0);
      const Cx vb = vb0 * std::exp(Cx(0.0, -d));
      const Cx vo(Vr, 0.0);
      const Cx io = (vo - vb) / zc;
      const Cx s = vo * std::conj(io);
      *rp = s.real() - p.P0;
      *rq = s.imag() - q;
    };
    bool warm_ok = true;
    for (int it = 0; it < 30; ++it) {
      double rp, rq;
      residual2(delta, Q, &rp, &rq);
      if (std::abs(rp) + std::abs(rq) < 1e-13) break;
      const double h = 1e-7;
      double rp1, rq1, rp2, rq2;
      residual2(delta + h, Q, &rp1, &rq1);
      residual2(delta, Q + h, &rp2, &rq2);
      const double a = (rp1 - rp) / h, b = (rp2 - rp) / h;
      const double c = (rq1 - rq) / h, d2 = (rq2 - rq) / h;
      const double det = a * d2 - b * c;
      if (!(std::abs(det) > 1e-14)) { warm_ok = false; break; }
      delta -= (rp * d2 - rq * b) / det;
      Q -= (a * rq - c * rp) / det;
      if (!std::isfinite(delta) || !std::isfinite(Q) || std::abs(delta) > 1.5) {
        warm_ok = false;
        break;
      }
    }
    if (warm_ok) {
      const double Vr = p.V0 - p.n_q * (Q - p.Q0);
      const Cx vb = vb0 * std::exp(Cx(0.0, -delta));
      const Cx vo(Vr, 0.0);
      const Cx io = (vo - vb) / zc;
      const Cx il = io + Cx(0.0, p.C_f) * vo;
      const Cx vi = vo + (p.R_f + Cx(0.0, p.L_f)) * il;
      const Cx gam = (vi - Cx(Vr, 0.0)) / p.current_ki();
      x(ix.delta) = delta;
      x(ix.Q) = Q;
      x(ix.gam_d) = gam.real();
      x(ix.gam_q) = gam.imag();
      x(ix.il_d) = il.real();
      x(ix.il_q) = il.imag();
      x(ix.vo_d) = vo.real();
      x(ix.vo_q) = vo.imag();
      x(ix.io_d) = io.real();
      x(ix.io_q) = io.imag();
    }
  }

  auto fun = [&](const Vec& xx) { return gfm_dynamics(p, xx, terminal_voltage_dq); };

  Vec f = fun(x);
  for (int it = 0; it < 50; ++it) {
    if (f.lpNorm<Eigen::Infinity>() <= 1e-11) break;
    Mat J(ix.n, ix.n);
    for (int j = 0; j < ix.n; ++j) {
      const double h = 1e-7 * (1.0 + std::abs(x(j)));
      Vec xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      J.col(j) = (fun(xp) - fun(xm)) / (2.0 * h);
    }
    Vec dx = J.fullPivLu().solve(-f);
    // Damped step: halve until the residual decreases.
    double t = 1.0;
    Vec xn;
    Vec fn;
    bool ok = false;
    for (int ls = 0; ls < 30; ++ls) {
      xn = x + t * dx;
      fn = fun(xn);
      if (fn.allFinite() && fn.lpNorm<Eigen::Infinity>() < f.lpNorm<Eigen::Infinity>()) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) throw NoConvergence("gfm_equilibrium: Newton stalled (infeasible operating point?)");
    x = xn;
    f = fn;
  }
  if (f.lpNorm<Eigen::Infinity>() > 1e-10)
    throw NoConvergence("gfm_equilibrium: no convergence after 50 Newton iterations");

  OperatingPoint op;
  op.x = x;
  op.terminal_v_dq = terminal_voltage_dq;
  op.injected_i_dq = gfm_output(p, x);
  op.delta = x(ix.delta);
  op.residual = f.lpNorm<Eigen::Infinity>();
  return op;
}

StateSpaceModel gfm_admittance(const GfmParams& p, const OperatingPoint& op) {
  const GfmIndex ix(p);
  const Vec& x0 = op.x;
  const Vec& v0 = op.terminal_v_dq;

  Mat A(ix.n, ix.n), B(ix.n, 2), C(2, ix.n);
  for (int j = 0; j < ix.n; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(x0(j)));
    Vec xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    A.col(j) = (gfm_dynamics(p, xp, v0) - gfm_dynamics(p, xm, v0)) / (2.0 * h);
    C.col(j) = (gfm_output(p, xp) - gfm_output(p, xm)) / (2.0 * h);
  }
  for (int j = 0; j < 2; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(v0(j)));
    Vec vp = v0, vm = v0;
    vp(j) += h;
    vm(j) -= h;
    B.col(j) = (gfm_dynamics(p, x0, vp) - gfm_dynamics(p, x0, vm)) / (2.0 * h);
  }
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    throw LinearizationFailure("gfm_admittance: non-finite finite-difference Jacobian");
  Eigen::FullPivLU<Mat> lu(A);
  lu.setThreshold(1e-12);
  if (lu.rank() < ix.n)
    throw LinearizationFailure("gfm_admittance: rank-deficient state Jacobian");

  // Passive sign convention: the admittance maps the terminal voltage to
  // the current flowing into the device, i.e. minus the injected current.
  // No direct feedthrough: the coupling inductor separates v_b from i_o.
  return StateSpaceModel(A, B, -C, Mat::Zero(2, 2));
}

StateSpaceModel gfm_admittance(const GfmParams& p) {
  Vec v(2);
  v << p.V0, 0.0;
  return gfm_admittance(p, gfm_equilibrium(p, v));
}

MultiplierFilter MultiplierFilter::piecewise(double omega_f) {
  if (!(omega_f > 0.0)) throw ValidationError("piecewise multiplier: omega_f must be > 0");
  MultiplierFilter m;
  m.kind_ = Kind::piecewise;
  m.omega_f_ = omega_f;
  return m;
}

MultiplierFilter MultiplierFilter::rational(StateSpaceModel model) {
  if (model.inputs() != 2 || model.outputs() != 2)
    throw ValidationError("rational multiplier must be 2x2");
  if (!(model.D() - Mat::Identity(2, 2)).isZero(1e-9))
    throw ValidationError("rational multiplier requires D = I2");
  if (!is_hurwitz(model, 1e-6))
    throw NonHurwitzA("rational multiplier A matrix must be Hurwitz with margin 1e-6");
  MultiplierFilter m;
  m.kind_ = Kind::rational;
  m.model_ = std::move(model);
  return m;
}

MultiplierFilter MultiplierFilter::identity() {
  return rational(StateSpaceModel::static_gain(Mat::Identity(2, 2)));
}

CMat MultiplierFilter::eval(double omega) const {
  if (kind_ == Kind::piecewise) {
    CMat m(2, 2);
    if (omega < omega_f_)
      m << 0.0, -1.0, 1.0, 0.0;
    else
      m = CMat::Identity(2, 2);
    return m;
  }
  return freq_response(*model_, omega);
}

std::uint64_t MultiplierFilter::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  const int k = static_cast<int>(kind_);
  mix(&k, sizeof(k));
  if (kind_ == Kind::piecewise) {
    mix(&omega_f_, sizeof(omega_f_));
  } else {
    auto mix_mat = [&](const Mat& M) {
      for (Eigen::Index i = 0; i < M.size(); ++i) {
        const double v = M.data()[i];
        mix(&v, sizeof(v));
      }
    };
    mix_mat(model_->A());
    mix_mat(model_->B());
    mix_mat(model_->C());
    mix_mat(model_->D());
  }
  return h;
}

}  // namespace pnpcert
