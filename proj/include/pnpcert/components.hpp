#pragma once

#include <optional>

#include "pnpcert/frequency_grid.hpp"
#include "pnpcert/state_space.hpp"

namespace pnpcert {

inline constexpr double kPi = 3.14159265358979323846;

/// Series RL branch, per-unit. X = omega0 * L.
struct LineParams {
  double R = 0.0;      ///< p.u. resistance
  double L = 0.0;      ///< p.u. inductance (seconds scale: X/omega0)
  double omega0 = 0.0; ///< rad/s

  static LineParams from_rx(double R, double X, double omega0) {
    return {R, X / omega0, omega0};
  }
  void validate() const;
};

/// Droop-controlled GFM inverter parameters, per-unit on S_rated.
struct GfmParams {
  double m_p = 0.01;        ///< P-f droop gain
  double n_q = 0.01;        ///< Q-V droop gain
  double omega_c = 125.6637;///< power low-pass cutoff, rad/s
  double K_pv = 1.7778;     ///< voltage loop proportional gain
  double K_iv = 0.0;        ///< voltage loop integral gain
  double K_ic = 3.1416e3;   ///< current-loop time constant, p.u. (tau = K_ic / omega0 s)
  double C_f = 1.7778;      ///< filter capacitance (p.u. susceptance at omega0)
  double L_f = 0.046;       ///< inverter-side filter reactance, p.u.
  double R_f = 0.002;       ///< inverter-side filter resistance, p.u.
  double R_c = 0.01;        ///< coupling resistance, p.u.
  double X_c = 0.015;       ///< coupling reactance, p.u.
  double omega0 = 2.0 * kPi * 50.0;
  double V0 = 1.0;
  double P0 = 0.0;
  double Q0 = 0.0;
  double S_rated = 600.0;   ///< MVA

  void validate() const;

  /// Closed-loop bandwidth of the inner current PI, rad/s. K_ic is the
  /// per-unit loop time constant: tau = K_ic / omega0 seconds.
  double current_bw() const { return omega0 / K_ic; }

  /// Pole-zero cancellation tuning of the inner current PI: the controller
  /// zero cancels the R_f/L_f filter pole and current_bw() sets the
  /// closed-loop bandwidth, giving K_pc = bw * (L_f/omega0), K_ii = bw * R_f.
  double current_kp() const { return current_bw() * L_f / omega0; }
  double current_ki() const { return current_bw() * R_f; }

  /// State count of the small-signal model. The voltage integrators are
  /// dropped when K_iv == 0: they would contribute decoupled zero modes.
  int state_count() const { return K_iv > 0.0 ? 13 : 11; }
};

/// Equilibrium of the nonlinear GFM model for a fixed terminal voltage.
struct OperatingPoint {
  Vec x;              ///< full state vector (see GfmStateIndex ordering)
  Vec terminal_v_dq;  ///< global-frame terminal voltage (input held fixed)
  Vec injected_i_dq;  ///< global-frame injected current at equilibrium
  double delta = 0.0; ///< frame angle, rad
  double residual = 0.0;
};

/// y = Z^{-1} with Z = [[R+sL, -w0 L],[w0 L, R+sL]];
/// realization A = [[-R/L, w0],[-w0, -R/L]], B = I/L, C = I, D = 0.
StateSpaceModel line_admittance(const LineParams& p);

/// Newton solve of the nonlinear GFM steady state. Throws NoConvergence
/// after 50 iterations.
OperatingPoint gfm_equilibrium(const GfmParams& p, const Vec& terminal_voltage_dq);

/// 2x2 small-signal admittance (terminal dq voltage perturbation ->
/// terminal dq current perturbation, passive sign convention: current
/// oriented into the component, global synchronous frame) by central
/// finite differences at op. Lines use the same convention, so passivity
/// of any component reads Her(Y(jw)) > 0.
StateSpaceModel gfm_admittance(const GfmParams& p, const OperatingPoint& op);

/// Convenience: equilibrium at v = (V0, 0) followed by linearization.
StateSpaceModel gfm_admittance(const GfmParams& p);

/// Nonlinear GFM dynamics xdot = f(x, v_global) and output i = h(x),
/// exposed for equilibrium/linearization and their tests.
Vec gfm_dynamics(const GfmParams& p, const Vec& x, const Vec& v_global);
Vec gfm_output(const GfmParams& p, const Vec& x);

/// 2x2 dynamic multiplier m(s): either a rational filter with D = I2 or
/// the piecewise heuristic (90-degree rotation below omega_f, identity
/// at and above).
class MultiplierFilter {
 public:
  enum class Kind { rational, piecewise };

  static MultiplierFilter piecewise(double omega_f);
  static MultiplierFilter rational(StateSpaceModel m);
  static MultiplierFilter identity();

  Kind kind() const { return kind_; }
  double omega_f() const { return omega_f_; }
  const StateSpaceModel& model() const { return *model_; }
  bool is_rational() const { return kind_ == Kind::rational; }

  CMat eval(double omega) const;

  /// FNV-1a hash of the defining parameters.
  std::uint64_t fingerprint() const;

 private:
  MultiplierFilter() = default;
  Kind kind_ = Kind::piecewise;
  double omega_f_ = 0.0;
  std::optional<StateSpaceModel> model_;
};

}  // namespace pnpcert
