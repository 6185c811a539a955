// Acceptance suite: one self-contained binary that exercises the full
// certification pipeline against its quantitative targets and prints a
// pass/fail line per criterion. Usage: acceptance <data-dir>.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pnpcert/certificate.hpp"
#include "pnpcert/components.hpp"
#include "pnpcert/hinf.hpp"
#include "pnpcert/json_io.hpp"
#include "pnpcert/network.hpp"
#include "pnpcert/synthesis.hpp"

using namespace pnpcert;

namespace {

std::string g_data_dir;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string artifact;  ///< serialized result for the determinism criterion
};

struct Timed {
  Outcome out;
  double seconds = 0.0;
};

template <typename F>
Timed timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Timed r;
  r.out = f();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

const double kOmega0 = 2.0 * kPi * 50.0;

StateSpaceModel random_stable(std::mt19937_64& rng, int n, int p, int m,
                              double pole_scale = 20.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat M(n, n), B(n, m), C(p, n), D(p, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = pole_scale * nd(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) B(i, j) = nd(rng);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < n; ++j) C(i, j) = nd(rng);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < m; ++j) D(i, j) = nd(rng);
  Eigen::EigenSolver<Mat> es(M, false);
  M -= (es.eigenvalues().real().maxCoeff() + 0.2 * pole_scale) * Mat::Identity(n, n);
  return StateSpaceModel(M, B, C, D);
}

/// Random stable 2x2 system, Hurwitz by construction (A = S - GG' - mu I).
StateSpaceModel random_stable_2x2(std::mt19937_64& rng, int order) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat s = Mat::Zero(order, order), gm(order, order), b(order, 2), c(2, order), d(2, 2);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) {
      gm(i, j) = g(rng);
      if (j > i) {
        const double v = g(rng);
        s(i, j) = v;
        s(j, i) = -v;
      }
    }
  const Mat a = s - gm * gm.transpose() - 0.1 * Mat::Identity(order, order);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < 2; ++j) {
      b(i, j) = g(rng);
      c(j, i) = g(rng);
    }
  d << g(rng), g(rng), g(rng), g(rng);
  return StateSpaceModel(a, b, c, d);
}

// ---------------------------------------------------------------------------
// Criterion 1: 1000 random RL lines are passive on the whole default grid.
Outcome criterion1() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ur(1e-4, 0.2), ux(1e-3, 0.5);
  const auto grid = FrequencyGrid::default_grid();
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto Y = line_admittance(LineParams::from_rx(ur(rng), ux(rng), kOmega0));
    for (double w : grid.points())
      if (hermitian_min_eig(freq_response(Y, w)) <= 0.0) {
        ++failures;
        break;
      }
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = std::to_string(1000 - failures) + "/1000 lines passive on the default grid";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 2: linear blends of PD endpoint pairs stay PD at 11 samples.
Outcome criterion2() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto random_pd = [&] {
    CMat g(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) g(i, j) = Complex(nd(rng), nd(rng));
    return CMat(g * g.adjoint() + 1e-6 * CMat::Identity(2, 2));
  };
  int failures = 0;
  for (int t = 0; t < 500; ++t) {
    const CMat p0 = random_pd(), p1 = random_pd();
    for (int k = 0; k <= 10; ++k) {
      const double a = k / 10.0;
      const CMat blend = (1.0 - a) * p0 + a * p1;
      if (hermitian_min_eig(blend) <= 0.0) {
        ++failures;
        break;
      }
    }
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = std::to_string(500 - failures) + "/500 endpoint pairs PD along the path";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 3: scattering norm <= 1 iff Hermitian part PSD (within tolerances)
// on 100 random 2x2 stable systems with minimum-phase I + G.
Outcome criterion3() {
  std::mt19937_64 rng(7);
  const auto grid = FrequencyGrid::logspace(1e-2, 1e4, 400);
  const auto m = MultiplierFilter::identity();
  int checked = 0, violations = 0;
  for (int trial = 0; trial < 400 && checked < 100; ++trial) {
    const auto G = random_stable_2x2(rng, 3);
    const Mat d = Mat::Identity(2, 2) + G.D();
    if (std::abs(d.determinant()) < 1e-9) continue;
    bool mp = false;
    try {
      mp = minimum_phase(StateSpaceModel(G.A(), G.B(), G.C(), d), 1e-9);
    } catch (const Error&) {
      continue;
    }
    if (!mp) continue;
    ++checked;
    const StateSpaceModel R = scattering(m, G);
    double rnorm = 0.0, gmin = 1e300;
    for (double w : grid.points()) {
      rnorm = std::max(rnorm, max_singular_value(freq_response(R, w)));
      gmin = std::min(gmin, hermitian_min_eig(freq_response(G, w)));
    }
    if (rnorm <= 1.0 - 1e-9 && gmin < -1e-7) ++violations;
    if (gmin >= 1e-7 && rnorm > 1.0 + 1e-9) ++violations;
  }
  Outcome o;
  o.pass = checked == 100 && violations == 0;
  o.detail = std::to_string(checked) + " systems checked, " + std::to_string(violations) +
             " equivalence violations";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 4: grid vs Hamiltonian-bisection H-inf agreement + analytic
// resonance peak.
Outcome criterion4() {
  std::mt19937_64 rng(2024);
  const auto grid = FrequencyGrid::default_grid();
  int disagreements = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto sys = random_stable(rng, 5, 2, 2);
    const double g = hinf_norm_grid(sys, grid).norm;
    const double b = hinf_norm_bisection(sys, 1e-10).norm;
    const double rel = std::abs(g - b) / std::max(1.0, b);
    worst = std::max(worst, rel);
    if (rel > 1e-6) ++disagreements;
  }

  const double zeta = 0.1;
  Mat A(2, 2), B(2, 1), C(1, 2), D(1, 1);
  A << 0.0, 1.0, -1.0, -2.0 * zeta;
  B << 0.0, 1.0;
  C << 1.0, 0.0;
  D << 0.0;
  const StateSpaceModel res(A, B, C, D);
  const double expected = 1.0 / (2.0 * zeta * std::sqrt(1.0 - zeta * zeta));
  const double peak = hinf_norm_bisection(res, 1e-10).norm;
  const bool analytic_ok = std::abs(peak - expected) <= 1e-6 * expected;

  Outcome o;
  o.pass = disagreements == 0 && analytic_ok;
  o.detail = std::to_string(disagreements) + "/100 disagreements (worst rel " + fmt(worst) +
             "); resonance peak " + fmt(peak) + " vs " + fmt(expected);
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 5: piecewise-multiplier droop threshold on the two-bus system.
Outcome criterion5() {
  const auto topo = load_network(g_data_dir + "/two_bus.json");
  const auto m = MultiplierFilter::piecewise(kOmega0);
  const auto grid = FrequencyGrid::default_grid();
  std::vector<double> mp;
  for (int i = 1; i <= 12; ++i) mp.push_back(0.001 * i);
  const auto pts = droop_sweep(topo, m, mp, {0.01}, grid);

  double threshold = 0.0;
  std::ostringstream art;
  for (const auto& p : pts) {
    if (p.certified) threshold = std::max(threshold, p.m_p);
    art << fmt(p.m_p) << "," << fmt(p.n_q) << "," << (p.certified ? 1 : 0) << ","
        << (p.stable ? 1 : 0) << "," << fmt(p.min_eig) << "," << fmt(p.abscissa) << "\n";
  }
  Outcome o;
  o.pass = threshold >= 0.003 && threshold <= 0.009;
  o.detail = "largest certified m_p at n_q=1% is " + fmt(100.0 * threshold) +
             "% (target band [0.3%, 0.9%])";
  o.artifact = art.str();
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 6: order-6 multiplier synthesis on {GFM(1%,1%), line} reaches a
// verified objective <= 1 + 1e-6 and the tuned certificate passes.
Outcome criterion6() {
  GfmParams p;  // defaults are the 1%/1% droop unit
  std::vector<std::pair<std::string, StateSpaceModel>> Ys{
      {"gfm", gfm_admittance(p)},
      {"line", line_admittance(LineParams::from_rx(0.01, 0.015, kOmega0))}};
  SynthesisConfig cfg;  // 16 starts, seed 1
  const auto res = synthesize(Ys, 6, cfg);
  const auto cert = verify(res, Ys, cfg.grid);

  Outcome o;
  o.pass = res.success && cert.aggregate_pass;
  o.detail = "verified objective " + fmt(res.verified_objective) + " (target <= 1+1e-6), " +
             std::to_string(cfg.starts) + " starts, certificate " +
             (cert.aggregate_pass ? "PASS" : "FAIL");
  nlohmann::json j = to_json(res);
  j["certificate"] = to_json(cert);
  o.artifact = j.dump();
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 7: 17x17 droop soundness sweep, 1-5% both axes: no point may be
// certified by the multiplier test yet spectrally unstable.
Outcome criterion7() {
  const auto topo = load_network(g_data_dir + "/two_bus.json");
  const auto m = MultiplierFilter::piecewise(kOmega0);
  const auto grid = FrequencyGrid::default_grid();
  std::vector<double> axis;
  for (int i = 0; i < 17; ++i) axis.push_back(0.01 + 0.04 * i / 16.0);
  const auto pts = droop_sweep(topo, m, axis, axis, grid);

  int certified = 0, stable = 0, unsound = 0;
  std::ostringstream art;
  for (const auto& p : pts) {
    certified += p.certified;
    stable += p.stable;
    unsound += (p.certified && !p.stable);
    art << fmt(p.m_p) << "," << fmt(p.n_q) << "," << (p.certified ? 1 : 0) << ","
        << (p.stable ? 1 : 0) << "," << fmt(p.min_eig) << "," << fmt(p.abscissa) << "\n";
  }
  Outcome o;
  o.pass = unsound == 0 && pts.size() == 289;
  o.detail = std::to_string(pts.size()) + " points, " + std::to_string(certified) +
             " certified, " + std::to_string(stable) + " stable, " + std::to_string(unsound) +
             " certified-but-unstable";
  o.artifact = art.str();
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 8: 39-bus random-allocation experiment, 50 seeded trials with 8
// and with 10 converters at 1%/1% droop; every trial spectrally stable.
Outcome criterion8() {
  const auto topo = load_network(g_data_dir + "/ieee39.json");
  std::ostringstream art;
  int stable = 0, total = 0;
  double worst = -1e300;
  for (int n_dev : {8, 10}) {
    const auto reports = random_allocation_experiment(topo, 50, n_dev, 1234, 1e-6);
    for (const auto& r : reports) {
      ++total;
      stable += r.stable;
      worst = std::max(worst, r.abscissa);
      art << n_dev << "," << (r.stable ? 1 : 0) << "," << fmt(r.abscissa);
      for (const auto& b : r.allocation) art << "," << b;
      art << "\n";
    }
  }
  Outcome o;
  o.pass = stable == total && total == 100;
  o.detail = std::to_string(stable) + "/" + std::to_string(total) +
             " trials stable (worst abscissa " + fmt(worst) + ")";
  o.artifact = art.str();
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 9: homotopy crossing detector. A destabilized (8%, 8%) two-bus
// configuration shows a flagged axis crossing over 21 samples; the certified
// (1%, 1%) configuration shows none.
Outcome criterion9() {
  std::vector<double> alphas;
  for (int i = 0; i <= 20; ++i) alphas.push_back(i / 20.0);

  auto run = [&](double m_p, double n_q, std::ostringstream& art) {
    auto topo = load_network(g_data_dir + "/two_bus.json");
    for (auto& d : topo.devices)
      if (d.kind == Device::Kind::gfm) {
        d.gfm.m_p = m_p;
        d.gfm.n_q = n_q;
      }
    const auto traj = homotopy_trajectory(topo, build_device_models(topo), alphas);
    int crossings = 0;
    for (const auto& pt : traj) {
      crossings += pt.crossing;
      for (const auto& l : pt.eigenvalues)
        art << fmt(pt.alpha) << "," << fmt(l.real()) << "," << fmt(l.imag()) << ","
            << (pt.crossing ? 1 : 0) << "\n";
    }
    return crossings;
  };

  std::ostringstream art;
  const int bad = run(0.08, 0.08, art);
  const int good = run(0.01, 0.01, art);

  Outcome o;
  o.pass = bad >= 1 && good == 0;
  o.detail = "destabilized config: " + std::to_string(bad) +
             " crossing(s); certified config: " + std::to_string(good);
  o.artifact = art.str();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <data-dir> [criteria-ids...]\n");
    return 2;
  }
  g_data_dir = argv[1];
  std::vector<int> selected;
  for (int i = 2; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  auto wanted = [&](int id) {
    if (selected.empty()) return true;
    for (int s : selected)
      if (s == id) return true;
    return false;
  };

  struct Entry {
    int id;
    double budget_s;
    Outcome (*fn)();
  };
  const std::vector<Entry> entries = {
      {1, 10.0, criterion1},  {2, 5.0, criterion2},   {3, 30.0, criterion3},
      {4, 30.0, criterion4},  {5, 120.0, criterion5}, {6, 900.0, criterion6},
      {7, 600.0, criterion7}, {8, 600.0, criterion8}, {9, 60.0, criterion9},
  };

  bool all_pass = true;
  std::vector<std::string> artifacts(10);
  for (const auto& e : entries) {
    if (!wanted(e.id)) continue;
    Timed t;
    try {
      t = timed(e.fn);
    } catch (const std::exception& ex) {
      t.out.pass = false;
      t.out.detail = std::string("exception: ") + ex.what();
    }
    const bool in_budget = t.seconds <= e.budget_s;
    const bool pass = t.out.pass && in_budget;
    all_pass = all_pass && pass;
    artifacts[static_cast<std::size_t>(e.id)] = t.out.artifact;
    std::printf("criterion %d: %s — %s [%.1f s / %.0f s budget]%s\n", e.id,
                pass ? "PASS" : "FAIL", t.out.detail.c_str(), t.seconds, e.budget_s,
                t.out.pass && !in_budget ? " (over budget)" : "");
    std::fflush(stdout);
  }

  // Criterion 10: rerunning criteria 5-9 with the same seeds reproduces
  // byte-identical serialized outputs.
  if (wanted(10)) {
    bool deterministic = true;
    std::string first_diff;
    for (const auto& e : entries) {
      if (e.id < 5 || !wanted(e.id)) continue;
      Outcome again;
      try {
        again = e.fn();
      } catch (const std::exception&) {
        deterministic = false;
        first_diff = "criterion " + std::to_string(e.id) + " rerun threw";
        break;
      }
      if (again.artifact != artifacts[static_cast<std::size_t>(e.id)]) {
        deterministic = false;
        first_diff = "criterion " + std::to_string(e.id) + " output differs";
        break;
      }
    }
    all_pass = all_pass && deterministic;
    std::printf("criterion 10: %s — %s\n", deterministic ? "PASS" : "FAIL",
                deterministic ? "criteria 5-9 reruns byte-identical"
                              : first_diff.c_str());
  }

  std::printf("acceptance: %s\n", all_pass ? "ALL CRITERIA PASS" : "FAILURES PRESENT");
  return all_pass ? 0 : 1;
}
