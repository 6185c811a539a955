#include <doctest.h>

#include <cmath>
#include <random>

#include "pnpcert/hinf.hpp"
#include "pnpcert/synthesis.hpp"

using namespace pnpcert;

namespace {

const double kOmega0 = 2.0 * kPi * 50.0;

StateSpaceModel two_bus_line() {
  return line_admittance(LineParams::from_rx(0.01, 0.015, kOmega0));
}

MultiplierFilter identity_multiplier() { return MultiplierFilter::identity(); }

/// Random stable 2x2 system; A = S - Q - mu I is Hurwitz by construction.
StateSpaceModel random_stable(std::mt19937_64& rng, int order) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat s = Mat::Zero(order, order), gm(order, order), b(order, 2), c(2, order), d(2, 2);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) {
      gm(i, j) = g(rng);
      if (j > i) {
        double v = g(rng);
        s(i, j) = v;
        s(j, i) = -v;
      }
    }
  Mat a = s - gm * gm.transpose() - 0.1 * Mat::Identity(order, order);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < 2; ++j) {
      b(i, j) = g(rng);
      c(j, i) = g(rng);
    }
  d << g(rng), g(rng), g(rng), g(rng);
  return StateSpaceModel(a, b, c, d);
}

}  // namespace

TEST_CASE("scattering: mY = I gives R = 0") {
  auto Y = StateSpaceModel::static_gain(Mat::Identity(2, 2));
  auto R = scattering(identity_multiplier(), Y);
  CHECK(R.order() == 0);
  CHECK(R.D().cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("scattering: mY = 0 gives R = I with unit norm") {
  auto Y = StateSpaceModel::static_gain(Mat::Zero(2, 2));
  auto R = scattering(identity_multiplier(), Y);
  CHECK((R.D() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0).epsilon(1e-14));
  auto grid = FrequencyGrid::logspace(1e-2, 1e4, 50);
  CHECK(hinf_norm_grid(R, grid).norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scattering: static gain 3 maps to -0.5") {
  auto Y = StateSpaceModel::static_gain(3.0 * Mat::Identity(2, 2));
  auto R = scattering(identity_multiplier(), Y);
  CHECK((R.D() + 0.5 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0).epsilon(1e-12));
  auto grid = FrequencyGrid::logspace(1e-2, 1e4, 50);
  CHECK(hinf_norm_grid(R, grid).norm == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scattering response matches the matrix formula on the grid") {
  std::mt19937_64 rng(11);
  auto grid = FrequencyGrid::logspace(1e-2, 1e4, 60);
  auto m = heuristic_fit(2, kOmega0).to_multiplier();
  for (int trial = 0; trial < 5; ++trial) {
    auto Y = random_stable(rng, 3);
    StateSpaceModel R = scattering(m, Y);
    for (double w : grid.points()) {
      CMat my = m.eval(w) * freq_response(Y, w);
      CMat i2 = CMat::Identity(2, 2);
      if (std::abs((i2 + my).determinant()) < 1e-6) continue;  // near ill-posed
      CMat expect = (i2 - my) * (i2 + my).inverse();
      CMat got = freq_response(R, w);
      CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("scattering: singular I + D_m D_Y throws IllPosedFeedthrough") {
  auto Y = StateSpaceModel::static_gain(-Mat::Identity(2, 2));
  CHECK_THROWS_AS(scattering(identity_multiplier(), Y), IllPosedFeedthrough);
}

TEST_CASE("objective: identity theta on a passive line is below 1") {
  auto theta = MultiplierTheta::zero(1);
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 200);
  double v = objective(theta, {two_bus_line()}, grid);
  CHECK(v < 1.0);
}

TEST_CASE("objective: identity theta on the droop GFM exceeds 1") {
  auto theta = MultiplierTheta::zero(1);
  auto grid = FrequencyGrid::default_grid();
  double v = objective(theta, {gfm_admittance(GfmParams{})}, grid);
  CHECK(v > 1.0);
}

TEST_CASE("objective: empty component list gives 0") {
  auto theta = MultiplierTheta::zero(1);
  auto grid = FrequencyGrid::logspace(1e-1, 1e3, 10);
  CHECK(objective(theta, {}, grid) == 0.0);
}

TEST_CASE("theta parametrization always yields a Hurwitz multiplier") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    MultiplierTheta t = MultiplierTheta::zero(4);
    for (int i = 0; i < t.theta.size(); ++i) t.theta(i) = 3.0 * g(rng);
    auto model = t.to_model();
    CHECK(is_hurwitz(model, 1e-7));
    CHECK((model.D() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("synthesize: line-only at order 1 succeeds quickly") {
  SynthesisConfig cfg;
  cfg.starts = 2;
  cfg.max_iters = 60;
  auto r = synthesize({{"line", two_bus_line()}}, 1, cfg);
  CHECK(r.success);
  CHECK(r.verified_objective <= 1.0 + 1e-6);
  REQUIRE(r.component_norms.size() == 1);
  CHECK(r.component_norms[0] <= 1.0 + 1e-6);
  CHECK(r.verified_objective >= r.grid_objective - 1e-6);
}

TEST_CASE("synthesize: open-circuit component admits no feasible multiplier") {
  SynthesisConfig cfg;
  cfg.starts = 2;
  cfg.max_iters = 40;
  auto Y0 = StateSpaceModel::static_gain(Mat::Zero(2, 2));
  auto r = synthesize({{"open", Y0}}, 1, cfg);
  CHECK_FALSE(r.success);  // R = I identically, norm pinned at 1 with no margin below
}

TEST_CASE("synthesize is deterministic for a fixed seed") {
  SynthesisConfig cfg;
  cfg.starts = 2;
  cfg.max_iters = 30;
  cfg.seed = 42;
  auto a = synthesize({{"line", two_bus_line()}}, 1, cfg);
  auto b = synthesize({{"line", two_bus_line()}}, 1, cfg);
  CHECK(a.grid_objective == b.grid_objective);
  CHECK(a.verified_objective == b.verified_objective);
  CHECK(a.best_start == b.best_start);
  REQUIRE(a.best.theta.size() == b.best.theta.size());
  CHECK((a.best.theta - b.best.theta).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.start_objectives.size() == b.start_objectives.size());
  for (std::size_t i = 0; i < a.start_objectives.size(); ++i)
    CHECK(a.start_objectives[i] == b.start_objectives[i]);
}

TEST_CASE("best-start bookkeeping returns the minimum over all starts") {
  SynthesisConfig cfg;
  cfg.starts = 4;
  cfg.max_iters = 30;
  auto r = synthesize({{"line", two_bus_line()}}, 1, cfg);
  REQUIRE(r.best_start >= 0);
  REQUIRE(static_cast<std::size_t>(r.best_start) < r.start_objectives.size());
  double best = r.start_objectives[r.best_start];
  for (std::size_t i = 0; i < r.start_objectives.size(); ++i) {
    CHECK(best <= r.start_objectives[i] + 1e-12);
    if (r.start_objectives[i] == best) {
      // ties break toward the lowest start index
      CHECK(static_cast<std::size_t>(r.best_start) <= i);
      break;
    }
  }
}

TEST_CASE("verify: identity multiplier on the GFM fails both formulations") {
  auto grid = FrequencyGrid::default_grid();
  SynthesisResult r;
  r.best = MultiplierTheta::zero(1);
  r.success = false;
  std::vector<std::pair<std::string, StateSpaceModel>> Ys{{"gfm", gfm_admittance(GfmParams{})}};
  double norm = objective(r.best, {Ys[0].second}, grid);
  auto cert = verify(r, Ys, grid);
  CHECK(norm > 1.0);
  CHECK_FALSE(cert.aggregate_pass);
}

TEST_CASE("scattering-norm/passivity equivalence on random stable systems") {
  std::mt19937_64 rng(7);
  auto grid = FrequencyGrid::logspace(1e-2, 1e4, 400);
  auto m = identity_multiplier();
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 100; ++trial) {
    auto G = random_stable(rng, 3);
    CMat ipg = CMat::Identity(2, 2) + freq_response(G, 0.0).cast<Complex>();
    bool ok = true;
    try {
      Mat d = Mat::Identity(2, 2) + G.D();
      if (std::abs(d.determinant()) < 1e-9) continue;
      StateSpaceModel ig(G.A(), G.B(), G.C(), d);
      ok = minimum_phase(ig, 1e-9);
    } catch (const Error&) {
      continue;
    }
    if (!ok) continue;
    ++checked;
    StateSpaceModel R = scattering(m, G);
    double rnorm = 0.0;
    double gmin = 1e300;
    for (double w : grid.points()) {
      rnorm = std::max(rnorm, max_singular_value(freq_response(R, w)));
      gmin = std::min(gmin, hermitian_min_eig(freq_response(G, w)));
    }
    if (rnorm <= 1.0 - 1e-9) CHECK(gmin >= -1e-7);
    if (gmin >= 1e-7) CHECK(rnorm <= 1.0 + 1e-9);
  }
  CHECK(checked == 100);
}

TEST_CASE("heuristic fit approximates the piecewise multiplier at the band edges") {
  auto t = heuristic_fit(4, kOmega0);
  auto m = t.to_multiplier();
  // Far below omega_f the fit should rotate by ~90 degrees; far above it
  // should be near identity. The rational fit is smooth, so only the
  // asymptotes are checked, loosely.
  CMat low = m.eval(1e-2);
  CMat rot(2, 2);
  rot << 0, -1, 1, 0;
  CHECK((low - rot.cast<Complex>()).cwiseAbs().maxCoeff() < 0.35);
  CMat high = m.eval(1e5);
  CHECK((high - CMat::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.35);
}
