#include <doctest.h>

#include <cmath>
#include <random>

#include "pnpcert/certificate.hpp"
#include "pnpcert/components.hpp"

using namespace pnpcert;

namespace {

const double kOmega0 = 2.0 * kPi * 50.0;

StateSpaceModel two_bus_line() {
  return line_admittance(LineParams::from_rx(0.01, 0.015, kOmega0));
}

GfmParams gfm_with_droop(double mp, double nq) {
  GfmParams p;
  p.m_p = mp;
  p.n_q = nq;
  return p;
}

/// Random 2x2 symmetric PD matrix, eigenvalues in (0.1, 2.1].
Mat random_pd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(2, 2);
  m << u(rng), u(rng), u(rng), u(rng);
  Mat q = m + m.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(q);
  double shift = 0.1 - es.eigenvalues().minCoeff();
  return q + shift * Mat::Identity(2, 2) + std::abs(u(rng)) * Mat::Identity(2, 2);
}

}  // namespace

TEST_CASE("identity multiplier certifies an RL line") {
  auto grid = FrequencyGrid::default_grid();
  auto rep = check_component(MultiplierFilter::identity(), two_bus_line(), grid);
  CHECK(rep.pass);
  CHECK(rep.min_eig > kDefaultEps);
  // The w->inf limit of Her(D_m D_Y) is zero for the strictly proper line.
  CHECK(rep.inf_limit_eig == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("identity multiplier fails the droop GFM with a sub-synchronous argmin") {
  auto grid = FrequencyGrid::default_grid();
  auto rep = check_component(MultiplierFilter::identity(), gfm_admittance(GfmParams{}), grid);
  CHECK_FALSE(rep.pass);
  CHECK(rep.min_eig < 0.0);
  CHECK(rep.argmin_omega < kOmega0);
}

TEST_CASE("piecewise heuristic certifies the GFM at 0.5% active droop") {
  auto grid = FrequencyGrid::default_grid();
  auto m = MultiplierFilter::piecewise(kOmega0);
  auto rep = check_component(m, gfm_admittance(gfm_with_droop(0.005, 0.01)), grid);
  CHECK(rep.pass);
  CHECK(rep.min_eig > kDefaultEps);
}

TEST_CASE("piecewise heuristic rejects the GFM at 1% active droop") {
  auto grid = FrequencyGrid::default_grid();
  auto m = MultiplierFilter::piecewise(kOmega0);
  auto rep = check_component(m, gfm_admittance(gfm_with_droop(0.01, 0.01)), grid);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("SingularMultiplier thrown when det m vanishes on the grid") {
  // A rational multiplier whose response crosses zero: m(s) = I2 * s/(s+1)
  // has |det m(jw)| = w^2/(1+w^2) <= 1e-9 at w = 1e-5.
  Mat A = -Mat::Identity(2, 2);
  Mat B = Mat::Identity(2, 2);
  Mat C = -Mat::Identity(2, 2);
  Mat D = Mat::Identity(2, 2);
  auto m = MultiplierFilter::rational(StateSpaceModel(A, B, C, D));
  FrequencyGrid grid({1e-5, 1.0, 10.0});
  CHECK_THROWS_AS(check_component(m, two_bus_line(), grid), SingularMultiplier);
}

TEST_CASE("check_endpoints: degenerate homotopy gives identical reports") {
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 200);
  auto Y = two_bus_line();
  auto [r0, r1] = check_endpoints(MultiplierFilter::identity(), Y, Y, grid);
  CHECK(r0.pass == r1.pass);
  CHECK(r0.min_eig == doctest::Approx(r1.min_eig).epsilon(1e-10));
  CHECK(r0.argmin_omega == doctest::Approx(r1.argmin_omega).epsilon(1e-10));
}

TEST_CASE("check_endpoints: passing reference, failing target fails at alpha=1") {
  auto grid = FrequencyGrid::default_grid();
  auto [r0, r1] = check_endpoints(MultiplierFilter::identity(), two_bus_line(),
                                  gfm_admittance(GfmParams{}), grid);
  CHECK(r0.pass);
  CHECK_FALSE(r1.pass);
}

TEST_CASE("check_endpoints: line reference and certified GFM both pass") {
  auto grid = FrequencyGrid::default_grid();
  auto m = MultiplierFilter::piecewise(kOmega0);
  auto [r0, r1] =
      check_endpoints(m, two_bus_line(), gfm_admittance(gfm_with_droop(0.005, 0.01)), grid);
  CHECK(r0.pass);
  CHECK(r1.pass);
}

TEST_CASE("sample_homotopy: PD endpoints imply PD along the whole path") {
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 300);
  auto m = MultiplierFilter::piecewise(kOmega0);
  auto Y_ref = two_bus_line();
  auto Y = gfm_admittance(gfm_with_droop(0.005, 0.01));
  std::vector<double> alphas;
  for (int i = 0; i <= 10; ++i) alphas.push_back(i / 10.0);
  auto table = sample_homotopy(m, Y_ref, Y, grid, alphas);
  REQUIRE(table.size() == alphas.size());
  for (const auto& s : table) CHECK(s.min_eig > 0.0);
}

TEST_CASE("sample_homotopy: failing endpoint produces a sign change in alpha") {
  auto grid = FrequencyGrid::default_grid();
  auto m = MultiplierFilter::identity();
  auto Y_ref = two_bus_line();
  auto Y = gfm_admittance(GfmParams{});  // fails under the identity multiplier
  std::vector<double> alphas;
  for (int i = 0; i <= 20; ++i) alphas.push_back(i / 20.0);
  auto table = sample_homotopy(m, Y_ref, Y, grid, alphas);
  CHECK(table.front().min_eig > 0.0);
  CHECK(table.back().min_eig < 0.0);
  bool crossed = false;
  for (std::size_t i = 1; i < table.size(); ++i)
    if (table[i - 1].min_eig > 0.0 && table[i].min_eig <= 0.0) crossed = true;
  CHECK(crossed);
}

TEST_CASE("sample_homotopy at {0,1} reduces to check_endpoints") {
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 200);
  auto m = MultiplierFilter::piecewise(kOmega0);
  auto Y_ref = two_bus_line();
  auto Y = gfm_admittance(gfm_with_droop(0.005, 0.01));
  auto table = sample_homotopy(m, Y_ref, Y, grid, {0.0, 1.0});
  // sample_homotopy is grid-only (no refinement); compare against the raw
  // grid minimum of the min-eig curve at each endpoint.
  auto grid_min = [&](const StateSpaceModel& ys) {
    auto curve = min_eig_curve(m, ys, grid);
    double v = curve.front().second;
    for (const auto& p : curve) v = std::min(v, p.second);
    return v;
  };
  CHECK(table[0].min_eig == doctest::Approx(grid_min(Y_ref)).epsilon(1e-10));
  CHECK(table[1].min_eig == doctest::Approx(grid_min(Y)).epsilon(1e-10));
}

TEST_CASE("certify_system: two-bus set with the heuristic at certified droop") {
  auto grid = FrequencyGrid::default_grid();
  auto m = MultiplierFilter::piecewise(kOmega0);
  std::vector<std::pair<std::string, StateSpaceModel>> comps{
      {"gfm", gfm_admittance(gfm_with_droop(0.005, 0.01))}, {"line", two_bus_line()}};
  auto cert = certify_system(m, comps, grid);
  REQUIRE(cert.components.size() == 2);
  CHECK(cert.aggregate_pass);
  CHECK(cert.multiplier_fingerprint == m.fingerprint());
}

TEST_CASE("certify_system: identity multiplier fails the aggregate on the GFM") {
  auto grid = FrequencyGrid::default_grid();
  std::vector<std::pair<std::string, StateSpaceModel>> comps{
      {"gfm", gfm_admittance(GfmParams{})}, {"line", two_bus_line()}};
  auto cert = certify_system(MultiplierFilter::identity(), comps, grid);
  CHECK_FALSE(cert.aggregate_pass);
  CHECK_FALSE(cert.components[0].pass);
  CHECK(cert.components[1].pass);
}

TEST_CASE("certify_system: empty component list passes vacuously") {
  auto grid = FrequencyGrid::logspace(1e-1, 1e3, 10);
  auto cert = certify_system(MultiplierFilter::identity(), {}, grid);
  CHECK(cert.aggregate_pass);
  CHECK(cert.components.empty());
}

TEST_CASE("endpoint lemma: 500 random PD pairs stay PD along 11 alphas") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    Mat p0 = random_pd(rng);
    Mat p1 = random_pd(rng);
    for (int i = 0; i <= 10; ++i) {
      double a = i / 10.0;
      Mat blend = (1.0 - a) * p0 + a * p1;
      CHECK(hermitian_min_eig(blend.cast<Complex>()) > 0.0);
    }
  }
}

TEST_CASE("multiplier scaling: c*m scales every minimum eigenvalue by c") {
  // Rational multipliers pin D = I2, so c*m is exercised at the response
  // level: lambda_min(Her(c m Y)) must equal c * lambda_min(Her(m Y))
  // pointwise, which leaves pass/fail at eps = 0 unchanged.
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 400);
  const double c = 3.7;
  auto m = MultiplierFilter::piecewise(kOmega0);
  for (const auto& Y : {two_bus_line(), gfm_admittance(GfmParams{})}) {
    auto curve = min_eig_curve(m, Y, grid);
    bool pass1 = true, passc = true;
    for (const auto& [w, v] : curve) {
      CMat scaled = c * m.eval(w) * freq_response(Y, w);
      double vc = hermitian_min_eig(scaled);
      CHECK(vc == doctest::Approx(c * v).epsilon(1e-10));
      pass1 = pass1 && v > 0.0;
      passc = passc && vc > 0.0;
    }
    CHECK(pass1 == passc);
  }
}

TEST_CASE("monotone grid refinement: denser grids never raise the minimum") {
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 500);
  auto fine = grid.refined(2);
  auto m = MultiplierFilter::piecewise(kOmega0);
  auto Y = gfm_admittance(gfm_with_droop(0.005, 0.01));
  auto coarse_rep = check_component(m, Y, grid, 0.0);
  auto fine_rep = check_component(m, Y, fine, 0.0);
  CHECK(fine_rep.min_eig <= coarse_rep.min_eig + 1e-8);
}

TEST_CASE("X/R ratio coverage: a certified line certifies every scaled copy") {
  auto grid = FrequencyGrid::logspace(1e-2, 1e5, 300);
  auto m = MultiplierFilter::piecewise(kOmega0);
  const double r0 = 0.01, x0 = 0.015;
  auto base = check_component(m, line_admittance(LineParams::from_rx(r0, x0, kOmega0)), grid);
  REQUIRE(base.pass);
  for (double scale : {0.25, 0.5, 2.0, 4.0, 10.0}) {
    auto rep = check_component(
        m, line_admittance(LineParams::from_rx(scale * r0, scale * x0, kOmega0)), grid);
    CHECK(rep.pass);
  }
}

TEST_CASE("argmin frequency lies within the grid span") {
  auto grid = FrequencyGrid::default_grid();
  auto rep = check_component(MultiplierFilter::piecewise(kOmega0),
                             gfm_admittance(gfm_with_droop(0.005, 0.01)), grid);
  CHECK(rep.argmin_omega >= grid.points().front());
  CHECK(rep.argmin_omega <= grid.points().back());
  CHECK(rep.grid_size == grid.size());
}
