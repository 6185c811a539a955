#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pnpcert/certificate.hpp"
#include "pnpcert/components.hpp"
#include "pnpcert/frequency_grid.hpp"
#include "pnpcert/state_space.hpp"

namespace pnpcert {

/// Free parameters of the multiplier filter m(s) = C_m (sI - A_m)^{-1} B_m + I2.
/// A_m = S - (G G^T + 1e-6 I) - 1e-6 I with S skew-symmetric and G lower
/// triangular, both drawn from theta, so every iterate is Hurwitz by
/// construction and the search stays unconstrained.
struct MultiplierTheta {
  int order = 0;
  Vec theta;

  static int param_count(int order);
  static MultiplierTheta zero(int order);

  Mat A() const;
  Mat B() const;
  Mat C() const;
  StateSpaceModel to_model() const;
  MultiplierFilter to_multiplier() const { return MultiplierFilter::rational(to_model()); }
};

struct SynthesisConfig {
  FrequencyGrid grid = FrequencyGrid::default_grid();
  /// Coarser grid driving the inner optimization loop; the result is
  /// re-verified on `grid` and by Hamiltonian bisection.
  int synth_grid_points = 240;
  int starts = 16;
  int max_iters = 300;           ///< L-BFGS iterations per annealing stage
  double step_tol = 1e-10;
  std::vector<double> temperatures = {10.0, 100.0, 1000.0};
  std::uint64_t seed = 1;
};

struct SynthesisResult {
  MultiplierTheta best;
  double grid_objective = 0.0;      ///< max_k of grid-max sigma(R_k) on cfg.grid
  double verified_objective = 0.0;  ///< max_k of bisection H-inf norms
  std::vector<double> component_norms;
  std::vector<double> start_objectives;  ///< final smoothed-grid value per start
  int best_start = -1;
  bool success = false;  ///< verified objective <= 1 + 1e-6
  std::vector<double> trace;  ///< best-start objective at each stage boundary
};

/// Scattering transform R = (I - mY)(I + mY)^{-1} as a state-space model.
/// Throws IllPosedFeedthrough when I + D_m D_Y is singular.
StateSpaceModel scattering(const MultiplierFilter& m, const StateSpaceModel& Y);

/// Grid-approximated max_k ||R_k(theta)||_inf; ill-posed or otherwise
/// degenerate iterates return the penalty value 1e6, keeping the search
/// total.
double objective(const MultiplierTheta& theta,
                 const std::vector<StateSpaceModel>& Ys, const FrequencyGrid& grid);

/// Multi-start smoothed-minimax synthesis (one warm start from a rational
/// fit of the piecewise heuristic, the rest random). Not an exception on
/// failure: success=false reports an inconclusive sufficient test.
SynthesisResult synthesize(const std::vector<std::pair<std::string, StateSpaceModel>>& Ys,
                           int order, const SynthesisConfig& cfg);

/// Cross-validation of the scattering-norm result against the direct
/// Hermitian-part certificate. Components failing the minimum-phase
/// precondition fall back to the direct check (noted in the report id).
Certificate verify(const SynthesisResult& result,
                   const std::vector<std::pair<std::string, StateSpaceModel>>& Ys,
                   const FrequencyGrid& grid, double eps = kDefaultEps);

/// Rational approximation of the piecewise heuristic (rotation below
/// omega_f, identity above), used as the warm start.
MultiplierTheta heuristic_fit(int order, double omega_f);

}  // namespace pnpcert
