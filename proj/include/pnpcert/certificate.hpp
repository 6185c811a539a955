#pragma once

#include <string>
#include <vector>

#include "pnpcert/components.hpp"
#include "pnpcert/frequency_grid.hpp"
#include "pnpcert/state_space.hpp"

namespace pnpcert {

/// Per-component generalized-passivity report: the minimum over the grid
/// (with local refinement) of lambda_min(Her(m(jw) Y(jw))).
struct ComponentReport {
  std::string id;
  double min_eig = 0.0;
  double argmin_omega = 0.0;
  bool pass = false;
  double eps = 0.0;
  std::size_t grid_size = 0;
  /// lambda_min of Her(D_m * D_Y): the w->inf limit, reported
  /// informationally since the grid is bounded.
  double inf_limit_eig = 0.0;
};

struct Certificate {
  std::vector<ComponentReport> components;
  bool aggregate_pass = false;
  std::uint64_t multiplier_fingerprint = 0;
  double eps = 0.0;
};

inline constexpr double kDefaultEps = 1e-6;

/// Evaluates lambda_min(Her(m(jw) Y(jw))) at every grid point with
/// golden-section refinement around the minimizing point and a final 4x
/// denser re-check of the arg-min neighbourhood; pass iff the refined
/// minimum > eps. Throws SingularMultiplier when |det m(jw)| <= 1e-9.
ComponentReport check_component(const MultiplierFilter& m, const StateSpaceModel& Y,
                                const FrequencyGrid& grid, double eps = kDefaultEps,
                                const std::string& id = "");

/// Endpoint reports of the linear homotopy (1-a) Y_ref + a Y at a = 0, 1;
/// both passing certifies the whole path.
std::pair<ComponentReport, ComponentReport> check_endpoints(
    const MultiplierFilter& m, const StateSpaceModel& Y_ref, const StateSpaceModel& Y,
    const FrequencyGrid& grid, double eps = kDefaultEps);

struct HomotopySample {
  double alpha = 0.0;
  double min_eig = 0.0;
  double argmin_omega = 0.0;
};

/// Minimum-eigenvalue table along the affine path; diagnostic, not a
/// certification primitive.
std::vector<HomotopySample> sample_homotopy(const MultiplierFilter& m,
                                            const StateSpaceModel& Y_ref,
                                            const StateSpaceModel& Y,
                                            const FrequencyGrid& grid,
                                            const std::vector<double>& alphas);

/// One report per component; aggregate pass is the conjunction. An empty
/// list passes vacuously.
Certificate certify_system(const MultiplierFilter& m,
                           const std::vector<std::pair<std::string, StateSpaceModel>>& components,
                           const FrequencyGrid& grid, double eps = kDefaultEps);

/// (w, lambda_min(Her(mY))) samples over the grid, for plotting.
std::vector<std::pair<double, double>> min_eig_curve(const MultiplierFilter& m,
                                                     const StateSpaceModel& Y,
                                                     const FrequencyGrid& grid);

}  // namespace pnpcert
