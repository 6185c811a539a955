#pragma once

#include <functional>

#include "pnpcert/frequency_grid.hpp"
#include "pnpcert/state_space.hpp"

namespace pnpcert {

struct HinfResult {
  double norm = 0.0;
  double omega = 0.0;  ///< achieving frequency (0 for the D-term / DC peak)
};

/// Grid maximum of sigma_max(G(jw)) with golden-section refinement around
/// the arg-max. Also samples the w=0 and w->inf (D) values.
HinfResult hinf_norm_grid(const StateSpaceModel& sys, const FrequencyGrid& grid);

/// H-infinity norm via the Hamiltonian imaginary-eigenvalue test with
/// gamma-bisection to absolute tolerance tol. Requires A Hurwitz.
HinfResult hinf_norm_bisection(const StateSpaceModel& sys, double tol = 1e-8);

/// Golden-section search minimizing f over [a, b]; returns (x, f(x)).
std::pair<double, double> golden_section_min(const std::function<double(double)>& f,
                                             double a, double b, double reltol = 1e-9,
                                             int max_iter = 200);

}  // namespace pnpcert
