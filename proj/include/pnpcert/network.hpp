#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pnpcert/certificate.hpp"
#include "pnpcert/components.hpp"
#include "pnpcert/state_space.hpp"

namespace pnpcert {

struct Branch {
  std::string from, to;
  double R = 0.0;  ///< p.u. on the system base
  double X = 0.0;  ///< p.u. reactance on the system base
};

struct Load {
  std::string bus;
  double P = 0.0;  ///< MW consumed at nominal voltage
  double Q = 0.0;  ///< MVAr consumed (inductive positive)
};

struct Device {
  enum class Kind { gfm, infinite_bus };
  std::string bus;
  Kind kind = Kind::gfm;
  GfmParams gfm;  ///< valid when kind == gfm
};

struct NetworkTopology {
  std::vector<std::string> buses;
  std::vector<Branch> lines;  ///< lines and transformers, both RL branches
  std::vector<Load> loads;
  std::vector<Device> devices;
  double base_mva = 600.0;
  double omega0 = 2.0 * kPi * 50.0;

  void validate() const;
  bool has_infinite_bus() const;
  int bus_index(const std::string& id) const;
};

/// Parse and validate a network JSON file; converts device parameters to
/// the common system base.
NetworkTopology load_network(const std::string& path);

/// Descriptor pair (E, A): device states, line/load branch currents and
/// algebraic bus-voltage unknowns with KCL rows (E singular there).
struct DescriptorModel {
  Mat E, A;
  std::vector<std::string> labels;
};

/// Rescale a device admittance from its own MVA base to the system base.
StateSpaceModel rebase_admittance(const StateSpaceModel& Y, double s_device,
                                  double s_system);

DescriptorModel assemble(const NetworkTopology& topo,
                         const std::map<std::string, StateSpaceModel>& device_models);

struct StabilityReport {
  std::vector<Complex> eigenvalues;  ///< finite spectrum
  double abscissa = 0.0;
  bool stable = false;
  /// Near-origin rotational frame mode excluded from the abscissa when no
  /// infinite bus pins the absolute angle (at most one).
  std::optional<Complex> frame_mode;
  std::uint64_t seed = 0;
  std::vector<std::string> allocation;
};

/// Generalized eigenvalues of (A, E); infinite eigenvalues discarded.
/// Stable iff the spectral abscissa < -margin.
StabilityReport finite_eigenvalues(const DescriptorModel& model, double margin = 1e-6,
                                   bool exclude_frame_mode = false);

struct SweepPoint {
  double m_p = 0.0, n_q = 0.0;
  bool certified = false;
  bool stable = false;
  double min_eig = 0.0;
  double abscissa = 0.0;
};

/// Per-(m_p, n_q) certificate vs eigenvalue stability on the two-bus
/// configuration.
std::vector<SweepPoint> droop_sweep(const NetworkTopology& topo, const MultiplierFilter& m,
                                    const std::vector<double>& mp_grid,
                                    const std::vector<double>& nq_grid,
                                    const FrequencyGrid& grid, double eps = kDefaultEps);

/// Deterministic random placements of GFMs on candidate (generator) buses;
/// full eigensolve per trial.
std::vector<StabilityReport> random_allocation_experiment(
    const NetworkTopology& topo, int n_trials, int n_devices, std::uint64_t seed,
    double margin = 1e-6);

struct HomotopyPoint {
  double alpha = 0.0;
  std::vector<Complex> eigenvalues;
  bool crossing = false;  ///< an eigenvalue's real part changed sign since the previous alpha
};

/// Finite spectra along the affine device homotopy from a passive
/// reference (the coupling-impedance RL admittance) to the actual device
/// models, with axis-crossing detection between consecutive samples.
std::vector<HomotopyPoint> homotopy_trajectory(
    const NetworkTopology& topo, const std::map<std::string, StateSpaceModel>& device_models,
    const std::vector<double>& alphas);

/// Build the admittance models for every GFM device of the topology,
/// linearized at the no-load terminal point and rebased to the system base.
std::map<std::string, StateSpaceModel> build_device_models(const NetworkTopology& topo);

}  // namespace pnpcert
