#include "pnpcert/network.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

namespace pnpcert {

using nlohmann::json;

namespace {

// d/dt cross-coupling in the synchronous frame: +w0 * Jrot * i.
inline Mat rot2() {
  Mat J(2, 2);
  J << 0.0, 1.0, -1.0, 0.0;
  return J;
}

}  // namespace

void NetworkTopology::validate() const {
  if (buses.empty()) throw ValidationError("network: no buses");
  std::set<std::string> seen(buses.begin(), buses.end());
  if (seen.size() != buses.size()) throw ValidationError("network: duplicate bus ids");
  for (const Branch& l : lines) {
    if (!seen.count(l.from) || !seen.count(l.to))
      throw ValidationError("network: line endpoint references unknown bus");
    if (!(l.R > 0.0) || !(l.X > 0.0))
      throw ValidationError("network: branch R and X must be positive");
  }
  std::set<std::string> device_buses;
  for (const Device& d : devices) {
    if (!seen.count(d.bus)) throw ValidationError("network: device on unknown bus");
    if (!device_buses.insert(d.bus).second)
      throw ValidationError("network: at most one device per bus");
  }
  for (const Load& ld : loads)
    if (!seen.count(ld.bus)) throw ValidationError("network: load on unknown bus");
  if (!(base_mva > 0.0) || !(omega0 > 0.0))
    throw ValidationError("network: base MVA and omega0 must be positive");

  // Connectivity over the line graph.
  if (buses.size() > 1) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const Branch& l : lines) {
      adj[l.from].push_back(l.to);
      adj[l.to].push_back(l.from);
    }
    std::set<std::string> visited{buses.front()};
    std::queue<std::string> q;
    q.push(buses.front());
    while (!q.empty()) {
      const std::string b = q.front();
      q.pop();
      for (const std::string& n : adj[b])
        if (visited.insert(n).second) q.push(n);
    }
    if (visited.size() != buses.size()) throw ValidationError("network: graph not connected");
  }
}

bool NetworkTopology::has_infinite_bus() const {
  for (const Device& d : devices)
    if (d.kind == Device::Kind::infinite_bus) return true;
  return false;
}

int NetworkTopology::bus_index(const std::string& id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i] == id) return static_cast<int>(i);
  throw ValidationError("network: unknown bus id " + id);
}

NetworkTopology load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("network JSON parse failure: ") + e.what());
  }

  NetworkTopology t;
  try {
    t.base_mva = j.value("base_mva", 600.0);
    if (j.contains("omega0"))
      t.omega0 = j.at("omega0").get<double>();
    else if (j.contains("frequency_hz"))
      t.omega0 = 2.0 * kPi * j.at("frequency_hz").get<double>();
    for (const auto& b : j.at("buses")) t.buses.push_back(b.get<std::string>());
    if (!j.contains("lines")) throw ParseError("network: missing 'lines' field");
    const double zbase = j.value("impedance_base_mva", t.base_mva);
    const double zscale = t.base_mva / zbase;  // Z_new = Z_old * S_new / S_old
    for (const auto& l : j.at("lines")) {
      Branch br;
      br.from = l.at("from").get<std::string>();
      br.to = l.at("to").get<std::string>();
      br.R = l.at("r").get<double>() * zscale;
      br.X = l.at("x").get<double>() * zscale;
      t.lines.push_back(br);
    }
    for (const auto& l : j.value("loads", json::array())) {
      Load ld;
      ld.bus = l.at("bus").get<std::string>();
      ld.P = l.at("p_mw").get<double>();
      ld.Q = l.at("q_mvar").get<double>();
      t.loads.push_back(ld);
    }
    for (const auto& d : j.value("devices", json::array())) {
      Device dev;
      dev.bus = d.at("bus").get<std::string>();
      const std::string kind = d.value("type", "gfm");
      if (kind == "infinite_bus") {
        dev.kind = Device::Kind::infinite_bus;
      } else if (kind == "gfm") {
        dev.kind = Device::Kind::gfm;
        GfmParams& g = dev.gfm;
        g.omega0 = t.omega0;
        g.m_p = d.value("m_p", g.m_p);
        g.n_q = d.value("n_q", g.n_q);
        g.omega_c = d.value("omega_c", g.omega_c);
        g.K_pv = d.value("K_pv", g.K_pv);
        g.K_iv = d.value("K_iv", g.K_iv);
        g.K_ic = d.value("K_ic", g.K_ic);
        g.C_f = d.value("C_f", g.C_f);
        g.L_f = d.value("L_f", g.L_f);
        g.R_f = d.value("R_f", g.R_f);
        g.R_c = d.value("R_c", g.R_c);
        g.X_c = d.value("X_c", g.X_c);
        g.V0 = d.value("V0", g.V0);
        g.P0 = d.value("P0", g.P0);
        g.Q0 = d.value("Q0", g.Q0);
        g.S_rated = d.value("s_rated_mva", t.base_mva);
      } else {
        throw ParseError("network: unknown device type '" + kind + "'");
      }
      t.devices.push_back(dev);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("network JSON field error: ") + e.what());
  }
  t.validate();
  return t;
}

StateSpaceModel rebase_admittance(const StateSpaceModel& Y, double s_device,
                                  double s_system) {
  const double c = s_device / s_system;
  return StateSpaceModel(Y.A(), Y.B(), c * Y.C(), c * Y.D());
}

DescriptorModel assemble(const NetworkTopology& topo,
                         const std::map<std::string, StateSpaceModel>& device_models) {
  topo.validate();
  const Mat J = rot2();
  const double w0 = topo.omega0;

  struct DevEntry {
    const Device* dev;
    const StateSpaceModel* model;  // null for infinite bus
  };
  std::map<std::string, DevEntry> dev_at;
  for (const Device& d : topo.devices) {
    DevEntry e{&d, nullptr};
    if (d.kind == Device::Kind::gfm) {
      auto it = device_models.find(d.bus);
      if (it == device_models.end())
        throw MissingDeviceModel("assemble: no model for device at bus " + d.bus);
      if (it->second.inputs() != 2 || it->second.outputs() != 2)
        throw ValidationError("assemble: device model at bus " + d.bus + " is not 2x2");
      e.model = &it->second;
    }
    dev_at[d.bus] = e;
  }

  // Bus classification. A bus whose voltage is fixed contributes no
  // algebraic unknowns and no KCL row: infinite buses, and the degenerate
  // isolated-device bus (documented short-terminal convention).
  std::map<std::string, int> incident;
  for (const Branch& l : topo.lines) {
    incident[l.from]++;
    incident[l.to]++;
  }
  std::map<std::string, double> shunt_G;  // conductances folded into KCL
  std::vector<const Load*> rl_loads;      // series-RL loads with states
  for (const Load& ld : topo.loads) {
    const double P = ld.P / topo.base_mva, Q = ld.Q / topo.base_mva;
    const double s2 = P * P + Q * Q;
    if (Q > 0.0 && s2 > 0.0) {
      rl_loads.push_back(&ld);
      incident[ld.bus]++;
    } else if (P > 0.0) {
      // Capacitive or reactive-free loads: keep the resistive part only.
      shunt_G[ld.bus] += P;
      incident[ld.bus]++;
    }
  }

  std::map<std::string, bool> pinned;
  for (const std::string& b : topo.buses) {
    bool pin = false;
    auto it = dev_at.find(b);
    if (it != dev_at.end()) {
      if (it->second.dev->kind == Device::Kind::infinite_bus) pin = true;
      if (incident[b] == 0) pin = true;  // isolated device bus: short terminal
    }
    pinned[b] = pin;
  }

  // Variable layout: device states | line currents | load currents | bus voltages.
  int n_states = 0;
  std::map<std::string, int> dev_off;
  std::vector<std::string> labels;
  for (const Device& d : topo.devices) {
    if (d.kind != Device::Kind::gfm) continue;
    dev_off[d.bus] = n_states;
    const auto n = dev_at[d.bus].model->order();
    for (Eigen::Index i = 0; i < n; ++i)
      labels.push_back("dev:" + d.bus + ":x" + std::to_string(i));
    n_states += static_cast<int>(n);
  }
  std::vector<int> line_off(topo.lines.size());
  for (std::size_t l = 0; l < topo.lines.size(); ++l) {
    line_off[l] = n_states;
    labels.push_back("line:" + topo.lines[l].from + "-" + topo.lines[l].to + ":id");
    labels.push_back("line:" + topo.lines[l].from + "-" + topo.lines[l].to + ":iq");
    n_states += 2;
  }
  std::vector<int> load_off(rl_loads.size());
  for (std::size_t l = 0; l < rl_loads.size(); ++l) {
    load_off[l] = n_states;
    labels.push_back("load:" + rl_loads[l]->bus + ":id");
    labels.push_back("load:" + rl_loads[l]->bus + ":iq");
    n_states += 2;
  }
  std::map<std::string, int> v_off;
  int n_alg = 0;
  for (const std::string& b : topo.buses) {
    if (pinned[b]) continue;
    v_off[b] = n_states + n_alg;
    labels.push_back("bus:" + b + ":vd");
    labels.push_back("bus:" + b + ":vq");
    n_alg += 2;
  }
  const int N = n_states + n_alg;

  Mat E = Mat::Zero(N, N), A = Mat::Zero(N, N);
  E.topLeftCorner(n_states, n_states).setIdentity();

  // Device rows.
  for (const Device& d : topo.devices) {
    if (d.kind != Device::Kind::gfm) continue;
    const StateSpaceModel& m = *dev_at[d.bus].model;
    const int off = dev_off[d.bus];
    const int n = static_cast<int>(m.order());
    A.block(off, off, n, n) = m.A();
    if (!pinned[d.bus]) A.block(off, v_off[d.bus], n, 2) = m.B();
  }

  // Line rows: di/dt = (-R/L) i + w0 J i + (v_from - v_to)/L.
  for (std::size_t l = 0; l < topo.lines.size(); ++l) {
    const Branch& br = topo.lines[l];
    const double L = br.X / w0;
    const int off = line_off[l];
    A.block(off, off, 2, 2) = (-br.R / L) * Mat::Identity(2, 2) + w0 * J;
    if (!pinned[br.from]) A.block(off, v_off[br.from], 2, 2) = Mat::Identity(2, 2) / L;
    if (!pinned[br.to]) A.block(off, v_off[br.to], 2, 2) = -Mat::Identity(2, 2) / L;
  }

  // Series-RL load rows.
  for (std::size_t l = 0; l < rl_loads.size(); ++l) {
    const Load& ld = *rl_loads[l];
    const double P = ld.P / topo.base_mva, Q = ld.Q / topo.base_mva;
    const double s2 = P * P + Q * Q;
    const double R = P / s2, X = Q / s2;
    const double L = X / w0;
    const int off = load_off[l];
    A.block(off, off, 2, 2) = (-R / L) * Mat::Identity(2, 2) + w0 * J;
    if (!pinned[ld.bus]) A.block(off, v_off[ld.bus], 2, 2) = Mat::Identity(2, 2) / L;
  }

  // KCL rows (E = 0): all drains sum to zero. Device models use the passive
  // sign convention (current into the device), so they drain the bus like
  // lines and loads do.
  for (const std::string& b : topo.buses) {
    if (pinned[b]) continue;
    const int row = v_off[b];
    auto it = dev_at.find(b);
    if (it != dev_at.end() && it->second.model != nullptr) {
      const StateSpaceModel& m = *it->second.model;
      const int off = dev_off[b];
      A.block(row, off, 2, m.order()) = -m.C();
      A.block(row, row, 2, 2) -= m.D();
    }
    for (std::size_t l = 0; l < topo.lines.size(); ++l) {
      if (topo.lines[l].from == b)
        A.block(row, line_off[l], 2, 2) -= Mat::Identity(2, 2);
      if (topo.lines[l].to == b)
        A.block(row, line_off[l], 2, 2) += Mat::Identity(2, 2);
    }
    for (std::size_t l = 0; l < rl_loads.size(); ++l)
      if (rl_loads[l]->bus == b) A.block(row, load_off[l], 2, 2) -= Mat::Identity(2, 2);
    auto g = shunt_G.find(b);
    if (g != shunt_G.end()) A.block(row, row, 2, 2) -= g->second * Mat::Identity(2, 2);
  }

  return {std::move(E), std::move(A), std::move(labels)};
}

StabilityReport finite_eigenvalues(const DescriptorModel& model, double margin,
                                   bool exclude_frame_mode) {
  if (model.A.rows() != model.A.cols() || model.E.rows() != model.E.cols() ||
      model.A.rows() != model.E.rows())
    throw ValidationError("finite_eigenvalues: non-square descriptor pair");

  // Shift-and-invert: the finite eigenvalues of (A, E) are sigma + 1/mu for
  // the nonzero eigenvalues mu of (A - sigma E)^{-1} E, while the algebraic
  // (infinite) modes map to mu = 0. This keeps the near-axis modes -- the
  // ones the stability verdict depends on -- as the dominant, best
  // conditioned eigenvalues, and avoids the spurious huge finite values QZ
  // produces on index-2 pencils when an infinite mode shares a 2x2 block
  // with a finite one.
  Eigen::PartialPivLU<Mat> lu;
  double sigma = 0.0;
  bool invertible = false;
  for (double cand : {0.0, 0.61803398875, -1.113, 3.7, -17.3, 123.4}) {
    lu.compute(model.A - cand * model.E);
    const Vec udiag = lu.matrixLU().diagonal().cwiseAbs();
    if (udiag.minCoeff() > 1e-13 * udiag.maxCoeff()) {
      sigma = cand;
      invertible = true;
      break;
    }
  }
  if (!invertible) throw SingularPencil("finite_eigenvalues: pencil singular at all trial shifts");

  const Mat W = lu.solve(model.E);
  Eigen::EigenSolver<Mat> es(W, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw SingularPencil("finite_eigenvalues: eigenvalue iteration failed");

  // The algebraic modes have mu = 0 up to an absolute error of order
  // ||W|| * machine epsilon, so the infinite-mode threshold must be
  // relative to the dominant |mu|.
  double mu_max = 0.0;
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    mu_max = std::max(mu_max, std::abs(es.eigenvalues()(i)));

  StabilityReport rep;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    const Complex mu = es.eigenvalues()(i);
    if (std::abs(mu) <= 1e-11 * mu_max) continue;  // algebraic (infinite) mode
    const Complex lam = sigma + 1.0 / mu;
    if (std::abs(lam) > 1e10) continue;
    rep.eigenvalues.push_back(lam);
  }
  if (rep.eigenvalues.empty())
    throw SingularPencil("finite_eigenvalues: no finite eigenvalues (singular pencil?)");

  std::size_t skip = rep.eigenvalues.size();
  if (exclude_frame_mode) {
    // At most one near-origin rotational mode from the absolute-angle
    // symmetry of an all-inverter network.
    std::size_t best = 0;
    for (std::size_t i = 1; i < rep.eigenvalues.size(); ++i)
      if (std::abs(rep.eigenvalues[i]) < std::abs(rep.eigenvalues[best])) best = i;
    if (std::abs(rep.eigenvalues[best]) < 1e-4) {
      skip = best;
      rep.frame_mode = rep.eigenvalues[best];
    }
  }
  double absc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i) {
    if (i == skip) continue;
    absc = std::max(absc, rep.eigenvalues[i].real());
  }
  rep.abscissa = absc;
  rep.stable = absc < -margin;
  return rep;
}

std::map<std::string, StateSpaceModel> build_device_models(const NetworkTopology& topo) {
  std::map<std::string, StateSpaceModel> models;
  for (const Device& d : topo.devices) {
    if (d.kind != Device::Kind::gfm) continue;
    const StateSpaceModel y = gfm_admittance(d.gfm);
    models.emplace(d.bus, rebase_admittance(y, d.gfm.S_rated, topo.base_mva));
  }
  return models;
}

std::vector<SweepPoint> droop_sweep(const NetworkTopology& topo, const MultiplierFilter& m,
                                    const std::vector<double>& mp_grid,
                                    const std::vector<double>& nq_grid,
                                    const FrequencyGrid& grid, double eps) {
  topo.validate();
  const Device* gfm_dev = nullptr;
  for (const Device& d : topo.devices)
    if (d.kind == Device::Kind::gfm) {
      if (gfm_dev) throw ValidationError("droop_sweep expects a single GFM device");
      gfm_dev = &d;
    }
  if (!gfm_dev) throw ValidationError("droop_sweep: no GFM device in topology");

  std::vector<SweepPoint> out;
  for (double mp : mp_grid) {
    for (double nq : nq_grid) {
      GfmParams p = gfm_dev->gfm;
      p.m_p = mp;
      p.n_q = nq;
      SweepPoint pt;
      pt.m_p = mp;
      pt.n_q = nq;

      const StateSpaceModel Y =
          rebase_admittance(gfm_admittance(p), p.S_rated, topo.base_mva);

      std::vector<std::pair<std::string, StateSpaceModel>> comps;
      comps.emplace_back("gfm:" + gfm_dev->bus, Y);
      for (const Branch& br : topo.lines)
        comps.emplace_back("line:" + br.from + "-" + br.to,
                           line_admittance(LineParams::from_rx(br.R, br.X, topo.omega0)));
      const Certificate cert = certify_system(m, comps, grid, eps);
      pt.certified = cert.aggregate_pass;
      pt.min_eig = std::numeric_limits<double>::infinity();
      for (const auto& r : cert.components) pt.min_eig = std::min(pt.min_eig, r.min_eig);

      std::map<std::string, StateSpaceModel> models;
      models.emplace(gfm_dev->bus, Y);
      const StabilityReport rep = finite_eigenvalues(assemble(topo, models), 1e-6,
                                                     !topo.has_infinite_bus());
      pt.stable = rep.stable;
      pt.abscissa = rep.abscissa;
      out.push_back(pt);
    }
  }
  return out;
}

std::vector<StabilityReport> random_allocation_experiment(
    const NetworkTopology& topo, int n_trials, int n_devices, std::uint64_t seed,
    double margin) {
  topo.validate();
  std::vector<const Device*> slots;
  for (const Device& d : topo.devices)
    if (d.kind == Device::Kind::gfm) slots.push_back(&d);
  if (n_devices > static_cast<int>(slots.size()))
    throw ValidationError("random_allocation_experiment: n_devices exceeds available GFM slots");

  // Admittances are reused across trials; only the placement changes.
  std::map<std::string, StateSpaceModel> all_models = build_device_models(topo);

  std::vector<StabilityReport> reports;
  for (int trial = 0; trial < n_trials; ++trial) {
    std::mt19937_64 rng(seed * 6364136223846793005ull + static_cast<std::uint64_t>(trial));
    std::vector<std::size_t> idx(slots.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // Partial Fisher-Yates; avoids std::shuffle's unspecified permutation.
    for (int i = 0; i < n_devices; ++i) {
      const std::size_t j = i + rng() % (idx.size() - static_cast<std::size_t>(i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }

    NetworkTopology t = topo;
    t.devices.clear();
    std::map<std::string, StateSpaceModel> models;
    std::vector<std::string> allocation;
    for (int i = 0; i < n_devices; ++i) {
      const Device* d = slots[idx[static_cast<std::size_t>(i)]];
      t.devices.push_back(*d);
      models.emplace(d->bus, all_models.at(d->bus));
      allocation.push_back(d->bus);
    }
    std::sort(allocation.begin(), allocation.end());

    StabilityReport rep =
        finite_eigenvalues(assemble(t, models), margin, !t.has_infinite_bus());
    rep.seed = seed;
    rep.allocation = std::move(allocation);
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::vector<HomotopyPoint> homotopy_trajectory(
    const NetworkTopology& topo, const std::map<std::string, StateSpaceModel>& device_models,
    const std::vector<double>& alphas) {
  topo.validate();
  std::vector<HomotopyPoint> out;
  std::vector<Complex> prev;
  for (double a : alphas) {
    if (a < 0.0 || a > 1.0) throw ValidationError("homotopy_trajectory: alpha outside [0,1]");
    std::map<std::string, StateSpaceModel> blended;
    for (const Device& d : topo.devices) {
      if (d.kind != Device::Kind::gfm) continue;
      // Passive reference: the device's own coupling-impedance RL branch.
      const StateSpaceModel ref = rebase_admittance(
          line_admittance(LineParams::from_rx(d.gfm.R_c, d.gfm.X_c, topo.omega0)),
          d.gfm.S_rated, topo.base_mva);
      // At the exact endpoints the other operand of the blend is
      // unobservable; using the minimal (single-operand) realization keeps
      // the alpha = 0 spectrum that of the all-passive reference network
      // and makes alpha = 1 coincide with the plain assembled system.
      if (a == 0.0)
        blended.emplace(d.bus, ref);
      else if (a == 1.0)
        blended.emplace(d.bus, device_models.at(d.bus));
      else
        blended.emplace(d.bus, affine_blend(ref, device_models.at(d.bus), a));
    }
    const StabilityReport rep =
        finite_eigenvalues(assemble(topo, blended), 1e-6, !topo.has_infinite_bus());

    HomotopyPoint pt;
    pt.alpha = a;
    pt.eigenvalues = rep.eigenvalues;
    if (!prev.empty()) {
      constexpr double db = 1e-9;
      for (const Complex& ev : pt.eigenvalues) {
        // Nearest-neighbour pairing against the previous sample.
        const Complex* nearest = nullptr;
        double bestd = std::numeric_limits<double>::infinity();
        for (const Complex& pv : prev) {
          const double dd = std::abs(ev - pv);
          if (dd < bestd) {
            bestd = dd;
            nearest = &pv;
          }
        }
        if (nearest && ((nearest->real() < -db && ev.real() > db) ||
                        (nearest->real() > db && ev.real() < -db))) {
          pt.crossing = true;
          break;
        }
      }
    }
    prev = pt.eigenvalues;
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace pnpcert
