// pnpcert: certify small-signal stability of inverter-dominated networks.
//
// Subcommands: model, synth, certify, sweep, eig, homotopy.
// Exit codes: 0 success / verdict pass, 2 input error, 3 synthesis
// inconclusive, 4 certificate failed.

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "pnpcert/json_io.hpp"
#include "pnpcert/network.hpp"
#include "pnpcert/synthesis.hpp"

namespace fs = std::filesystem;
using namespace pnpcert;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "pnpcert 1.0.0";

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> grid_min, grid_max;
  std::optional<int> grid_points;
  std::optional<int> order;
  std::optional<int> starts;
  std::optional<double> eps;
};

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_config(const Options& opt) {
  const std::string text = read_file(opt.config);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("config " + opt.config + ": " + e.what());
  }
}

/// Hash of the config file bytes and every effective override flag.
std::uint64_t config_hash(const Options& opt) {
  std::uint64_t h = fnv1a(read_file(opt.config));
  std::ostringstream flags;
  if (opt.seed) flags << " seed=" << *opt.seed;
  if (opt.grid_min) flags << " gmin=" << *opt.grid_min;
  if (opt.grid_max) flags << " gmax=" << *opt.grid_max;
  if (opt.grid_points) flags << " gpts=" << *opt.grid_points;
  if (opt.order) flags << " order=" << *opt.order;
  if (opt.starts) flags << " starts=" << *opt.starts;
  if (opt.eps) flags << " eps=" << *opt.eps;
  return fnv1a(flags.str(), h);
}

FrequencyGrid make_grid(const Options& opt, double omega0) {
  if (opt.grid_min || opt.grid_max || opt.grid_points)
    return FrequencyGrid::logspace(opt.grid_min.value_or(1e-2), opt.grid_max.value_or(1e5),
                                   opt.grid_points.value_or(2000));
  return FrequencyGrid::default_grid(omega0);
}

std::string header(const Options& opt, std::uint64_t multiplier_fp) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# %s; config_hash=%016" PRIx64 "; multiplier=%016" PRIx64,
                kVersion, config_hash(opt), multiplier_fp);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path.string());
  out << text;
}

json meta(const Options& opt, std::uint64_t multiplier_fp) {
  char ch[24], mf[24];
  std::snprintf(ch, sizeof(ch), "%016" PRIx64, config_hash(opt));
  std::snprintf(mf, sizeof(mf), "%016" PRIx64, multiplier_fp);
  return json{{"tool", kVersion}, {"config_hash", ch}, {"multiplier", mf}};
}

MultiplierFilter multiplier_from_config(const json& cfg, const std::string& config_dir) {
  if (cfg.contains("multiplier_file")) {
    fs::path p = cfg.at("multiplier_file").get<std::string>();
    if (p.is_relative()) p = fs::path(config_dir) / p;
    json mj = json::parse(read_file(p.string()));
    if (mj.contains("multiplier")) mj = mj.at("multiplier");  // synth report file
    if (!mj.contains("kind")) mj["kind"] = "rational";
    return multiplier_from_json(mj);
  }
  if (cfg.contains("multiplier")) return multiplier_from_json(cfg.at("multiplier"));
  throw ParseError("config: expected 'multiplier' or 'multiplier_file'");
}

std::string resolve_network_path(const json& cfg, const std::string& config_dir) {
  fs::path p = cfg.at("network").get<std::string>();
  if (p.is_relative()) p = fs::path(config_dir) / p;
  return p.string();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------- model ----

int cmd_model(const Options& opt) {
  const json cfg = load_config(opt);
  const double omega0 = cfg.value("omega0", 2.0 * kPi * 50.0);
  const auto comps = components_from_json(cfg.at("components"), omega0);
  if (comps.empty()) throw ParseError("model: empty component list");
  const FrequencyGrid grid = make_grid(opt, omega0);

  for (const auto& [id, Y] : comps) {
    std::ostringstream csv;
    csv << header(opt, 0) << "\n";
    csv << "omega,re_y11,im_y11,re_y12,im_y12,re_y21,im_y21,re_y22,im_y22,herm_min_eig\n";
    for (double w : grid.points()) {
      const CMat y = freq_response(Y, w);
      csv << fmt(w);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          csv << "," << fmt(y(i, j).real()) << "," << fmt(y(i, j).imag());
      csv << "," << fmt(hermitian_min_eig(y)) << "\n";
    }
    write_text(fs::path(opt.out) / (id + "_response.csv"), csv.str());
  }
  std::printf("model: wrote %zu component response file(s) to %s\n", comps.size(),
              opt.out.c_str());
  return 0;
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(const Options& opt) {
  const json cfg = load_config(opt);
  const double omega0 = cfg.value("omega0", 2.0 * kPi * 50.0);
  const auto comps = components_from_json(cfg.at("components"), omega0);
  if (comps.empty()) throw ParseError("synth: empty component list");
  const int order = opt.order.value_or(cfg.value("order", 6));
  if (order < 1) throw ParseError("synth: order must be >= 1");

  SynthesisConfig scfg;
  scfg.grid = make_grid(opt, omega0);
  scfg.starts = opt.starts.value_or(cfg.value("starts", scfg.starts));
  scfg.seed = opt.seed.value_or(cfg.value("seed", scfg.seed));
  scfg.max_iters = cfg.value("max_iters", scfg.max_iters);

  const SynthesisResult result = synthesize(comps, order, scfg);
  const MultiplierFilter m = result.best.to_multiplier();

  json report = to_json(result);
  report["meta"] = meta(opt, m.fingerprint());
  write_text(fs::path(opt.out) / "synthesis_report.json", report.dump(2) + "\n");

  json mj = to_json(m);
  mj["meta"] = meta(opt, m.fingerprint());
  write_text(fs::path(opt.out) / "multiplier.json", mj.dump(2) + "\n");

  std::printf("synth: order=%d starts=%d verified_objective=%s -> %s\n", order, scfg.starts,
              fmt(result.verified_objective).c_str(),
              result.success ? "success" : "inconclusive");
  return result.success ? 0 : 3;
}

// -------------------------------------------------------------- certify ----

int cmd_certify(const Options& opt) {
  const json cfg = load_config(opt);
  const double omega0 = cfg.value("omega0", 2.0 * kPi * 50.0);
  const auto comps = components_from_json(cfg.at("components"), omega0);
  const MultiplierFilter m =
      multiplier_from_config(cfg, fs::path(opt.config).parent_path().string());
  const FrequencyGrid grid = make_grid(opt, omega0);
  const double eps = opt.eps.value_or(cfg.value("eps", kDefaultEps));

  const Certificate cert = certify_system(m, comps, grid, eps);

  json cj = to_json(cert);
  cj["meta"] = meta(opt, m.fingerprint());
  write_text(fs::path(opt.out) / "certificate.json", cj.dump(2) + "\n");

  for (const auto& [id, Y] : comps) {
    std::ostringstream csv;
    csv << header(opt, m.fingerprint()) << "\n";
    csv << "omega,lambda_min\n";
    for (const auto& [w, v] : min_eig_curve(m, Y, grid))
      csv << fmt(w) << "," << fmt(v) << "\n";
    write_text(fs::path(opt.out) / (id + "_mineig.csv"), csv.str());
  }

  std::printf("certify: %zu component(s), aggregate %s\n", cert.components.size(),
              cert.aggregate_pass ? "PASS" : "FAIL");
  return cert.aggregate_pass ? 0 : 4;
}

// ---------------------------------------------------------------- sweep ----

std::vector<double> axis_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  const double lo = j.at("min").get<double>(), hi = j.at("max").get<double>();
  const int n = j.at("points").get<int>();
  if (n < 1) throw ParseError("sweep: axis needs points >= 1");
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  return v;
}

int cmd_sweep(const Options& opt) {
  const json cfg = load_config(opt);
  const std::string dir = fs::path(opt.config).parent_path().string();
  const NetworkTopology topo = load_network(resolve_network_path(cfg, dir));
  const MultiplierFilter m = multiplier_from_config(cfg, dir);
  const FrequencyGrid grid = make_grid(opt, topo.omega0);
  const double eps = opt.eps.value_or(cfg.value("eps", kDefaultEps));
  const auto mp = axis_from_json(cfg.at("mp_grid"));
  const auto nq = axis_from_json(cfg.at("nq_grid"));

  const auto table = droop_sweep(topo, m, mp, nq, grid, eps);

  std::ostringstream csv;
  csv << header(opt, m.fingerprint()) << "\n";
  csv << "m_p,n_q,certified,stable,min_eig,abscissa\n";
  int certified = 0, stable = 0, unsound = 0;
  for (const auto& pt : table) {
    csv << fmt(pt.m_p) << "," << fmt(pt.n_q) << "," << (pt.certified ? 1 : 0) << ","
        << (pt.stable ? 1 : 0) << "," << fmt(pt.min_eig) << "," << fmt(pt.abscissa) << "\n";
    certified += pt.certified;
    stable += pt.stable;
    unsound += pt.certified && !pt.stable;
  }
  write_text(fs::path(opt.out) / "sweep.csv", csv.str());
  std::printf("sweep: %zu points, %d certified, %d stable, %d certified-but-unstable\n",
              table.size(), certified, stable, unsound);
  return 0;
}

// ------------------------------------------------------------------ eig ----

int cmd_eig(const Options& opt) {
  const json cfg = load_config(opt);
  const std::string dir = fs::path(opt.config).parent_path().string();
  const NetworkTopology topo = load_network(resolve_network_path(cfg, dir));
  const int n_trials = cfg.value("n_trials", 50);
  const int n_devices = cfg.value("n_devices", 10);
  const std::uint64_t seed = opt.seed.value_or(cfg.value("seed", 7));
  const double margin = cfg.value("margin", 1e-6);

  const auto reports = random_allocation_experiment(topo, n_trials, n_devices, seed, margin);

  std::ostringstream csv;
  csv << header(opt, 0) << "\n";
  csv << "trial,stable,abscissa,allocation\n";
  int stable = 0;
  for (std::size_t t = 0; t < reports.size(); ++t) {
    const auto& r = reports[t];
    std::string alloc;
    for (const auto& b : r.allocation) alloc += (alloc.empty() ? "" : " ") + b;
    csv << t << "," << (r.stable ? 1 : 0) << "," << fmt(r.abscissa) << "," << alloc << "\n";
    stable += r.stable;
  }
  write_text(fs::path(opt.out) / "trials.csv", csv.str());

  std::ostringstream spectra;
  spectra << header(opt, 0) << "\n";
  spectra << "trial,re,im\n";
  for (std::size_t t = 0; t < reports.size(); ++t)
    for (const auto& l : reports[t].eigenvalues)
      spectra << t << "," << fmt(l.real()) << "," << fmt(l.imag()) << "\n";
  write_text(fs::path(opt.out) / "spectra.csv", spectra.str());

  std::printf("eig: %d/%zu stable (seed %" PRIu64 ", %d devices)\n", stable, reports.size(),
              seed, n_devices);
  return 0;
}

// ------------------------------------------------------------- homotopy ----

int cmd_homotopy(const Options& opt) {
  const json cfg = load_config(opt);
  const std::string dir = fs::path(opt.config).parent_path().string();
  NetworkTopology topo = load_network(resolve_network_path(cfg, dir));
  if (cfg.contains("m_p") || cfg.contains("n_q")) {
    for (auto& d : topo.devices) {
      if (d.kind != Device::Kind::gfm) continue;
      d.gfm.m_p = cfg.value("m_p", d.gfm.m_p);
      d.gfm.n_q = cfg.value("n_q", d.gfm.n_q);
    }
  }
  const int n_alphas = cfg.value("alphas", 21);
  if (n_alphas < 1) throw ParseError("homotopy: alphas must be >= 1");
  std::vector<double> alphas;
  for (int i = 0; i < n_alphas; ++i)
    alphas.push_back(n_alphas == 1 ? 1.0 : static_cast<double>(i) / (n_alphas - 1));

  const auto models = build_device_models(topo);
  const auto traj = homotopy_trajectory(topo, models, alphas);

  std::ostringstream csv;
  csv << header(opt, 0) << "\n";
  csv << "alpha,re,im,crossing_flag\n";
  int crossings = 0;
  for (const auto& pt : traj) {
    for (const auto& l : pt.eigenvalues)
      csv << fmt(pt.alpha) << "," << fmt(l.real()) << "," << fmt(l.imag()) << ","
          << (pt.crossing ? 1 : 0) << "\n";
    crossings += pt.crossing;
  }
  write_text(fs::path(opt.out) / "loci.csv", csv.str());
  std::printf("homotopy: %zu alpha samples, %d crossing(s) flagged\n", traj.size(), crossings);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play passivity certification for inverter-dominated networks"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "input config JSON")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "random seed override");
    sub->add_option("--grid-min", opt.grid_min, "grid minimum, rad/s");
    sub->add_option("--grid-max", opt.grid_max, "grid maximum, rad/s");
    sub->add_option("--grid-points", opt.grid_points, "number of grid points");
    sub->add_option("--order", opt.order, "multiplier order");
    sub->add_option("--starts", opt.starts, "synthesis multi-starts");
    sub->add_option("--eps", opt.eps, "certificate strictness margin");
  };

  auto* model = app.add_subcommand("model", "frequency-response CSV per component");
  auto* synth = app.add_subcommand("synth", "synthesize a dynamic multiplier");
  auto* certify = app.add_subcommand("certify", "evaluate the passivity certificate");
  auto* sweep = app.add_subcommand("sweep", "droop-space certificate vs eigenvalue sweep");
  auto* eig = app.add_subcommand("eig", "random-allocation eigenvalue trials");
  auto* homotopy = app.add_subcommand("homotopy", "eigenvalue loci along the affine homotopy");
  for (auto* sub : {model, synth, certify, sweep, eig, homotopy}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (model->parsed()) return cmd_model(opt);
    if (synth->parsed()) return cmd_synth(opt);
    if (certify->parsed()) return cmd_certify(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (eig->parsed()) return cmd_eig(opt);
    return cmd_homotopy(opt);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
