#include "pnpcert/json_io.hpp"

namespace pnpcert {

using nlohmann::json;

json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.at(0).size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          j.at(i).at(k).get<double>();
  return m;
}

json to_json(const StateSpaceModel& sys) {
  return json{{"A", to_json(sys.A())},
              {"B", to_json(sys.B())},
              {"C", to_json(sys.C())},
              {"D", to_json(sys.D())}};
}

StateSpaceModel model_from_json(const json& j) {
  try {
    return StateSpaceModel(mat_from_json(j.at("A")), mat_from_json(j.at("B")),
                           mat_from_json(j.at("C")), mat_from_json(j.at("D")));
  } catch (const json::exception& e) {
    throw ParseError(std::string("state-space JSON: ") + e.what());
  }
}

json to_json(const MultiplierFilter& m) {
  if (m.kind() == MultiplierFilter::Kind::piecewise)
    return json{{"kind", "piecewise"}, {"omega_f", m.omega_f()}};
  json j = to_json(m.model());
  j["kind"] = "rational";
  return j;
}

MultiplierFilter multiplier_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "piecewise")
      return MultiplierFilter::piecewise(j.at("omega_f").get<double>());
    if (kind == "rational") return MultiplierFilter::rational(model_from_json(j));
    throw ParseError("multiplier JSON: unknown kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("multiplier JSON: ") + e.what());
  }
}

json to_json(const ComponentReport& r) {
  return json{{"id", r.id},
              {"min_eig", r.min_eig},
              {"argmin_omega", r.argmin_omega},
              {"pass", r.pass},
              {"eps", r.eps},
              {"grid_size", r.grid_size},
              {"inf_limit_eig", r.inf_limit_eig}};
}

json to_json(const Certificate& c) {
  json comps = json::array();
  for (const auto& r : c.components) comps.push_back(to_json(r));
  return json{{"components", std::move(comps)},
              {"aggregate_pass", c.aggregate_pass},
              {"multiplier_fingerprint", c.multiplier_fingerprint},
              {"eps", c.eps}};
}

json to_json(const SynthesisResult& r) {
  return json{{"order", r.best.order},
              {"theta", std::vector<double>(r.best.theta.data(),
                                            r.best.theta.data() + r.best.theta.size())},
              {"multiplier", to_json(r.best.to_model())},
              {"grid_objective", r.grid_objective},
              {"verified_objective", r.verified_objective},
              {"component_norms", r.component_norms},
              {"start_objectives", r.start_objectives},
              {"best_start", r.best_start},
              {"success", r.success},
              {"trace", r.trace}};
}

GfmParams gfm_params_from_json(const json& j, double omega0) {
  GfmParams g;
  g.omega0 = j.value("omega0", omega0);
  g.m_p = j.value("m_p", g.m_p);
  g.n_q = j.value("n_q", g.n_q);
  g.omega_c = j.value("omega_c", g.omega_c);
  g.K_pv = j.value("K_pv", g.K_pv);
  g.K_iv = j.value("K_iv", g.K_iv);
  g.K_ic = j.value("K_ic", g.K_ic);
  g.C_f = j.value("C_f", g.C_f);
  g.L_f = j.value("L_f", g.L_f);
  g.R_f = j.value("R_f", g.R_f);
  g.R_c = j.value("R_c", g.R_c);
  g.X_c = j.value("X_c", g.X_c);
  g.V0 = j.value("V0", g.V0);
  g.P0 = j.value("P0", g.P0);
  g.Q0 = j.value("Q0", g.Q0);
  g.S_rated = j.value("s_rated_mva", g.S_rated);
  return g;
}

std::vector<std::pair<std::string, StateSpaceModel>> components_from_json(
    const json& j, double omega0) {
  std::vector<std::pair<std::string, StateSpaceModel>> out;
  try {
    for (const auto& c : j) {
      const std::string id = c.at("id").get<std::string>();
      const std::string type = c.at("type").get<std::string>();
      if (type == "line") {
        const LineParams p =
            LineParams::from_rx(c.at("r").get<double>(), c.at("x").get<double>(),
                                c.value("omega0", omega0));
        out.emplace_back(id, line_admittance(p));
      } else if (type == "gfm") {
        out.emplace_back(id, gfm_admittance(gfm_params_from_json(c, omega0)));
      } else if (type == "state_space") {
        out.emplace_back(id, model_from_json(c));
      } else {
        throw ParseError("component JSON: unknown type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("component JSON: ") + e.what());
  }
  return out;
}

}  // namespace pnpcert
