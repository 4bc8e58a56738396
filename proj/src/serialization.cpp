#include "itergp/serialization.hpp"

#include <cmath>

namespace itergp {
namespace {

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

double finite_or_null(double v, Json& slot) {
  if (std::isfinite(v)) {
    slot = v;
  } else {
    slot = nullptr;
  }
  return v;
}

}  // namespace

Json kernel_spec_json(const KernelSpec& spec) {
  return std::visit(
      [](const auto& k) -> Json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, MaternKernel>) {
          return Json{{"kind", "matern"}, {"alpha", k.alpha}};
        } else if constexpr (std::is_same_v<T, SqExpKernel>) {
          return Json{{"kind", "sqexp"}, {"bandwidth", k.bandwidth}};
        } else {
          Json j{{"kind", "series"},
                 {"decay", k.decay == SeriesDecay::Polynomial ? "polynomial"
                                                              : "exponential"},
                 {"tau", k.tau},
                 {"dimension", k.dimension},
                 {"truncation", k.truncation}};
          if (k.decay == SeriesDecay::Polynomial) j["alpha"] = k.alpha;
          return j;
        }
      },
      spec.variant());
}

KernelSpec kernel_spec_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "matern") return KernelSpec::matern(j.at("alpha").get<double>());
  if (kind == "sqexp") return KernelSpec::sqexp(j.at("bandwidth").get<double>());
  if (kind == "series") {
    const std::string decay = j.at("decay").get<std::string>();
    const double tau = j.at("tau").get<double>();
    const int d = j.at("dimension").get<int>();
    const Index trunc = j.at("truncation").get<Index>();
    if (decay == "polynomial")
      return KernelSpec::series_polynomial(j.at("alpha").get<double>(), tau, d,
                                           trunc);
    if (decay == "exponential")
      return KernelSpec::series_exponential(tau, d, trunc);
    throw std::invalid_argument("kernel json: unknown decay " + decay);
  }
  throw std::invalid_argument("kernel json: unknown kind " + kind);
}

Json lanczos_result_json(const LanczosResult& lan, bool include_vectors) {
  Json j{{"values", vector_json(lan.values)},
         {"krylov_dim", lan.krylov_dim},
         {"v0", vector_json(lan.v0)}};
  if (include_vectors) j["vectors"] = matrix_json(lan.vectors);
  return j;
}

Json itergp_state_json(const IterGPState& state, bool include_directions) {
  Json j{{"m", state.m},
         {"etas", vector_json(state.etas)},
         {"w", vector_json(state.w)}};
  switch (state.policy_tag) {
    case PolicyTag::EV:
      j["policy"] = "ev";
      break;
    case PolicyTag::Lanczos:
      j["policy"] = "lanczos";
      break;
    case PolicyTag::CG:
      j["policy"] = "cg";
      break;
    case PolicyTag::Custom:
      j["policy"] = "custom";
      break;
  }
  if (include_directions) j["directions"] = matrix_json(state.D);
  return j;
}

namespace {

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::MaternStudy:
      return "matern";
    case Scenario::SqExpStudy:
      return "sqexp";
    case Scenario::InconsistencyDemo:
      return "inconsistency";
    case Scenario::TimingStudy:
      return "timing";
    case Scenario::Custom:
      return "custom";
  }
  return "custom";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "matern") return Scenario::MaternStudy;
  if (name == "sqexp") return Scenario::SqExpStudy;
  if (name == "inconsistency") return Scenario::InconsistencyDemo;
  if (name == "timing") return Scenario::TimingStudy;
  if (name == "custom") return Scenario::Custom;
  throw std::invalid_argument("config: unknown scenario '" + name + "'");
}

std::string method_kind_name(MethodSpec::Kind k) {
  switch (k) {
    case MethodSpec::Kind::Exact:
      return "exact";
    case MethodSpec::Kind::EVGP:
      return "evgp";
    case MethodSpec::Kind::LGP:
      return "lgp";
    case MethodSpec::Kind::CGGP:
      return "cggp";
  }
  return "exact";
}

MethodSpec method_from_json(const Json& j) {
  MethodSpec ms;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "exact") {
    ms.kind = MethodSpec::Kind::Exact;
    return ms;
  }
  if (kind == "evgp")
    ms.kind = MethodSpec::Kind::EVGP;
  else if (kind == "lgp")
    ms.kind = MethodSpec::Kind::LGP;
  else if (kind == "cggp")
    ms.kind = MethodSpec::Kind::CGGP;
  else
    throw std::invalid_argument("config: unknown method kind '" + kind + "'");
  ms.m = j.at("m").get<Index>();
  if (j.contains("m_tilde")) ms.m_tilde = j.at("m_tilde").get<Index>();
  if (j.contains("v0")) {
    const std::string v0 = j.at("v0").get<std::string>();
    if (v0 == "y")
      ms.v0 = V0Choice::DataY;
    else if (v0 == "z")
      ms.v0 = V0Choice::GaussianZ;
    else
      throw std::invalid_argument("config: v0 must be 'y' or 'z'");
  }
  return ms;
}

}  // namespace

Json experiment_config_json(const ExperimentConfig& cfg) {
  Json methods = Json::array();
  for (const auto& ms : cfg.methods) {
    Json m{{"kind", method_kind_name(ms.kind)}};
    if (ms.kind != MethodSpec::Kind::Exact) m["m"] = ms.m;
    if (ms.kind == MethodSpec::Kind::LGP) {
      m["m_tilde"] = ms.m_tilde;
      m["v0"] = ms.v0 == V0Choice::DataY ? "y" : "z";
    }
    methods.push_back(std::move(m));
  }
  return Json{{"scenario", scenario_name(cfg.scenario)},
              {"n", cfg.n},
              {"methods", methods},
              {"seeds", cfg.seeds},
              {"grid",
               Json{{"count", cfg.grid.count},
                    {"lo", cfg.grid.lo},
                    {"hi", cfg.grid.hi},
                    {"automatic", cfg.grid.automatic}}},
              {"output_dir", cfg.output_dir},
              {"kl_cap", cfg.kl_cap},
              {"threads", cfg.threads},
              {"quick", cfg.quick},
              {"cg_tol", cfg.cg_tol}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig cfg;
  cfg.scenario = scenario_from_name(j.at("scenario").get<std::string>());
  if (j.contains("n")) cfg.n = j.at("n").get<Index>();
  for (const auto& m : j.at("methods")) cfg.methods.push_back(method_from_json(m));
  if (j.contains("seeds"))
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  else
    cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    if (g.contains("count")) cfg.grid.count = g.at("count").get<Index>();
    if (g.contains("lo") && g.contains("hi")) {
      cfg.grid.lo = g.at("lo").get<double>();
      cfg.grid.hi = g.at("hi").get<double>();
      cfg.grid.automatic = false;
    }
    if (g.contains("automatic")) cfg.grid.automatic = g.at("automatic").get<bool>();
  }
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("kl_cap")) cfg.kl_cap = j.at("kl_cap").get<Index>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("quick")) cfg.quick = j.at("quick").get<bool>();
  if (j.contains("cg_tol")) cfg.cg_tol = j.at("cg_tol").get<double>();
  return cfg;
}

Json experiment_report_json(const ExperimentReport& report) {
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json j{{"method", c.method}, {"m", c.m},
           {"seed", c.seed},     {"mse", Json()},
           {"kl", Json()},       {"mean_bandwidth", c.mean_bandwidth},
           {"wall_ms", c.wall_ms}};
    finite_or_null(c.mse, j["mse"]);
    finite_or_null(c.kl, j["kl"]);
    if (!c.error.empty()) j["error"] = c.error;
    cells.push_back(std::move(j));
  }
  Json aggs = Json::array();
  for (const auto& a : report.aggregates) {
    Json j{{"method", a.method},
           {"m", a.m},
           {"mse_mean", Json()},
           {"mse_sd", a.mse_sd},
           {"kl_mean", Json()},
           {"bandwidth_mean", a.bandwidth_mean},
           {"wall_ms_median", a.wall_ms_median},
           {"cells_ok", a.cells_ok}};
    finite_or_null(a.mse_mean, j["mse_mean"]);
    finite_or_null(a.kl_mean, j["kl_mean"]);
    aggs.push_back(std::move(j));
  }
  return Json{{"config", experiment_config_json(report.config)},
              {"n", report.resolved_n},
              {"cells", cells},
              {"aggregates", aggs}};
}

}  // namespace itergp
