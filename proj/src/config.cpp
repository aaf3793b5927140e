#include "psim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace psim {

namespace {

using nlohmann::json;

struct Validator {
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  bool is_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "must be an object");
    return false;
  }

  void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) return;
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (!allowed.count(key)) fail(path, "unknown key '" + key + "'");
    }
  }

  const json* get(const json& j, const std::string& path, const std::string& key, bool required) {
    if (!j.is_object() || !j.contains(key)) {
      if (required) fail(path, "missing required key '" + key + "'");
      return nullptr;
    }
    return &j.at(key);
  }

  std::optional<double> number(const json& j, const std::string& path, const std::string& key,
                               bool required) {
    const json* v = get(j, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(path + "." + key, "must be a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(const json& j, const std::string& path, const std::string& key,
                                      bool required) {
    const json* v = get(j, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      fail(path + "." + key, "must be an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  std::optional<std::string> string(const json& j, const std::string& path, const std::string& key,
                                    bool required) {
    const json* v = get(j, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      fail(path + "." + key, "must be a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }
};

void validate_model(Validator& v, const json& block, ExperimentConfig& cfg) {
  if (!v.is_object(block, "model")) return;
  v.reject_unknown(block, "model", {"name", "params"});
  auto name = v.string(block, "model", "name", true);
  if (!name) return;
  cfg.model_name = *name;
  const json params = block.contains("params") ? block.at("params") : json::object();
  if (!params.is_object()) {
    v.fail("model.params", "must be an object");
    return;
  }
  cfg.model_params = params;
  const std::string p = "model.params";

  auto nonneg = [&](const char* key) {
    auto x = v.number(params, p, key, true);
    if (x && !(*x >= 0)) v.fail(p + "." + key, "must be >= 0");
  };

  if (*name == "otc") {
    v.reject_unknown(params, p, {"lambda_u", "lambda_d", "beta", "rho"});
    nonneg("lambda_u");
    nonneg("lambda_d");
    nonneg("beta");
    nonneg("rho");
  } else if (*name == "info_percolation") {
    v.reject_unknown(params, p, {"lambda", "truncation_bound"});
    auto l = v.number(params, p, "lambda", true);
    if (l && !(*l > 0)) v.fail(p + ".lambda", "must be > 0");
    auto b = v.number(params, p, "truncation_bound", false);
    if (b && !(*b > 0)) v.fail(p + ".truncation_bound", "must be > 0");
  } else if (*name == "opinion") {
    v.reject_unknown(params, p, {"alpha", "beta", "m", "P", "Q"});
    nonneg("alpha");
    nonneg("beta");
    auto m = v.integer(params, p, "m", true);
    if (m && *m < 0) v.fail(p + ".m", "must be >= 0");
    for (const char* key : {"P", "Q"})
      if (!params.contains(key) || !params.at(key).is_array())
        v.fail(p + "." + key, "must be a square array of rows");
  } else if (*name == "fleming_viot") {
    v.reject_unknown(params, p, {"Q", "max_exit_rate"});
    if (!params.contains("Q") || !params.at("Q").is_array())
      v.fail(p + ".Q", "must be a square array of rows (state 0 absorbing)");
    auto c = v.number(params, p, "max_exit_rate", false);
    if (c && !(*c > 0)) v.fail(p + ".max_exit_rate", "must be > 0");
  } else if (*name == "two_state") {
    v.reject_unknown(params, p, {"rate_up", "rate_down"});
    nonneg("rate_up");
    nonneg("rate_down");
  } else if (*name == "custom") {
    v.reject_unknown(params, p, {"labels", "gamma_kernel", "lambda_kernel", "gamma_bar", "lambda_bar"});
    if (!params.contains("labels") || !params.at("labels").is_array() || params.at("labels").empty())
      v.fail(p + ".labels", "must be a nonempty array of label strings");
    if (!params.contains("gamma_kernel") || !params.at("gamma_kernel").is_array())
      v.fail(p + ".gamma_kernel", "must be a [w][z][w'] array");
  } else {
    v.fail("model.name", "unknown model '" + *name +
                              "' (expected otc, info_percolation, opinion, fleming_viot, two_state, custom)");
  }
}

void validate_initial(Validator& v, const json& block, ExperimentConfig& cfg) {
  if (!v.is_object(block, "initial")) return;
  v.reject_unknown(block, "initial", {"kind", "distribution", "mean", "sd", "types"});
  auto kind = v.string(block, "initial", "kind", true);
  if (!kind) return;
  cfg.initial_kind = *kind;
  if (*kind == "product") {
    const json* dist = v.get(block, "initial", "distribution", true);
    if (dist) {
      if (!dist->is_object()) {
        v.fail("initial.distribution", "must map labels to probabilities");
      } else {
        double total = 0;
        for (const auto& [label, prob] : dist->items()) {
          if (!prob.is_number() || prob.get<double>() < 0) {
            v.fail("initial.distribution." + label, "must be a number >= 0");
            continue;
          }
          cfg.initial_distribution.emplace_back(label, prob.get<double>());
          total += prob.get<double>();
        }
        if (std::abs(total - 1.0) > 1e-9)
          v.fail("initial.distribution", "probabilities must sum to 1");
      }
    }
  } else if (*kind == "product_gaussian") {
    auto mean = v.number(block, "initial", "mean", true);
    auto sd = v.number(block, "initial", "sd", true);
    if (mean) cfg.initial_mean = *mean;
    if (sd) {
      if (!(*sd > 0))
        v.fail("initial.sd", "must be > 0");
      else
        cfg.initial_sd = *sd;
    }
  } else if (*kind == "explicit") {
    const json* types = v.get(block, "initial", "types", true);
    if (types) {
      if (!types->is_array() || types->empty()) {
        v.fail("initial.types", "must be a nonempty array of labels");
      } else {
        for (const auto& t : *types) {
          if (!t.is_string())
            v.fail("initial.types", "entries must be label strings");
          else
            cfg.initial_types.push_back(t.get<std::string>());
        }
      }
    }
  } else {
    v.fail("initial.kind", "must be one of product, product_gaussian, explicit");
  }
}

void validate_run(Validator& v, const json& block, ExperimentConfig& cfg) {
  if (!v.is_object(block, "run")) return;
  v.reject_unknown(block, "run",
                   {"T", "N", "N_list", "replicas", "seed", "dt_limit", "sample_points", "grid"});
  auto T = v.number(block, "run", "T", true);
  if (T) {
    if (!(*T >= 0))
      v.fail("run.T", "must be >= 0");
    else
      cfg.T = *T;
  }
  const bool has_n = block.contains("N");
  const bool has_list = block.contains("N_list");
  if (has_n == has_list) {
    v.fail("run", "exactly one of N and N_list is required");
  } else if (has_n) {
    auto n = v.integer(block, "run", "N", true);
    if (n) {
      if (*n < 1)
        v.fail("run.N", "must be >= 1");
      else
        cfg.n_list = {*n};
    }
  } else {
    const json& list = block.at("N_list");
    if (!list.is_array() || list.empty()) {
      v.fail("run.N_list", "must be a nonempty array of integers");
    } else {
      for (const auto& n : list) {
        if (!n.is_number_integer() || n.get<std::int64_t>() < 1) {
          v.fail("run.N_list", "entries must be integers >= 1");
          break;
        }
        cfg.n_list.push_back(n.get<std::int64_t>());
      }
      for (std::size_t i = 0; i + 1 < cfg.n_list.size(); ++i)
        if (cfg.n_list[i] >= cfg.n_list[i + 1]) {
          v.fail("run.N_list", "must be strictly increasing");
          break;
        }
    }
  }
  auto reps = v.integer(block, "run", "replicas", false);
  if (reps) {
    if (*reps < 1)
      v.fail("run.replicas", "must be >= 1");
    else
      cfg.replicas = static_cast<int>(*reps);
  }
  if (block.contains("seed")) {
    const json& s = block.at("seed");
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
      v.fail("run.seed", "must be a nonnegative integer");
    else
      cfg.seed = s.get<std::uint64_t>();
  }
  auto dt = v.number(block, "run", "dt_limit", false);
  if (dt) {
    if (!(*dt > 0))
      v.fail("run.dt_limit", "must be > 0");
    else
      cfg.dt_limit = *dt;
  }
  auto sp = v.integer(block, "run", "sample_points", false);
  if (sp) {
    if (*sp < 2)
      v.fail("run.sample_points", "must be >= 2");
    else
      cfg.sample_points = static_cast<int>(*sp);
  }
  if (block.contains("grid")) {
    const json& g = block.at("grid");
    if (!g.is_object()) {
      v.fail("run.grid", "must be an object");
      return;
    }
    v.reject_unknown(g, "run.grid", {"lo", "hi", "n", "dt", "leakage_bound", "use_fft"});
    cfg.has_grid = true;
    auto lo = v.number(g, "run.grid", "lo", true);
    auto hi = v.number(g, "run.grid", "hi", true);
    auto n = v.integer(g, "run.grid", "n", true);
    auto gdt = v.number(g, "run.grid", "dt", true);
    if (lo) cfg.grid_lo = *lo;
    if (hi) cfg.grid_hi = *hi;
    if (lo && hi && !(*lo < *hi)) v.fail("run.grid", "needs lo < hi");
    if (n) {
      if (*n < 8)
        v.fail("run.grid.n", "must be >= 8");
      else
        cfg.grid_n = static_cast<int>(*n);
    }
    if (gdt) {
      if (!(*gdt > 0))
        v.fail("run.grid.dt", "must be > 0");
      else
        cfg.grid_dt = *gdt;
    }
    auto lb = v.number(g, "run.grid", "leakage_bound", false);
    if (lb) {
      if (!(*lb > 0))
        v.fail("run.grid.leakage_bound", "must be > 0");
      else
        cfg.leakage_bound = *lb;
    }
    if (g.contains("use_fft")) {
      if (!g.at("use_fft").is_boolean())
        v.fail("run.grid.use_fft", "must be a boolean");
      else
        cfg.grid_fft = g.at("use_fft").get<bool>();
    }
  }
}

void validate_analysis(Validator& v, const json& block, ExperimentConfig& cfg) {
  if (!v.is_object(block, "analysis")) return;
  v.reject_unknown(block, "analysis", {"metric", "test_functions", "tolerances"});
  auto metric = v.string(block, "analysis", "metric", false);
  if (metric) {
    if (*metric != "tv" && *metric != "ks")
      v.fail("analysis.metric", "must be 'tv' or 'ks'");
    else
      cfg.metric = *metric;
  }
  if (block.contains("test_functions")) {
    const json& tf = block.at("test_functions");
    if (!tf.is_array())
      v.fail("analysis.test_functions", "must be an array");
    else {
      for (std::size_t i = 0; i < tf.size(); ++i) {
        const std::string path = "analysis.test_functions[" + std::to_string(i) + "]";
        const json& f = tf.at(i);
        if (!f.is_object() || !f.contains("kind") || !f.at("kind").is_string()) {
          v.fail(path, "must be an object with a 'kind'");
          continue;
        }
        const std::string kind = f.at("kind").get<std::string>();
        if (kind == "constant")
          v.reject_unknown(f, path, {"kind", "value"});
        else if (kind == "indicator")
          v.reject_unknown(f, path, {"kind", "labels"});
        else if (kind == "interval")
          v.reject_unknown(f, path, {"kind", "lo", "hi"});
        else if (kind == "monomial")
          v.reject_unknown(f, path, {"kind", "power", "center"});
        else if (kind == "cosine" || kind == "tanh")
          v.reject_unknown(f, path, {"kind", "a", "b"});
        else
          v.fail(path + ".kind",
                 "must be one of constant, indicator, interval, monomial, cosine, tanh");
      }
      cfg.test_functions = tf;
    }
  }
  if (block.contains("tolerances")) {
    const json& tol = block.at("tolerances");
    if (!tol.is_object())
      v.fail("analysis.tolerances", "must be an object");
    else {
      v.reject_unknown(tol, "analysis.tolerances",
                       {"slope_lo", "slope_hi", "rel_frobenius", "normality_z", "p_threshold"});
      for (const auto& [key, value] : tol.items())
        if (!value.is_number()) v.fail("analysis.tolerances." + key, "must be a number");
      cfg.tolerances = tol;
    }
  }
}

void validate_output(Validator& v, const json& block, ExperimentConfig& cfg) {
  if (!v.is_object(block, "output")) return;
  v.reject_unknown(block, "output", {"directory", "formats"});
  auto dir = v.string(block, "output", "directory", false);
  if (dir) cfg.out_dir = *dir;
  if (block.contains("formats")) {
    const json& f = block.at("formats");
    if (!f.is_array())
      v.fail("output.formats", "must be an array");
    else {
      cfg.formats.clear();
      for (const auto& fmt : f) {
        if (!fmt.is_string() || (fmt.get<std::string>() != "csv" && fmt.get<std::string>() != "json"))
          v.fail("output.formats", "entries must be 'csv' or 'json'");
        else
          cfg.formats.push_back(fmt.get<std::string>());
      }
    }
  }
}

}  // namespace

ExperimentConfig parse_config_json(const nlohmann::json& doc) {
  Validator v;
  ExperimentConfig cfg;
  cfg.raw = doc;
  if (!doc.is_object()) {
    v.fail("$", "top level must be an object");
    throw ConfigListError(std::move(v.errors));
  }
  v.reject_unknown(doc, "$", {"version", "model", "initial", "run", "analysis", "output"});
  auto version = v.integer(doc, "$", "version", true);
  if (version) {
    if (*version != 1)
      v.fail("version", "unsupported schema version (expected 1)");
    else
      cfg.version = 1;
  }
  if (doc.contains("model"))
    validate_model(v, doc.at("model"), cfg);
  else
    v.fail("$", "model required");
  if (doc.contains("initial"))
    validate_initial(v, doc.at("initial"), cfg);
  else
    v.fail("$", "initial required");
  if (doc.contains("run"))
    validate_run(v, doc.at("run"), cfg);
  else
    v.fail("$", "run required");
  if (doc.contains("analysis")) validate_analysis(v, doc.at("analysis"), cfg);
  if (doc.contains("output")) validate_output(v, doc.at("output"), cfg);

  if (!v.errors.empty()) throw ConfigListError(std::move(v.errors));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigListError({path + ": cannot open file"});
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigListError({path + ": " + e.what()});
  }
  return parse_config_json(doc);
}

namespace {

std::vector<std::vector<double>> matrix_param(const nlohmann::json& rows) {
  std::vector<std::vector<double>> out;
  for (const auto& row : rows) {
    if (!row.is_array()) throw ConfigError("model.params: matrix rows must be arrays");
    std::vector<double> r;
    for (const auto& x : row) {
      if (!x.is_number()) throw ConfigError("model.params: matrix entries must be numbers");
      r.push_back(x.get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

BuiltModel build_model(const ExperimentConfig& cfg) {
  BuiltModel out;
  const nlohmann::json& p = cfg.model_params;
  if (cfg.model_name == "otc") {
    out.finite = otc_model(p.at("lambda_u").get<double>(), p.at("lambda_d").get<double>(),
                           p.at("beta").get<double>(), p.at("rho").get<double>());
  } else if (cfg.model_name == "info_percolation") {
    const double bound = p.contains("truncation_bound") ? p.at("truncation_bound").get<double>() : 64.0;
    out.percolation = info_percolation_model(p.at("lambda").get<double>(), bound);
  } else if (cfg.model_name == "opinion") {
    out.finite = opinion_model(p.at("alpha").get<double>(), p.at("beta").get<double>(),
                               matrix_param(p.at("P")), matrix_param(p.at("Q")),
                               static_cast<int>(p.at("m").get<std::int64_t>()));
  } else if (cfg.model_name == "fleming_viot") {
    const double cap = p.contains("max_exit_rate") ? p.at("max_exit_rate").get<double>() : 1e6;
    out.finite = fleming_viot_model(matrix_param(p.at("Q")), cap);
  } else if (cfg.model_name == "two_state") {
    out.finite = two_state_model(p.at("rate_up").get<double>(), p.at("rate_down").get<double>());
  } else if (cfg.model_name == "custom") {
    std::vector<std::string> labels;
    for (const auto& l : p.at("labels")) {
      if (!l.is_string()) throw ConfigError("model.params.labels: entries must be strings");
      labels.push_back(l.get<std::string>());
    }
    const int k = static_cast<int>(labels.size());
    const bool with_lambda = p.contains("lambda_kernel") && !p.at("lambda_kernel").is_null();
    FiniteKernels ker = FiniteKernels::zero(k, with_lambda);
    const nlohmann::json& gk = p.at("gamma_kernel");
    if (static_cast<int>(gk.size()) != k) throw ConfigError("model.params.gamma_kernel: outer size must be k");
    for (int w = 0; w < k; ++w)
      for (int z = 0; z < k; ++z)
        for (int wp = 0; wp < k; ++wp) {
          const auto& row = gk.at(static_cast<std::size_t>(w));
          if (static_cast<int>(row.size()) != k) throw ConfigError("model.params.gamma_kernel: must be k x k x k");
          const auto& col = row.at(static_cast<std::size_t>(z));
          if (static_cast<int>(col.size()) != k) throw ConfigError("model.params.gamma_kernel: must be k x k x k");
          ker.gamma_entry(w, z, wp) = col.at(static_cast<std::size_t>(wp)).get<double>();
        }
    if (with_lambda) {
      const nlohmann::json& lk = p.at("lambda_kernel");
      for (int w1 = 0; w1 < k; ++w1)
        for (int w2 = 0; w2 < k; ++w2)
          for (int z = 0; z < k; ++z)
            for (int w1p = 0; w1p < k; ++w1p)
              for (int w2p = 0; w2p < k; ++w2p)
                ker.lambda_entry(w1, w2, z, w1p, w2p) =
                    lk.at(static_cast<std::size_t>(w1))
                        .at(static_cast<std::size_t>(w2))
                        .at(static_cast<std::size_t>(z))
                        .at(static_cast<std::size_t>(w1p))
                        .at(static_cast<std::size_t>(w2p))
                        .get<double>();
    }
    const double gbar = p.contains("gamma_bar") ? p.at("gamma_bar").get<double>() : -1;
    const double lbar = p.contains("lambda_bar") ? p.at("lambda_bar").get<double>() : -1;
    out.finite = custom_model(TypeSpace::finite(labels), std::move(ker), gbar, lbar);
  } else {
    throw ConfigError("unknown model '" + cfg.model_name + "'");
  }
  return out;
}

Eigen::VectorXd initial_distribution_vector(const ExperimentConfig& cfg, const TypeSpace& space) {
  if (cfg.initial_kind != "product")
    throw ConfigError("initial: finite-space runs need kind 'product' (or 'explicit')");
  Eigen::VectorXd nu0 = Eigen::VectorXd::Zero(space.size());
  for (const auto& [label, prob] : cfg.initial_distribution)
    nu0[space.label_index(label)] += prob;
  if (std::abs(nu0.sum() - 1.0) > 1e-9)
    throw ConfigError("initial.distribution: probabilities must sum to 1");
  return nu0;
}

std::vector<int> initial_explicit_labels(const ExperimentConfig& cfg, const TypeSpace& space) {
  std::vector<int> out;
  out.reserve(cfg.initial_types.size());
  for (const auto& name : cfg.initial_types) out.push_back(space.label_index(name));
  return out;
}

TestFamily build_test_family(const ExperimentConfig& cfg, const TypeSpace& space) {
  TestFamily family;
  if (!cfg.test_functions.is_array()) return family;
  for (const auto& f : cfg.test_functions) {
    const std::string kind = f.at("kind").get<std::string>();
    if (kind == "constant") {
      family.push_back(TestFunction::constant(f.value("value", 1.0)));
    } else if (kind == "indicator") {
      std::vector<std::string> labels;
      for (const auto& l : f.at("labels")) labels.push_back(l.get<std::string>());
      family.push_back(TestFunction::indicator_labels(space, labels));
    } else if (kind == "interval") {
      family.push_back(TestFunction::indicator_interval(f.at("lo").get<double>(), f.at("hi").get<double>()));
    } else if (kind == "monomial") {
      family.push_back(TestFunction::monomial(static_cast<int>(f.at("power").get<std::int64_t>()),
                                              f.value("center", 0.0)));
    } else if (kind == "cosine") {
      family.push_back(TestFunction::cosine(f.at("a").get<double>(), f.at("b").get<double>()));
    } else if (kind == "tanh") {
      family.push_back(TestFunction::tanh_wave(f.at("a").get<double>(), f.at("b").get<double>()));
    }
  }
  for (const auto& phi : family)
    if (!phi.evaluable_on(space))
      throw ConfigError("analysis.test_functions: a declared function is not evaluable on the model space");
  return family;
}

DensityGrid build_density_grid(const ExperimentConfig& cfg) {
  if (!cfg.has_grid) throw ConfigError("run.grid required for the percolation limit solver");
  if (cfg.initial_kind != "product_gaussian")
    throw ConfigError("initial: percolation runs need kind 'product_gaussian'");
  return DensityGrid::gaussian(cfg.grid_lo, cfg.grid_hi, cfg.grid_n, cfg.initial_mean, cfg.initial_sd);
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string canonical = cfg.raw.dump();
  return fnv1a64(canonical.data(), canonical.size());
}

}  // namespace psim
