#include "psim/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "psim/diagnostics.hpp"
#include "psim/engine.hpp"
#include "psim/fluctuation.hpp"
#include "psim/parallel.hpp"

namespace psim {

namespace {

using nlohmann::json;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    const std::string path = dir_ + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
    out.close();
    files_.push_back({name, content.size(), fnv1a64(content.data(), content.size())});
  }

  struct Record {
    std::string name;
    std::size_t bytes;
    std::uint64_t hash;
  };
  const std::vector<Record>& files() const { return files_; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.name);
    return out;
  }

 private:
  std::string dir_;
  std::vector<Record> files_;
};

struct PhaseTimer {
  std::vector<std::pair<std::string, double>> timings;
  std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    timings.emplace_back(phase, std::chrono::duration<double, std::milli>(now - mark).count());
    mark = now;
  }
};

json provenance_block(const ExperimentConfig& cfg) {
  json p;
  p["model"] = {{"name", cfg.model_name}, {"params", cfg.model_params}};
  p["seed"] = cfg.seed;
  p["T"] = cfg.T;
  p["dt_limit"] = cfg.dt_limit;
  p["N_list"] = cfg.n_list;
  p["replicas"] = cfg.replicas;
  p["sample_points"] = cfg.sample_points;
  p["metric"] = cfg.metric;
  if (cfg.has_grid)
    p["grid"] = {{"lo", cfg.grid_lo}, {"hi", cfg.grid_hi},       {"n", cfg.grid_n},
                 {"dt", cfg.grid_dt}, {"leakage_bound", cfg.leakage_bound}, {"use_fft", cfg.grid_fft}};
  p["rng"] = "philox4x32-10; stream_id = replica * 8 + purpose";
  return p;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(ArtifactWriter& writer, const ExperimentConfig& cfg, PhaseTimer& timer,
                    const std::string& subcommand) {
  json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["subcommand"] = subcommand;
  manifest["config_hash_fnv1a64"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["seed_scheme"] = "philox4x32-10 keyed by seed; stream_id = replica * 8 + purpose "
                            "(0 initial condition, 1 events, 2 sde, 3 oracle)";
  json streams = json::array();
  for (int r = 0; r < cfg.replicas; ++r)
    streams.push_back({{"replica", r},
                       {"init_stream", r * 8 + 0},
                       {"event_stream", r * 8 + 1}});
  manifest["replica_streams"] = std::move(streams);
  json files = json::array();
  for (const auto& f : writer.files())
    files.push_back({{"path", f.name}, {"bytes", f.bytes}, {"fnv1a64", f.hash}});
  manifest["outputs"] = std::move(files);
  json timings = json::array();
  for (const auto& [phase, ms] : timer.timings) timings.push_back({{"phase", phase}, {"ms", ms}});
  manifest["timings_ms"] = std::move(timings);
  writer.write("manifest.json", manifest.dump(2) + "\n");
}

std::vector<double> sample_times(const ExperimentConfig& cfg) {
  std::vector<double> times(static_cast<std::size_t>(cfg.sample_points));
  for (int i = 0; i < cfg.sample_points; ++i)
    times[static_cast<std::size_t>(i)] =
        cfg.T * static_cast<double>(i) / static_cast<double>(cfg.sample_points - 1);
  return times;
}

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::TypeChange:
      return "type_change";
    case EventKind::PairInteraction:
      return "pair_interaction";
    case EventKind::Marketmaker:
      return "marketmaker";
  }
  return "?";
}

std::string trajectory_csv(const Trajectory<int>& traj, const TypeSpace& space) {
  std::string out =
      "# exact jump-process path; one row per accepted event; time in model units\n"
      "event_index,time,event_kind,agent_i,agent_j,type_before_i,type_after_i,type_before_j,type_after_j\n";
  std::size_t idx = 0;
  for (const auto& e : traj.events) {
    out += std::to_string(idx++) + "," + fmt(e.time) + "," + kind_name(e.kind) + "," +
           std::to_string(e.i) + "," + std::to_string(e.j) + "," + space.label(e.before_i) + "," +
           space.label(e.after_i) + ",";
    out += (e.j >= 0 ? space.label(e.before_j) : std::string("-")) + ",";
    out += (e.j >= 0 ? space.label(e.after_j) : std::string("-")) + "\n";
  }
  return out;
}

std::string trajectory_csv(const Trajectory<double>& traj) {
  std::string out =
      "# exact jump-process path; one row per accepted event; time in model units\n"
      "event_index,time,event_kind,agent_i,agent_j,type_before_i,type_after_i,type_before_j,type_after_j\n";
  std::size_t idx = 0;
  for (const auto& e : traj.events) {
    out += std::to_string(idx++) + "," + fmt(e.time) + "," + kind_name(e.kind) + "," +
           std::to_string(e.i) + "," + std::to_string(e.j) + "," + fmt(e.before_i) + "," +
           fmt(e.after_i) + "," + fmt(e.before_j) + "," + fmt(e.after_j) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

RunResult do_run_finite(const ExperimentConfig& cfg, const FiniteModel& model, ArtifactWriter& writer,
                        PhaseTimer& timer) {
  RunResult result;
  const auto times = sample_times(cfg);

  Eigen::VectorXd nu0;
  std::vector<int> explicit_init;
  if (cfg.initial_kind == "explicit") {
    explicit_init = initial_explicit_labels(cfg, model.space);
    nu0 = Eigen::VectorXd::Zero(model.space.size());
    for (int t : explicit_init) nu0[t] += 1.0 / static_cast<double>(explicit_init.size());
  } else {
    nu0 = initial_distribution_vector(cfg, model.space);
  }

  const LimitTrajectory limit = solve_limit_finite(model, nu0, cfg.T, cfg.dt_limit);
  timer.lap("limit_solve");

  std::string limit_csv =
      "# deterministic limit nu_t of the empirical measure (per-atom ODE system: outflow through "
      "gamma and both lambda orderings, inflow through a and both b marginals); columns: time "
      "(model units), label, probability mass\n"
      "time,label,mass\n";
  for (double t : times) {
    const Eigen::VectorXd u = limit.at(t);
    for (int i = 0; i < model.space.size(); ++i)
      limit_csv += fmt(t) + "," + model.space.label(i) + "," + fmt(u[i]) + "\n";
  }
  writer.write("limit.csv", limit_csv);

  for (std::int64_t N : cfg.n_list) {
    for (int rep = 0; rep < cfg.replicas; ++rep) {
      std::vector<int> init;
      if (cfg.initial_kind == "explicit") {
        if (static_cast<std::int64_t>(explicit_init.size()) != N)
          throw ConfigError("initial.types: explicit configuration must have exactly N entries");
        init = explicit_init;
      } else {
        RngStream init_rng = make_stream(cfg.seed, static_cast<std::uint64_t>(rep), RngPurpose::initial_condition);
        init = sample_product_labels(nu0, static_cast<int>(N), init_rng);
      }
      RngStream ev_rng = make_stream(cfg.seed, static_cast<std::uint64_t>(rep), RngPurpose::events);
      const auto traj = run_trajectory(model, init, cfg.T, ev_rng);

      const std::string tag = "N" + std::to_string(N) + "_rep" + std::to_string(rep);
      writer.write("trajectory_" + tag + ".csv", trajectory_csv(traj, model.space));

      std::string snap =
          "# empirical measure nu_N(t) = (1/N) sum_i delta_{type_i} at sample times; mass = "
          "count/N\n"
          "time,label,mass\n";
      const auto counts = counts_at_times(traj, times);
      for (std::size_t ti = 0; ti < times.size(); ++ti)
        for (int i = 0; i < model.space.size(); ++i)
          snap += fmt(times[ti]) + "," + model.space.label(i) + "," +
                  fmt(static_cast<double>(counts[ti][static_cast<std::size_t>(i)]) /
                      static_cast<double>(N)) +
                  "\n";
      writer.write("snapshots_" + tag + ".csv", snap);
    }
  }
  timer.lap("simulate");

  result.report["subcommand"] = "run";
  result.report["provenance"] = provenance_block(cfg);
  result.report["limit_nodes"] = limit.times.size();
  return result;
}

RunResult do_run_percolation(const ExperimentConfig& cfg, const PercolationModel& model,
                             ArtifactWriter& writer, PhaseTimer& timer) {
  RunResult result;
  const auto times = sample_times(cfg);
  const DensityGrid g0 = build_density_grid(cfg);
  const DensitySolution sol =
      solve_percolation_density(g0, model.meeting_rate, cfg.T, cfg.grid_dt, cfg.leakage_bound, cfg.grid_fft);
  timer.lap("limit_solve");

  std::string density_csv =
      "# limit density g_t (mass per unit length) solving dg/dt = -2 lambda g + 2 lambda (g*g); "
      "columns: time (model units), x, density\n"
      "time,x,density\n";
  for (double t : times) {
    const Eigen::VectorXd g = sol.at(t);
    for (int i = 0; i < g0.n; ++i)
      density_csv += fmt(t) + "," + fmt(g0.node(i)) + "," + fmt(g[i]) + "\n";
  }
  writer.write("limit_density.csv", density_csv);

  for (std::int64_t N : cfg.n_list) {
    for (int rep = 0; rep < cfg.replicas; ++rep) {
      RngStream init_rng = make_stream(cfg.seed, static_cast<std::uint64_t>(rep), RngPurpose::initial_condition);
      RngStream ev_rng = make_stream(cfg.seed, static_cast<std::uint64_t>(rep), RngPurpose::events);
      const auto init = sample_product_gaussian(cfg.initial_mean, cfg.initial_sd, static_cast<int>(N), init_rng);
      const auto traj = run_trajectory(model, init, cfg.T, ev_rng);
      const std::string tag = "N" + std::to_string(N) + "_rep" + std::to_string(rep);
      writer.write("trajectory_" + tag + ".csv", trajectory_csv(traj));
    }
  }
  timer.lap("simulate");

  result.report["subcommand"] = "run";
  result.report["provenance"] = provenance_block(cfg);
  result.report["mass_leakage"] = sol.mass_leakage;
  return result;
}

RunResult do_lln(const ExperimentConfig& cfg, const BuiltModel& model, ArtifactWriter& writer,
                 PhaseTimer& timer) {
  RunResult result;
  LlnReport report;
  if (model.finite) {
    if (cfg.metric != "tv") throw ConfigError("analysis.metric: finite spaces use 'tv'");
    const Eigen::VectorXd nu0 = initial_distribution_vector(cfg, model.finite->space);
    report = lln_convergence_report(*model.finite, nu0, cfg.n_list, cfg.replicas, cfg.T,
                                    cfg.dt_limit, cfg.sample_points, cfg.seed, default_workers());
  } else {
    if (cfg.metric != "ks") throw ConfigError("analysis.metric: the real line uses 'ks'");
    const DensityGrid g0 = build_density_grid(cfg);
    report = lln_convergence_report(*model.percolation, g0, cfg.n_list, cfg.replicas, cfg.T,
                                    cfg.grid_dt, cfg.sample_points, cfg.seed, default_workers());
  }
  timer.lap("simulate");

  std::string errors_csv =
      "# per-replica sup over sample times of distance(nu_N_t, nu_t); metric named in "
      "report.json\n"
      "N,replica,sup_error\n";
  for (std::size_t ni = 0; ni < report.n_values.size(); ++ni)
    for (std::size_t r = 0; r < report.per_replica[ni].size(); ++r)
      errors_csv += std::to_string(report.n_values[ni]) + "," + std::to_string(r) + "," +
                    fmt(report.per_replica[ni][r]) + "\n";
  writer.write("lln_errors.csv", errors_csv);

  json rep;
  rep["subcommand"] = "lln";
  rep["provenance"] = provenance_block(cfg);
  rep["metric"] = report.metric;
  rep["N"] = report.n_values;
  rep["mean_sup_error"] = report.mean_errors;
  rep["standard_error"] = report.std_errors;
  rep["slope"] = {{"value", report.slope.slope},
                  {"stderr", report.slope.slope_se},
                  {"ci95", {report.slope.ci_lo, report.slope.ci_hi}},
                  {"degenerate", report.slope.degenerate}};

  bool pass = true;
  if (cfg.tolerances.contains("slope_lo") && cfg.tolerances.contains("slope_hi")) {
    const double lo = cfg.tolerances.at("slope_lo").get<double>();
    const double hi = cfg.tolerances.at("slope_hi").get<double>();
    pass = !report.slope.degenerate && report.slope.slope >= lo && report.slope.slope <= hi;
    rep["verdict"] = {{"slope_band", {lo, hi}}, {"pass", pass}};
  }
  result.report = rep;
  result.exit_code = pass ? 0 : 2;
  return result;
}

RunResult do_clt(const ExperimentConfig& cfg, const BuiltModel& model, ArtifactWriter& writer,
                 PhaseTimer& timer) {
  if (!model.finite) throw ConfigError("clt: quantitative covariance checks need a finite space");
  if (cfg.n_list.size() != 1) throw ConfigError("clt: run.N must be a single value");
  const double tolerance =
      cfg.tolerances.contains("rel_frobenius") ? cfg.tolerances.at("rel_frobenius").get<double>() : 0.15;

  const Eigen::VectorXd nu0 = initial_distribution_vector(cfg, model.finite->space);
  const CltReport report = clt_covariance_check(*model.finite, nu0, cfg.n_list[0], cfg.replicas,
                                                cfg.T, cfg.dt_limit, tolerance, cfg.seed,
                                                default_workers());
  timer.lap("simulate");

  std::string fl_csv =
      "# fluctuation samples sigma_N(T)(phi) = sqrt(N) (<nu_N_T,phi> - <nu_T,phi>); phi = atom "
      "indicators in label order\n"
      "replica,time,phi_index,value\n";
  for (int r = 0; r < report.replicas; ++r)
    for (int i = 0; i < report.samples.cols(); ++i)
      fl_csv += std::to_string(r) + "," + fmt(report.T) + "," + std::to_string(i) + "," +
                fmt(report.samples(r, i)) + "\n";
  writer.write("fluctuations.csv", fl_csv);

  json rep;
  rep["subcommand"] = "clt";
  rep["provenance"] = provenance_block(cfg);
  rep["N"] = report.n_agents;
  rep["replicas"] = report.replicas;
  rep["empirical_covariance"] = matrix_to_json(report.empirical_cov);
  rep["predicted_covariance"] = matrix_to_json(report.predicted_cov);
  rep["rel_frobenius_error"] = report.rel_frobenius_error;
  rep["tolerance"] = report.tolerance;
  rep["covariance_pass"] = report.covariance_pass;
  json comps = json::array();
  for (const auto& c : report.component_normality)
    comps.push_back({{"z_skewness", c.z_skewness},
                     {"z_kurtosis", c.z_kurtosis},
                     {"degenerate", c.degenerate},
                     {"pass", c.pass}});
  rep["component_normality"] = std::move(comps);
  rep["normality_pass"] = report.normality_pass;
  rep["pass"] = report.covariance_pass && report.normality_pass;

  RunResult result;
  result.report = rep;
  result.exit_code = (report.covariance_pass && report.normality_pass) ? 0 : 2;
  return result;
}

RunResult do_validate_model(const ExperimentConfig& cfg, const BuiltModel& model,
                            PhaseTimer& timer) {
  RunResult result;
  json rep;
  rep["subcommand"] = "validate-model";
  rep["provenance"] = provenance_block(cfg);
  if (model.finite) {
    const auto report = validate_model_kernels(*model.finite, cfg.seed);
    rep["max_gamma_residual"] = report.max_gamma_residual;
    rep["max_lambda_residual"] = report.max_lambda_residual;
    rep["min_sampler_pvalue"] = report.min_sampler_pvalue;
    rep["failures"] = report.failures;
    rep["pass"] = report.pass;
    result.exit_code = report.pass ? 0 : 2;
  } else {
    rep["note"] = "percolation model: constant meeting rate, deterministic pairwise-sum kernel";
    rep["pass"] = true;
  }
  timer.lap("validate");
  result.report = rep;
  return result;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& subcommand) {
  const BuiltModel model = build_model(cfg);
  ArtifactWriter writer(cfg.out_dir);
  PhaseTimer timer;

  RunResult result;
  if (subcommand == "run") {
    result = model.finite ? do_run_finite(cfg, *model.finite, writer, timer)
                          : do_run_percolation(cfg, *model.percolation, writer, timer);
  } else if (subcommand == "lln") {
    result = do_lln(cfg, model, writer, timer);
  } else if (subcommand == "clt") {
    result = do_clt(cfg, model, writer, timer);
  } else if (subcommand == "validate-model") {
    result = do_validate_model(cfg, model, timer);
  } else {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }

  writer.write("report.json", result.report.dump(2) + "\n");
  timer.lap("export");
  write_manifest(writer, cfg, timer, subcommand);
  result.files = writer.names();
  return result;
}

}  // namespace psim
