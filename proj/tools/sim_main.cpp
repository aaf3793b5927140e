#include <CLI11.hpp>
#include <iostream>

#include "psim/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas;
  std::optional<std::string> out_dir;
};

void attach(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  // Flags may only override seed, replicas, and the output directory;
  // everything else lives in the config so experiments stay archivable.
  cmd->add_option("--seed", opts.seed, "override run.seed");
  cmd->add_option("--replicas", opts.replicas, "override run.replicas");
  cmd->add_option("--out", opts.out_dir, "override output.directory");
}

int execute(const std::string& subcommand, const CommonOptions& opts) {
  try {
    psim::ExperimentConfig cfg = psim::load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.replicas) cfg.replicas = *opts.replicas;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    const auto result = psim::run_experiment(cfg, subcommand);
    if (result.report.contains("pass"))
      std::cout << (result.report.at("pass").get<bool>() ? "PASS" : "FAIL") << " " << subcommand
                << " -> " << cfg.out_dir << "/report.json\n";
    else if (result.report.contains("verdict"))
      std::cout << (result.exit_code == 0 ? "PASS" : "FAIL") << " " << subcommand << " -> "
                << cfg.out_dir << "/report.json\n";
    else
      std::cout << "OK " << subcommand << " -> " << cfg.out_dir << " (" << result.files.size()
                << " files)\n";
    return result.exit_code;
  } catch (const psim::ConfigListError& e) {
    for (const auto& m : e.messages()) std::cerr << "config error: " << m << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sim: exact simulation of pairwise-interacting agent systems, their deterministic "
      "mean-field limits, and statistical verification of the limit and fluctuation laws"};
  app.require_subcommand(1);

  CommonOptions run_opts, lln_opts, clt_opts, val_opts;
  CLI::App* run = app.add_subcommand("run", "simulate trajectories and the limit path");
  attach(run, run_opts);
  CLI::App* lln = app.add_subcommand("lln", "estimate the empirical convergence rate to the limit");
  attach(lln, lln_opts);
  CLI::App* clt =
      app.add_subcommand("clt", "compare fluctuation covariance against the covariance equation");
  attach(clt, clt_opts);
  CLI::App* val = app.add_subcommand("validate", "check kernel-consistency invariants of the model");
  attach(val, val_opts);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return execute("run", run_opts);
  if (lln->parsed()) return execute("lln", lln_opts);
  if (clt->parsed()) return execute("clt", clt_opts);
  if (val->parsed()) return execute("validate-model", val_opts);
  return 1;
}
