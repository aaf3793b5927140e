#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <psim/experiment.hpp>

using namespace psim;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

std::string config_path(const std::string& name) { return std::string(CONFIG_DIR) + "/" + name; }

std::vector<std::string> violations(const json& doc) {
  try {
    (void)parse_config_json(doc);
  } catch (const ConfigListError& e) {
    return e.messages();
  }
  return {};
}

}  // namespace

TEST_CASE("shipped configs are valid and build") {
  for (const char* name : {"otc_lln.json", "opinion_clt.json", "percolation_run.json",
                           "otc_run.json", "two_state_custom.json", "fleming_viot_run.json"}) {
    auto cfg = load_config(config_path(name));
    auto model = build_model(cfg);
    CHECK((model.finite.has_value() || model.percolation.has_value()));
  }
}

TEST_CASE("single violations name the field") {
  json doc = load_json(config_path("otc_run.json"));
  doc["model"]["params"]["beta"] = -1.0;
  const auto errs = violations(doc);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("model.params.beta") != std::string::npos);
}

TEST_CASE("missing model block is reported") {
  json doc = load_json(config_path("otc_run.json"));
  doc.erase("model");
  const auto errs = violations(doc);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("model required") != std::string::npos);
}

TEST_CASE("all violations are collected, not just the first") {
  json doc = load_json(config_path("otc_run.json"));
  doc["model"]["params"]["beta"] = -1.0;
  doc["run"]["T"] = -2.0;
  doc["run"]["replicas"] = 0;
  doc["banana"] = 1;
  const auto errs = violations(doc);
  CHECK(errs.size() == 4);
}

TEST_CASE("unknown keys are rejected") {
  json doc = load_json(config_path("otc_run.json"));
  doc["run"]["dt"] = 0.1;
  const auto errs = violations(doc);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("unknown key 'dt'") != std::string::npos);
}

TEST_CASE("N and N_list are mutually exclusive") {
  json doc = load_json(config_path("otc_run.json"));
  doc["run"]["N_list"] = {100, 200};
  CHECK(violations(doc).size() == 1);
  doc["run"].erase("N");
  doc["run"].erase("N_list");
  CHECK(violations(doc).size() == 1);
}

TEST_CASE("zero-rate custom model runs to T with no events") {
  json doc = load_json(config_path("two_state_custom.json"));
  doc["model"]["params"]["gamma_kernel"] = {{{0.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}}};
  doc["run"]["N"] = 20;
  doc["run"]["replicas"] = 1;
  doc["output"]["directory"] = "test_out/zero_rate";
  auto cfg = parse_config_json(doc);
  const auto result = run_experiment(cfg, "run");
  CHECK(result.exit_code == 0);
  std::ifstream traj("test_out/zero_rate/trajectory_N20_rep0.csv");
  REQUIRE(traj.good());
  int lines = 0;
  std::string line;
  while (std::getline(traj, line)) ++lines;
  CHECK(lines == 2);  // comment header + column header, no events
}

TEST_CASE("outputs are byte-identical across reruns") {
  json doc = load_json(config_path("two_state_custom.json"));
  doc["run"]["N"] = 200;
  doc["run"]["replicas"] = 2;
  auto cfg = parse_config_json(doc);

  cfg.out_dir = "test_out/repro_a";
  const auto a = run_experiment(cfg, "run");
  cfg.out_dir = "test_out/repro_b";
  const auto b = run_experiment(cfg, "run");
  REQUIRE(a.files == b.files);
  for (const auto& name : a.files) {
    if (name == "manifest.json") continue;  // timings differ
    std::ifstream fa("test_out/repro_a/" + name, std::ios::binary);
    std::ifstream fb("test_out/repro_b/" + name, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
  }

  // A different seed changes the trajectories.
  cfg.seed += 1;
  cfg.out_dir = "test_out/repro_c";
  (void)run_experiment(cfg, "run");
  std::ifstream fa("test_out/repro_a/trajectory_N200_rep0.csv", std::ios::binary);
  std::ifstream fc("test_out/repro_c/trajectory_N200_rep0.csv", std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cc((std::istreambuf_iterator<char>(fc)), std::istreambuf_iterator<char>());
  CHECK(ca != cc);
}

TEST_CASE("validate-model subcommand") {
  auto cfg = load_config(config_path("opinion_clt.json"));
  cfg.out_dir = "test_out/validate_opinion";
  const auto result = run_experiment(cfg, "validate-model");
  CHECK(result.exit_code == 0);
  CHECK(result.report.at("pass").get<bool>());

  auto otc = load_config(config_path("otc_run.json"));
  otc.out_dir = "test_out/validate_otc";
  CHECK(run_experiment(otc, "validate-model").exit_code == 0);
}

TEST_CASE("lln requires at least 3 values of N") {
  auto cfg = load_config(config_path("otc_lln.json"));
  cfg.n_list = {100, 200};
  cfg.out_dir = "test_out/lln_refused";
  CHECK_THROWS_AS((void)run_experiment(cfg, "lln"), ConfigError);
}

TEST_CASE("clt refuses too few replicas") {
  auto cfg = load_config(config_path("opinion_clt.json"));
  cfg.replicas = 50;
  cfg.out_dir = "test_out/clt_refused";
  CHECK_THROWS_AS((void)run_experiment(cfg, "clt"), ConfigError);
}

TEST_CASE("percolation lln runs with the ks metric") {
  json doc = load_json(config_path("percolation_run.json"));
  doc["run"].erase("N");
  doc["run"]["N_list"] = {50, 100, 200};
  doc["run"]["replicas"] = 8;
  doc["run"]["T"] = 0.5;
  doc["run"]["sample_points"] = 6;
  doc["run"]["grid"]["n"] = 512;
  doc["run"]["grid"]["hi"] = 24.0;
  doc["output"]["directory"] = "test_out/perc_lln";
  auto cfg = parse_config_json(doc);
  const auto result = run_experiment(cfg, "lln");
  CHECK(result.exit_code == 0);
  CHECK(result.report.at("metric").get<std::string>() == "ks");
  // KS errors shrink with N.
  const auto errs = result.report.at("mean_sup_error").get<std::vector<double>>();
  CHECK(errs.front() > errs.back());
}

TEST_CASE("test function family resolves against the space") {
  auto cfg = load_config(config_path("opinion_clt.json"));
  cfg.test_functions = json::array({{{"kind", "constant"}, {"value", 1.0}},
                                    {{"kind", "indicator"}, {"labels", {"0"}}}});
  auto model = build_model(cfg);
  auto family = build_test_family(cfg, model.finite->space);
  CHECK(family.size() == 2);
  CHECK(family[0].is_constant());

  cfg.test_functions = json::array({{{"kind", "monomial"}, {"power", 2}}});
  CHECK_THROWS_AS((void)build_test_family(cfg, model.finite->space), ConfigError);
}
