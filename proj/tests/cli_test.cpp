#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mixmem/cli.hpp"

namespace fs = std::filesystem;
using mixmem::cli::Json;
using mixmem::cli::run_command;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_command(args, out, err);
  return {status, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mixmem_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Json json(const std::string& name) const { return Json::parse(mixmem::io::read_file(path(name))); }

  /// Small simulated dataset under sim/.
  std::string simulate(const std::string& extra_n = "60", const std::string& g = "3") {
    const auto r = run({"simulate", "--G", g, "--N", extra_n, "--M", "8", "--seed", "7", "--out", path("sim")});
    EXPECT_EQ(r.status, 0) << r.err;
    return path("sim/data.csv");
  }

  fs::path dir_;
};

void expect_plot_header(const std::string& file) {
  const auto text = mixmem::io::read_file(file);
  EXPECT_EQ(text.rfind("# command: ", 0), 0u) << file;
  EXPECT_NE(text.find("\n# seed: "), std::string::npos) << file;
  EXPECT_NE(text.find("\n# config_hash: "), std::string::npos) << file;
}

}  // namespace

TEST_F(CliTest, SimulateThenFitWritesRecovery) {
  ASSERT_EQ(run({"simulate", "--G", "3", "--N", "300", "--M", "24", "--seed", "7", "--out", path("sim")}).status, 0);
  for (const char* f : {"data.csv", "truth_theta.csv", "truth_tau.csv", "truth_z.csv", "simulation.json"}) {
    EXPECT_TRUE(fs::exists(path(std::string("sim/") + f))) << f;
  }
  const auto data = mixmem::load_dataset(path("sim/data.csv"));
  EXPECT_EQ(data.rows(), 300u);
  EXPECT_EQ(data.cols(), 24u);

  const auto r = run({"fit-mm", "--data", path("sim/data.csv"), "--G", "3", "--truth", path("sim"), "--out",
                      path("fit")});
  ASSERT_EQ(r.status, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("fit/recovery.csv")));
  expect_plot_header(path("fit/recovery.csv"));
  const auto doc = json("fit/mm_result.json");
  EXPECT_LE(doc["recovery"]["mean_rel_rate_error"].get<double>(), 0.15);
  EXPECT_LE(doc["recovery"]["mean_abs_tau_error"].get<double>(), 0.10);
  for (const char* f : {"theta_curves.csv", "eom_hist.csv", "uncertainty_hist.csv", "ternary_coords.csv",
                        "profile_sets.csv"}) {
    expect_plot_header(path(std::string("fit/") + f));
  }
}

TEST_F(CliTest, SingleProfileFit) {
  const auto data = simulate();
  const auto r = run({"fit-mm", "--data", data, "--G", "1", "--out", path("g1")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto doc = json("g1/mm_result.json");
  EXPECT_TRUE(doc["fit"]["converged"].get<bool>());
  for (const auto& row : doc["tau_hat"]) {
    ASSERT_EQ(row.size(), 1u);
    EXPECT_EQ(row[0].get<double>(), 1.0);
  }
  for (const auto& s : doc["profile_sets"]) EXPECT_EQ(s.get<std::string>(), "{1}");
}

TEST_F(CliTest, ResultDocumentsAreDeterministic) {
  const auto data = simulate();
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run({"fit-mm", "--data", data, "--G", "2", "--seed", "5", "--restarts", "3", "--out", path(out)}).status, 0);
    ASSERT_EQ(run({"fit-mixture", "--data", data, "--G", "2", "--seed", "5", "--out", path(out)}).status, 0);
  }
  for (const char* f : {"mm_result.json", "theta_curves.csv", "mixture_result.json", "ternary_coords.csv"}) {
    EXPECT_EQ(mixmem::io::read_file(path(std::string("a/") + f)), mixmem::io::read_file(path(std::string("b/") + f))) << f;
  }
  ASSERT_EQ(run({"fit-mm", "--data", data, "--G", "2", "--seed", "6", "--restarts", "3", "--out", path("c")}).status, 0);
  EXPECT_NE(json("a/mm_result.json")["config_hash"], json("c/mm_result.json")["config_hash"]);
}

TEST_F(CliTest, ConfigIsEchoed) {
  const auto data = simulate();
  ASSERT_EQ(run({"fit-mm", "--data", data, "--G", "2", "--mode", "bayes", "--delta", "0.7", "--alpha", "0.5",
                 "--restarts", "2", "--out", path("o")})
                .status,
            0);
  const auto doc = json("o/mm_result.json");
  const auto& c = doc["config"];
  EXPECT_EQ(c["command"], "fit-mm");
  EXPECT_EQ(c["mode"], "bayes");
  EXPECT_EQ(c["delta"], Json::array({0.7, 0.7}));
  EXPECT_EQ(c["prior"]["alpha"], 0.5);
  EXPECT_EQ(c["restarts"], 2);
  EXPECT_EQ(c["max_iterations"], 1000);
  EXPECT_EQ(doc["config_hash"], mixmem::fnv1a_hex(c.dump()));
  EXPECT_FALSE(doc["theta_posterior"].is_null());
}

TEST_F(CliTest, EvaluateAndReportPipeline) {
  const auto data = simulate("80");
  ASSERT_EQ(run({"fit-mm", "--data", data, "--G", "3", "--restarts", "2", "--out", path("mm")}).status, 0);
  ASSERT_EQ(run({"fit-mixture", "--data", data, "--G", "4", "--restarts", "2", "--out", path("mix")}).status, 0);
  for (const char* f : {"mixture_theta_curves.csv", "mixture_uncertainty_hist.csv", "mixture_assignments.csv"}) {
    expect_plot_header(path(std::string("mix/") + f));
  }

  const auto ev = run({"evaluate", "--fit", path("mm/mm_result.json"), "--out", path("ev")});
  ASSERT_EQ(ev.status, 0) << ev.err;
  const auto fitted = json("mm/mm_result.json");
  const auto evaluated = json("ev/evaluation.json");
  EXPECT_EQ(evaluated["map_z"], fitted["map_z"]);
  EXPECT_EQ(evaluated["profile_sets"], fitted["profile_sets"]);
  for (std::size_t n = 0; n < 80; ++n) {
    EXPECT_NEAR(evaluated["eom"][n].get<double>(), fitted["eom"][n].get<double>(), 1e-12);
  }

  const auto rep = run({"report", "--mm", path("mm/mm_result.json"), "--mixture", path("mix/mixture_result.json"),
                        "--out", path("rep")});
  ASSERT_EQ(rep.status, 0) << rep.err;
  const auto report = json("rep/report.json");
  EXPECT_EQ(report["total"], 80);
  EXPECT_EQ(report["groups"], 4);
  expect_plot_header(path("rep/crosstab.csv"));
}

TEST_F(CliTest, SweepTable) {
  const auto data = simulate("40");
  const auto r = run({"sweep", "--data", data, "--g-min", "1", "--g-max", "3", "--restarts", "2", "--draws", "500",
                      "--out", path("sw")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto doc = json("sw/sweep.json");
  ASSERT_EQ(doc["rows"].size(), 6u);
  std::size_t bic_rows = 0, ll_rows = 0;
  for (const auto& row : doc["rows"]) {
    EXPECT_TRUE(row["ok"].get<bool>()) << row.dump();
    (row["criterion"] == "bic" ? bic_rows : ll_rows)++;
  }
  EXPECT_EQ(bic_rows, 3u);
  EXPECT_EQ(ll_rows, 3u);
  EXPECT_FALSE(doc["best"]["bic"].is_null());
  const auto text = mixmem::io::read_file(path("sw/sweep.csv"));
  EXPECT_NE(text.find("# orientation: "), std::string::npos);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const auto data = simulate();
  ::setenv("MIXMEM_OUTPUT_DIR", path("envout").c_str(), 1);
  const auto r = run({"fit-mixture", "--data", data, "--G", "1"});
  ::unsetenv("MIXMEM_OUTPUT_DIR");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("envout/mixture_result.json")));
}

TEST_F(CliTest, Errors) {
  EXPECT_NE(run({}).status, 0);
  EXPECT_NE(run({"fit-mm", "--G", "2"}).status, 0);
  EXPECT_NE(run({"fit-mm", "--data", "x.csv", "--G", "2", "--bogus"}).status, 0);
  EXPECT_NE(run({"fit-mm", "--data", "x.csv", "--G", "2", "--mode", "frequentist"}).status, 0);
  EXPECT_NE(run({"no-such-command"}).status, 0);

  mixmem::io::write_file(path("bad.csv"), "id,h1,h2\na,0,3\nb,-1,2\n");
  const auto bad = run({"fit-mm", "--data", path("bad.csv"), "--G", "2", "--out", path("o")});
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  EXPECT_NE(bad.err.find("negative"), std::string::npos) << bad.err;

  const auto data = simulate();
  const auto delta = run({"fit-mm", "--data", data, "--G", "2", "--delta", "1,2,3", "--out", path("o")});
  EXPECT_EQ(delta.status, 2);
  EXPECT_NE(delta.err.find("--delta"), std::string::npos);
  EXPECT_NE(run({"evaluate", "--fit", path("missing.json")}).status, 0);
}

TEST_F(CliTest, DocumentsCarrySchemaRequiredFields) {
  const char* schema_path = std::getenv("MIXMEM_SCHEMA");
  if (!schema_path) GTEST_SKIP() << "MIXMEM_SCHEMA not set";
  const Json schema = Json::parse(mixmem::io::read_file(schema_path));
  const auto data = simulate("30");
  ASSERT_EQ(run({"fit-mm", "--data", data, "--G", "2", "--restarts", "1", "--out", path("o")}).status, 0);
  ASSERT_EQ(run({"fit-mixture", "--data", data, "--G", "2", "--restarts", "1", "--out", path("o")}).status, 0);
  const std::pair<const char*, const char*> docs[] = {{"mm_fit", "o/mm_result.json"},
                                                      {"mixture_fit", "o/mixture_result.json"}};
  for (const auto& [kind, file] : docs) {
    const auto doc = json(file);
    for (const auto& key : schema["$defs"][kind]["required"]) EXPECT_TRUE(doc.contains(key.get<std::string>())) << kind << " " << key;
  }
}
