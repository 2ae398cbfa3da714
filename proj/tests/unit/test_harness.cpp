#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "advcf/harness/config.hpp"
#include "advcf/harness/experiment.hpp"
#include "advcf/harness/io.hpp"
#include "advcf/harness/report.hpp"
#include "advcf/json_util.hpp"

using namespace advcf;
using namespace advcf::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advcf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Every file under `dir` except the wall-clock log, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "timing.txt") continue;
    out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.kind = ExperimentKind::Main;
  c.seeds = {0, 1};
  c.dataset = world::DatasetSpec::balanced(6, 2, 4, 0);
  c.dataset.render.size = 8;
  c.dataset.render.ad_shift_years = 30.0;
  c.classifier.hidden = {8};
  c.pretrain.learning_rate = 1e-3;
  c.pretrain.epochs = 3;
  c.adversarial.k = 2;
  c.adversarial.n = 6;
  c.adversarial.train.learning_rate = 1e-3;
  c.methods = {"naive", "hsrs", "jtt", "proposed"};
  return c;
}

Table table(std::string name, std::vector<std::vector<double>> v) {
  Table t;
  t.name = std::move(name);
  t.columns = {"a", "b"};
  for (std::size_t i = 0; i < v.size(); ++i) t.add_row("m" + std::to_string(i), v[i]);
  return t;
}

}  // namespace

TEST(Config, UnknownKeysRejected) {
  nlohmann::json j = tiny_config();
  j["adversarial"]["gamma"] = 0.1;
  EXPECT_THROW(j.get<ExperimentConfig>(), ConfigError);
  j = tiny_config();
  j["colour"] = "blue";
  EXPECT_THROW(j.get<ExperimentConfig>(), ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  ExperimentConfig c = tiny_config();
  c.methods = {"naive", "mixup"};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.m_values = {0.0};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, JsonRoundTripAndHash) {
  const ExperimentConfig c = tiny_config();
  const nlohmann::json j = c;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(c));
  ExperimentConfig other = c;
  other.adversarial.k = 3;
  EXPECT_NE(config_hash(other), config_hash(c));
  other = c;
  other.output = "elsewhere";
  EXPECT_EQ(config_hash(other), config_hash(c));
}

TEST(Config, ShippedConfigsLoad) {
  const fs::path dir = fs::path(ADVCF_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 6);
}

TEST(Config, SeedList) {
  EXPECT_EQ(parse_seed_list("0-4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(parse_seed_list("3,7"), (std::vector<std::uint64_t>{3, 7}));
  EXPECT_EQ(parse_seed_list("0-2,9"), (std::vector<std::uint64_t>{0, 1, 2, 9}));
  EXPECT_THROW(parse_seed_list("4-1"), ConfigError);
  EXPECT_THROW(parse_seed_list("1,,2"), ConfigError);
  EXPECT_THROW(parse_seed_list("x"), ConfigError);
}

TEST(Config, SeedPlanStreams) {
  const SeedPlan p = plan_seeds(7);
  EXPECT_EQ(p.data, derive_seed(7, "data"));
  EXPECT_EQ(p.shuffle, derive_seed(7, "shuffle"));
  EXPECT_EQ(p.store, derive_seed(p.adv, "store"));
  EXPECT_NE(p.data, p.init);
  EXPECT_EQ(plan_seeds(7).encoder, p.encoder);
}

TEST(Io, CsvFormat) {
  Table t = table("groups", {{0.9123, std::nan("")}, {0.5, 0.25}});
  EXPECT_EQ(to_csv(t), "method,a,b\nm0,0.9,N/A\nm1,0.5,0.2\n");
  EXPECT_EQ(to_csv(t, 3), "method,a,b\nm0,0.912,N/A\nm1,0.500,0.250\n");
}

TEST(Io, TableLookupAndJson) {
  const Table t = table("x", {{1, 2}, {3, 4}});
  EXPECT_EQ(t.at("m1", "b"), 4.0);
  EXPECT_THROW(t.row("m9"), std::out_of_range);
  const Table back = nlohmann::json(t).get<Table>();
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Io, MeanAndStdMatchRecomputation) {
  const std::vector<Table> seeds{table("t", {{1, 10}, {2, std::nan("")}}), table("t", {{3, 20}, {4, 1}}),
                                 table("t", {{8, 30}, {6, 1}})};
  const Table m = table_mean(seeds);
  const Table s = table_std(seeds);
  EXPECT_DOUBLE_EQ(m.values[0][0], 4.0);
  EXPECT_DOUBLE_EQ(m.values[0][1], 20.0);
  EXPECT_TRUE(std::isnan(m.values[1][1]));
  // Sample standard deviation of {1, 3, 8}: sqrt(((-3)^2 + (-1)^2 + 4^2) / 2).
  EXPECT_DOUBLE_EQ(s.values[0][0], std::sqrt(13.0));
  EXPECT_DOUBLE_EQ(s.values[0][1], 10.0);
}

TEST(Io, AtomicWriteReplaces) {
  const fs::path dir = fresh_dir("atomic");
  write_atomic(dir / "f.txt", "one");
  write_atomic(dir / "f.txt", "two");
  EXPECT_EQ(slurp(dir / "f.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "f.txt.tmp"));
  fs::remove_all(dir);
}

TEST(Io, HistogramSvg) {
  metrics::Histogram a{60.0, 5.0, {1, 2, 3, 0, 0, 0}};
  metrics::Histogram b{60.0, 5.0, {0, 0, 1, 2, 3, 0}};
  const std::string svg = histogram_svg(a, b, "ages");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("orange"), std::string::npos);
  EXPECT_NE(svg.find("steelblue"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, EmptyDirListsExpectedFiles) {
  const fs::path dir = fresh_dir("empty_report");
  try {
    report(dir);
    FAIL() << "report on an empty directory should throw";
  } catch (const std::exception& e) {
    for (const auto& f : expected_files()) EXPECT_NE(std::string(e.what()).find(f), std::string::npos) << f;
  }
  fs::remove_all(dir);
}

TEST(Report, BestPerColumn) {
  Table t = table("groups", {{0.5, 0.9}, {0.7, std::nan("")}, {0.6, 0.1}});
  const auto best = best_per_column(t);
  ASSERT_EQ(best.size(), 2u);
  EXPECT_EQ(best[0], (std::pair<std::string, std::string>{"a", "m1"}));
  EXPECT_EQ(best[1], (std::pair<std::string, std::string>{"b", "m0"}));
}

TEST(Experiment, TinyRunIsReproducible) {
  const ExperimentConfig cfg = tiny_config();
  const fs::path a = fresh_dir("run_a"), b = fresh_dir("run_b"), c = fresh_dir("run_c");
  write_results(cfg, run_experiment(cfg, 1), a, 1.0);
  write_results(cfg, run_experiment(cfg, 2), b, 2.0);
  const auto sa = snapshot(a), sb = snapshot(b);
  EXPECT_EQ(sa, sb);
  for (const char* f : {"manifest.json", "results.json", "groups.csv", "groups_std.csv", "precision_recall.csv",
                        "seeds/seed_0/groups.csv", "seeds/seed_1/details.json", "seeds/seed_1/history.jsonl"}) {
    EXPECT_TRUE(sa.count(f)) << f;
  }

  // The manifest alone reproduces the run.
  const ExperimentConfig replay = load_config_or_manifest(a / "manifest.json");
  write_results(replay, run_experiment(replay, 1), c, 3.0);
  EXPECT_EQ(snapshot(c), sa);

  // Table layout: one row per method, six groups plus overall and worst.
  Table groups = read_json(a / "results.json").at("mean").at(0).get<Table>();
  EXPECT_EQ(groups.name, "groups");
  EXPECT_EQ(groups.rows, cfg.methods);
  EXPECT_GE(groups.columns.size(), 7u);

  // Aggregates match a recomputation from the per-seed CSV-backing JSON.
  const auto results = read_json(a / "results.json");
  const auto& per_seed = results.at("per_seed");
  for (std::size_t r = 0; r < groups.rows.size(); ++r) {
    for (std::size_t col = 0; col < groups.columns.size(); ++col) {
      double sum = 0.0;
      for (const auto& s : per_seed) sum += s.at("tables").at(0).get<Table>().values[r][col];
      EXPECT_NEAR(groups.values[r][col], sum / static_cast<double>(per_seed.size()), 1e-12);
    }
  }

  std::vector<CriterionResult> crit;
  const std::string text = report(a, &crit);
  EXPECT_NE(text.find("groups"), std::string::npos);
  EXPECT_NE(text.find("best"), std::string::npos);
  ASSERT_EQ(crit.size(), 1u);
  EXPECT_EQ(crit[0].id, 5);

  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Experiment, ContinualTableLayout) {
  ExperimentConfig cfg = tiny_config();
  cfg.kind = ExperimentKind::Continual;
  cfg.seeds = {0};
  cfg.methods = {"naive", "hsrs", "proposed"};
  cfg.m_values = {10, 100};
  const ExperimentResult r = run_experiment(cfg);
  const Table& t = r.mean.front();
  EXPECT_EQ(t.name, "continual");
  EXPECT_EQ(t.columns, (std::vector<std::string>{"M=10", "M=100"}));
  EXPECT_EQ(t.rows, cfg.methods);
  EXPECT_TRUE(std::isnan(t.at("naive", "M=10")));
  EXPECT_FALSE(std::isnan(t.at("naive", "M=100")));
}
