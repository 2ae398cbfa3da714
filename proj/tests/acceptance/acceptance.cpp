// Runs every acceptance criterion end to end and prints one verdict line per
// criterion. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "advcf/harness/experiment.hpp"
#include "advcf/harness/report.hpp"
#include "advcf/harness/selftest.hpp"

using namespace advcf;
using namespace advcf::harness;
namespace fs = std::filesystem;

namespace {

struct Run {
  fs::path dir;
  double seconds = 0.0;
  nlohmann::json results;
};

Run run_config(const fs::path& config, const fs::path& out, int jobs) {
  ExperimentConfig cfg = load_config_or_manifest(config);
  cfg.output = out.string();
  std::cerr << "running " << kind_name(cfg.kind) << " (" << cfg.seeds.size() << " seeds) from " << config << "\n";
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(cfg, jobs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fs::remove_all(out);
  write_results(cfg, r, out, secs);
  std::cerr << "  done in " << secs << " s\n";
  return {out, secs, read_json(out / "results.json")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// CSV and JSON files under `dir`, keyed by relative path.
std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".json" || ext == ".jsonl")) {
      out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
  }
  return out;
}

// Adds the runtime limit to a criterion checked on results.
CriterionResult with_limit(CriterionResult c, double seconds, double limit) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "; runtime %.1f s (limit %.0f s)", seconds, limit);
  c.detail += buf;
  c.passed = c.passed && seconds < limit;
  return c;
}

CriterionResult only(const Run& r, int id) {
  for (const auto& c : check_criteria(r.results)) {
    if (c.id == id) return c;
  }
  return {id, "missing", false, "results carry no check for this criterion"};
}

CriterionResult reproducibility(const std::vector<std::pair<Run, fs::path>>& originals) {
  CriterionResult c{10, "re-running from a manifest reproduces CSV/JSON outputs byte for byte", true, ""};
  for (const auto& [orig, replay_dir] : originals) {
    // A different worker count on the replay also checks that results do
    // not depend on scheduling.
    const Run replay = run_config(orig.dir / "manifest.json", replay_dir, 2);
    const auto a = outputs(orig.dir), b = outputs(replay.dir);
    std::size_t differing = 0;
    for (const auto& [name, bytes] : a) {
      const auto it = b.find(name);
      if (it == b.end() || it->second != bytes) ++differing;
    }
    differing += b.size() > a.size() ? b.size() - a.size() : 0;
    c.detail += (c.detail.empty() ? "" : "; ") + orig.dir.filename().string() + ": " + std::to_string(a.size()) +
                " files, " + std::to_string(differing) + " differ";
    c.passed = c.passed && differing == 0 && !a.empty();
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path configs = fs::path(ADVCF_SOURCE_DIR) / "configs";
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
  fs::create_directories(out);

  std::vector<CriterionResult> verdicts = selftest(0);

  const Run main_run = run_config(configs / "main.json", out / "main", 1);
  verdicts.push_back(with_limit(only(main_run, 5), main_run.seconds, 600));

  const Run continual = run_config(configs / "continual.json", out / "continual", 1);
  verdicts.push_back(with_limit(only(continual, 6), continual.seconds, 1200));

  const Run sweep = run_config(configs / "n_sweep.json", out / "n_sweep", 1);
  verdicts.push_back(only(sweep, 7));

  const Run spurious = run_config(configs / "spurious.json", out / "spurious", 1);
  verdicts.push_back(with_limit(only(spurious, 8), spurious.seconds, 600));

  const Run gvc = run_config(configs / "g_vs_c.json", out / "g_vs_c", 1);
  verdicts.push_back(only(gvc, 9));

  verdicts.push_back(reproducibility({{main_run, out / "main_replay"}, {spurious, out / "spurious_replay"}}));

  bool ok = true;
  std::cout << "\n";
  for (const auto& c : verdicts) {
    std::cout << "criterion " << c.id << " " << (c.passed ? "PASS" : "FAIL") << ": " << c.name << " -- " << c.detail
              << "\n";
    ok = ok && c.passed;
  }
  std::cout.flush();
  return ok ? 0 : 1;
}
