#include "advcf/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "advcf/harness/experiment.hpp"

namespace advcf::harness {
namespace {

std::string f1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::vector<Table> tables_of(const nlohmann::json& j) { return j.get<std::vector<Table>>(); }

const Table& find(const std::vector<Table>& ts, const std::string& name) {
  for (const auto& t : ts) {
    if (t.name == name) return t;
  }
  throw std::runtime_error("results have no table '" + name + "'");
}

std::vector<Table> seed_tables(const nlohmann::json& results, const std::string& name) {
  std::vector<Table> out;
  for (const auto& s : results.at("per_seed")) out.push_back(find(tables_of(s.at("tables")), name));
  return out;
}

void check_main(const std::vector<Table>& mean, std::vector<CriterionResult>& out) {
  const Table& t = find(mean, "groups");
  const double po = t.at("proposed", "overall"), no = t.at("naive", "overall");
  const double pw = t.at("proposed", "worst"), nw = t.at("naive", "worst");
  out.push_back({5, "main: proposed vs naive", po >= no + 2.0 && pw >= nw + 5.0,
                 "overall " + f1(po) + " vs " + f1(no) + " (need +2), worst " + f1(pw) + " vs " + f1(nw) +
                     " (need +5)"});
}

void check_continual(const std::vector<Table>& mean, std::vector<CriterionResult>& out) {
  const Table& t = find(mean, "continual");
  const std::size_t m1 = t.column("M=1");
  const double p = t.values[t.row("proposed")][m1], h = t.values[t.row("hsrs")][m1];
  bool monotone = true;
  std::string breaks;
  // Columns are listed in increasing M; accuracy may not rise by more than
  // one point as M decreases.
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
      const double lo = t.values[r][c - 1], hi = t.values[r][c];
      if (std::isnan(lo) || std::isnan(hi)) continue;
      if (lo > hi + 1.0) {
        monotone = false;
        breaks += " " + t.rows[r] + "@" + t.columns[c - 1];
      }
    }
  }
  out.push_back({6, "continual: proposed vs HSRS at M=1, monotone in M", p >= h + 3.0 && monotone,
                 "M=1 proposed " + f1(p) + " vs HSRS " + f1(h) + " (need +3); monotone " +
                     (monotone ? "yes" : "no, rises at" + breaks)});
}

void check_n_sweep(const std::vector<Table>& mean, std::vector<CriterionResult>& out) {
  const Table& t = find(mean, "n_sweep");
  const double n1 = t.at("proposed", "N=1"), n100 = t.at("proposed", "N=100");
  out.push_back({7, "sample efficiency: N=1 within 6 points of N=100", std::abs(n100 - n1) <= 6.0,
                 "N=1 " + f1(n1) + ", N=100 " + f1(n100)});
}

void check_spurious(const nlohmann::json& results, const std::vector<Table>& mean,
                    std::vector<CriterionResult>& out) {
  const Table& t = find(mean, "groups");
  const double po = t.at("proposed", "overall"), no = t.at("naive", "overall");
  const double pw = t.at("proposed", "worst"), nw = t.at("naive", "worst");
  double shift = 0.0;
  std::size_t n = 0;
  for (const auto& s : results.at("per_seed")) {
    const auto& d = s.at("details");
    if (d.contains("young_ad_age_shift") && d["young_ad_age_shift"].is_number()) {
      shift += d["young_ad_age_shift"].get<double>();
      ++n;
    }
  }
  shift = n ? shift / static_cast<double>(n) : std::nan("");
  out.push_back({8, "spurious: proposed vs naive, AD ages pushed older",
                 po >= no + 5.0 && pw >= nw + 10.0 && shift >= 2.0,
                 "overall " + f1(po) + " vs " + f1(no) + " (need +5), worst " + f1(pw) + " vs " + f1(nw) +
                     " (need +10), young-AD age shift " + f1(shift) + " years (need 2)"});
}

void check_g_vs_c(const nlohmann::json& results, const std::vector<Table>& mean,
                  std::vector<CriterionResult>& out) {
  const Table& t = find(mean, "g_vs_c");
  const double g = t.at("g_vs_c", "overall"), p = t.at("proposed", "overall");
  bool all_degraded = true;
  std::string ratios;
  for (const Table& f : seed_tables(results, "fidelity")) {
    const double ratio = f.at("g_vs_c", "ratio");
    all_degraded = all_degraded && ratio >= 2.0;
    ratios += (ratios.empty() ? "" : ", ") + f1(ratio);
  }
  out.push_back({9, "G vs C: generator degrades and classifier is worse than proposed", all_degraded && g < p,
                 "fidelity ratio per seed [" + ratios + "] (need >= 2), accuracy " + f1(g) + " vs proposed " + f1(p)});
}

}  // namespace

std::vector<CriterionResult> check_criteria(const nlohmann::json& results) {
  const std::string kind = results.at("kind").get<std::string>();
  const auto mean = tables_of(results.at("mean"));
  std::vector<CriterionResult> out;
  if (kind == "main") check_main(mean, out);
  if (kind == "continual") check_continual(mean, out);
  if (kind == "n_sweep") check_n_sweep(mean, out);
  if (kind == "spurious") check_spurious(results, mean, out);
  if (kind == "g_vs_c") check_g_vs_c(results, mean, out);
  return out;
}

std::vector<std::pair<std::string, std::string>> best_per_column(const Table& t) {
  std::vector<std::pair<std::string, std::string>> out;
  if (t.rows.size() < 2) return out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    std::size_t best = t.rows.size();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double v = t.values[r][c];
      if (std::isnan(v)) continue;
      if (best == t.rows.size() || v > t.values[best][c]) best = r;
    }
    if (best < t.rows.size()) out.emplace_back(t.columns[c], t.rows[best]);
  }
  return out;
}

std::string report(const std::filesystem::path& dir, std::vector<CriterionResult>* criteria) {
  std::vector<std::string> missing;
  for (const auto& f : expected_files()) {
    if (!std::filesystem::exists(dir / f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    std::string msg = "missing results in " + dir.string() + ": expected";
    for (const auto& f : expected_files()) msg += " " + f;
    msg += " (absent:";
    for (const auto& f : missing) msg += " " + f;
    throw std::runtime_error(msg + ")");
  }
  const nlohmann::json results = read_json(dir / "results.json");
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  std::ostringstream s;
  s << "experiment " << results.at("kind").get<std::string>() << ", config " << manifest.at("config_hash").get<std::string>()
    << ", " << results.at("per_seed").size() << " seed(s)\n";
  const auto mean = tables_of(results.at("mean"));
  const auto sd = tables_of(results.at("std"));
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const Table& m = mean[i];
    s << "\n[" << m.name << "] mean +- std\n";
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      s << "  " << m.rows[r] << ":";
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        s << "  " << m.columns[c] << " ";
        if (std::isnan(m.values[r][c])) {
          s << "N/A";
        } else {
          char buf[64];
          std::snprintf(buf, sizeof buf, m.name == "fidelity" ? "%.5f+-%.5f" : "%.1f+-%.1f", m.values[r][c],
                        sd[i].values[r][c]);
          s << buf;
        }
      }
      s << "\n";
    }
    const auto best = best_per_column(m);
    if (!best.empty()) {
      s << "  best:";
      for (const auto& [col, row] : best) s << "  " << col << "=" << row;
      s << "\n";
    }
  }
  const auto crit = check_criteria(results);
  if (!crit.empty()) s << "\n";
  for (const auto& c : crit) {
    s << "criterion " << c.id << " " << (c.passed ? "PASS" : "FAIL") << ": " << c.name << " -- " << c.detail << "\n";
  }
  if (criteria) *criteria = crit;
  return s.str();
}

}  // namespace advcf::harness
