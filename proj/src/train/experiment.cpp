#include "ctxslu/train/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "ctxslu/error.hpp"
#include "ctxslu/train/stats.hpp"

namespace ctxslu::train {

std::string significance_marker(double p) {
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::size_t thread_budget() {
  if (const char* env = std::getenv("CTXSLU_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string fixed(double v, int digits) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*f", digits, v);
  return b;
}

std::string p_text(const RowResult& r) { return r.p_vs_baselines ? fixed(*r.p_vs_baselines, 6) : ""; }

}  // namespace

void ExperimentTable::write_csv(std::ostream& out) const {
  out << "name,mean_f1,marker,p_vs_baselines,scores\n";
  for (const auto& r : rows) {
    out << '"' << r.name << "\"," << fixed(r.mean, 4) << ',' << r.marker << ',' << p_text(r) << ',';
    for (std::size_t i = 0; i < r.scores.size(); ++i) out << (i ? ";" : "") << fixed(r.scores[i], 4);
    out << '\n';
  }
}

void ExperimentTable::write_text(std::ostream& out) const {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.name.size() + (r.baseline ? 11 : 0));
  out << "Model" << std::string(w - 5 + 2, ' ') << "Mean F1    p(vs baselines)\n";
  out << std::string(w + 2 + 26, '-') << '\n';
  for (const auto& r : rows) {
    const std::string name = r.name + (r.baseline ? " (baseline)" : "");
    std::string f1 = fixed(r.mean, 2) + r.marker;
    out << name << std::string(w - name.size() + 2, ' ') << f1 << std::string(f1.size() < 11 ? 11 - f1.size() : 1, ' ')
        << p_text(r) << '\n';
  }
  out << "runs per row: " << n_runs << "; * p < 0.05, ** p < 0.01 (one-tailed Welch t-test vs every baseline)\n";
}

ExperimentTable run_experiment(std::span<const ExperimentRow> rows, const corpus::Splits& splits, std::size_t n_runs,
                               std::size_t threads, const RunCallback& on_run) {
  if (n_runs == 0) throw UsageError("run_experiment: n_runs must be at least 1");
  if (rows.empty()) throw UsageError("run_experiment: no rows");
  for (const auto& r : rows) {
    try {
      r.cfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("row '" + r.name + "': " + e.what());
    }
  }

  ExperimentTable table;
  table.n_runs = n_runs;
  table.rows.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.rows[i].name = rows[i].name;
    table.rows[i].baseline = rows[i].baseline;
    table.rows[i].runs.resize(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) table.rows[i].seeds.push_back(rows[i].cfg.seed + r);
  }

  const std::size_t jobs = rows.size() * n_runs;
  std::atomic<std::size_t> next{0};
  std::mutex report;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const std::size_t i = j / n_runs, r = j % n_runs;
      try {
        TrainConfig cfg = rows[i].cfg;
        cfg.seed = table.rows[i].seeds[r];
        table.rows[i].runs[r] = train(cfg, splits).result;
        if (on_run) {
          std::lock_guard lock(report);
          on_run(rows[i].name, cfg.seed, table.rows[i].runs[r]);
        }
      } catch (...) {
        std::lock_guard lock(report);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& row : table.rows) {
    for (const auto& run : row.runs) row.scores.push_back(100.0 * run.test.f1);
    row.mean = mean(row.scores);
  }
  for (auto& row : table.rows) {
    if (row.baseline || n_runs < 2) continue;
    for (const auto& base : table.rows) {
      if (!base.baseline) continue;
      row.p_values.push_back(t_test_one_tailed(row.scores, base.scores));
    }
    if (!row.p_values.empty()) {
      row.p_vs_baselines = *std::max_element(row.p_values.begin(), row.p_values.end());
      row.marker = significance_marker(*row.p_vs_baselines);
    }
  }
  return table;
}

}  // namespace ctxslu::train
