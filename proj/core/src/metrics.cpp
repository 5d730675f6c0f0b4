#include "dissect/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "dissect/error.hpp"
#include "json.hpp"

namespace dissect {

LevelCutProfile level_cut_profile(long long n_leaves, int branching) {
  if (n_leaves < 1 || branching < 2)
    throw Error(ErrorKind::InvalidArgument, "level cut needs N >= 1 and branching >= 2");
  // Smallest k with b^k >= N, in integers to avoid log rounding at exact powers.
  int k = 0;
  for (long long power = 1; power < n_leaves; power *= branching) ++k;
  LevelCutProfile out;
  out.level = std::max(0, k - 1);
  long long top = 1;
  for (int i = 0; i < out.level; ++i) top *= branching;
  for (long long a = top; a >= 1; a /= branching) out.active.push_back(a);
  return out;
}

double working_index(const WorkerTrace& trace, const PhaseWindow& window) {
  if (!(window.span() > 0.0))
    throw Error(ErrorKind::InvalidTrace, "span must be positive");
  std::vector<TraceInterval> iv = trace.intervals;
  std::sort(iv.begin(), iv.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  double busy = 0.0;
  for (std::size_t k = 0; k < iv.size(); ++k) {
    if (!(iv[k].end > iv[k].start))
      throw Error(ErrorKind::InvalidTrace, "worker " + std::to_string(trace.worker) + " has an empty interval");
    if (iv[k].start < window.begin || iv[k].end > window.end)
      throw Error(ErrorKind::InvalidTrace, "worker " + std::to_string(trace.worker) + " interval outside the span");
    if (k > 0 && iv[k].start < iv[k - 1].end)
      throw Error(ErrorKind::InvalidTrace, "worker " + std::to_string(trace.worker) + " has overlapping intervals");
    busy += iv[k].end - iv[k].start;
  }
  return std::min(1.0, busy / window.span());
}

double working_index(const WorkerTrace& trace, double span) { return working_index(trace, PhaseWindow{0.0, span}); }

namespace {

std::vector<int> peak_activity_per_level(const std::vector<WorkerTrace>& traces, const PartitionTree& tree) {
  // Sweep start/end events per depth; ends sort before starts at equal times.
  std::map<int, std::vector<std::pair<double, int>>> events;
  for (const auto& t : traces)
    for (const auto& iv : t.intervals) {
      const int depth = tree.node(iv.task).depth;
      events[depth].emplace_back(iv.start, +1);
      events[depth].emplace_back(iv.end, -1);
    }
  std::vector<int> peak(static_cast<std::size_t>(tree.depth) + 1, 0);
  for (auto& [depth, ev] : events) {
    std::sort(ev.begin(), ev.end());
    int running = 0;
    for (const auto& e : ev) {
      running += e.second;
      peak[static_cast<std::size_t>(depth)] = std::max(peak[static_cast<std::size_t>(depth)], running);
    }
  }
  return peak;
}

}  // namespace

WorkingIndexReport working_index_report(const std::vector<WorkerTrace>& traces, const PhaseWindow& window,
                                        const PartitionTree* tree) {
  WorkingIndexReport r;
  r.span = window.span();
  std::vector<std::pair<double, int>> entries;
  for (const auto& t : traces) entries.emplace_back(working_index(t, window), t.worker);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (const auto& [omega, worker] : entries) {
    r.omegas.push_back(omega);
    r.workers.push_back(worker);
  }
  if (!r.omegas.empty()) {
    r.mean = std::accumulate(r.omegas.begin(), r.omegas.end(), 0.0) / static_cast<double>(r.omegas.size());
    const auto above = std::count_if(r.omegas.begin(), r.omegas.end(), [](double w) { return w > 0.9; });
    r.frac_above_0_9 = static_cast<double>(above) / static_cast<double>(r.omegas.size());
  }
  if (tree) r.level_active = peak_activity_per_level(traces, *tree);
  return r;
}

double busy_time(const std::vector<WorkerTrace>& traces) {
  double total = 0.0;
  for (const auto& t : traces)
    for (const auto& iv : t.intervals) total += iv.end - iv.start;
  return total;
}

MetricsSummary report(const ParallelRun& run, const PartitionTree& tree, std::optional<double> sequential_time) {
  MetricsSummary s;
  s.n_workers = static_cast<int>(run.traces.size());
  s.n_traders = run.n_traders;
  s.condense = working_index_report(run.phase_traces(Phase::Condense), run.condense_window, &tree);
  s.full = working_index_report(run.traces, run.full_window(), &tree);
  if (sequential_time && s.full.span > 0.0) {
    s.speedup = *sequential_time / s.full.span;
    s.efficiency = *s.speedup / s.n_workers;
  }
  return s;
}

std::string step_function_csv(const WorkingIndexReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "worker_id,omega\n";
  for (std::size_t k = 0; k < report.omegas.size(); ++k) out << report.workers[k] << ',' << report.omegas[k] << '\n';
  return out.str();
}

std::string summary_json(const MetricsSummary& s) {
  nlohmann::json j;
  j["mean_omega"] = s.condense.mean;
  j["frac_above_0.9"] = s.condense.frac_above_0_9;
  j["min_omega"] = s.condense.omegas.empty() ? 0.0 : s.condense.omegas.back();
  j["span"] = s.condense.span;
  j["full_solve"] = {{"mean_omega", s.full.mean},
                     {"frac_above_0.9", s.full.frac_above_0_9},
                     {"min_omega", s.full.omegas.empty() ? 0.0 : s.full.omegas.back()},
                     {"span", s.full.span}};
  j["level_active"] = s.condense.level_active;
  j["speedup"] = s.speedup ? nlohmann::json(*s.speedup) : nlohmann::json();
  j["efficiency"] = s.efficiency ? nlohmann::json(*s.efficiency) : nlohmann::json();
  j["n_workers"] = s.n_workers;
  j["n_traders"] = s.n_traders;
  return j.dump(2) + "\n";
}

}  // namespace dissect
