// dissect: generate meshes, solve them sequentially or through the task
// scheduler, re-solve after element changes, verify and report metrics.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dissect/error.hpp"
#include "dissect/io.hpp"
#include "dissect/log.hpp"
#include "dissect/mesh.hpp"
#include "dissect/metrics.hpp"
#include "dissect/scheduler.hpp"
#include "dissect/solver.hpp"
#include "dissect/tree.hpp"

namespace {

using namespace dissect;

struct MeshSource {
  int nx = 4, ny = 4, nz = 4;
  std::vector<double> extents{1.0, 1.0, 1.0};
  int p = 2;
  std::string problem = "trig";
  std::string file;
  CLI::Option* file_opt = nullptr;

  void add(CLI::App& app) {
    auto* gx = app.add_option("--nx", nx, "Elements along x")->check(CLI::PositiveNumber);
    auto* gy = app.add_option("--ny", ny, "Elements along y")->check(CLI::PositiveNumber);
    auto* gz = app.add_option("--nz", nz, "Elements along z")->check(CLI::PositiveNumber);
    auto* ge = app.add_option("--extents", extents, "Domain size Lx,Ly,Lz")->delimiter(',')->expected(3);
    auto* gp = app.add_option("--p", p, "Polynomial degree")->check(CLI::PositiveNumber);
    auto* gc = app.add_option("--case", problem, "Manufactured solution: poly2 | trig");
    file_opt = app.add_option("--mesh", file, "Mesh JSON file instead of a generated grid");
    for (auto* o : {gx, gy, gz, ge, gp, gc}) file_opt->excludes(o);
  }

  bool generated() const { return file_opt == nullptr || file_opt->count() == 0; }

  GridSpec grid() const { return GridSpec{nx, ny, nz, Extents{extents[0], extents[1], extents[2]}, p}; }

  /// Base mesh with loads; the exact solution is known for generated meshes.
  Mesh load(std::optional<ExactSolution>* exact = nullptr) const {
    if (!generated()) return mesh_from_json(read_file(file));
    Mesh mesh = generate_mesh(grid());
    auto sol = manufactured_problem(mesh, parse_case(problem));
    if (exact) *exact = sol;
    return mesh;
  }
};

struct SchedulerFlags {
  std::string mode = "seq";
  int workers = 4;
  int traders = 2;
  double alpha = 2.0;
  double aspect_threshold = 2.0;
  std::vector<double> latency{0.0, 0.0};
  std::string clock = "real";
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    app.add_option("--mode", mode, "seq | par | static-levelcut")
        ->check(CLI::IsMember({"seq", "par", "static-levelcut"}));
    app.add_option("--workers", workers, "Worker count")->check(CLI::PositiveNumber);
    app.add_option("--traders", traders, "Trader count")->check(CLI::PositiveNumber);
    app.add_option("--alpha", alpha, "Trader oversubscription factor")->check(CLI::Range(1.0, 1e9));
    app.add_option("--aspect-threshold", aspect_threshold, "Longest/shortest edge ratio above which boxes are bisected")
        ->check(CLI::Range(1.0, 1e9));
    app.add_option("--latency", latency, "Message delay c0,c1: seconds, seconds per byte")
        ->delimiter(',')
        ->expected(2);
    app.add_option("--clock", clock, "real | sim")->check(CLI::IsMember({"real", "sim"}));
    app.add_option("--seed", seed, "Reserved; every run is deterministic");
  }

  ParallelOptions options() const {
    ParallelOptions o;
    o.workers = workers;
    o.clock = clock == "sim" ? ClockMode::Simulated : ClockMode::Real;
    o.latency = LatencyModel{latency[0], latency[1]};
    return o;
  }
};

std::vector<Modification> parse_modifications(const std::string& text) {
  std::vector<Modification> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "modification '" + item + "' is not of the form id:factor");
    try {
      std::size_t used = 0;
      Modification m;
      m.element = std::stoi(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("id");
      const std::string factor = item.substr(colon + 1);
      m.factor = std::stod(factor, &used);
      if (used != factor.size()) throw std::invalid_argument("factor");
      out.push_back(m);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidArgument, "modification '" + item + "' is not of the form id:factor");
    }
  }
  return out;
}

void write_cache(const std::string& path, const RecordCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  write_record_cache(out, cache);
}

RecordCache read_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + path);
  return read_record_cache(in);
}

double max_relative_difference(const Solution& a, const Solution& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
    scale = std::max(scale, std::abs(b.values[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

double relative_residual(const Mesh& mesh, const Solution& u) {
  const auto [K, d] = assemble_global(mesh);
  double r2 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double ri = dot(K.row(i), u.values) - d[i];
    r2 += ri * ri;
    d2 += d[i] * d[i];
  }
  return d2 > 0.0 ? std::sqrt(r2 / d2) : std::sqrt(r2);
}

int cmd_mesh(const MeshSource& src, const std::string& out) {
  const Mesh mesh = src.load();
  write_file(out, mesh_to_json(mesh));
  std::cout << "elements " << mesh.elements.size() << " dofs " << mesh.n_dofs << "\n";
  return 0;
}

struct SolveOutputs {
  std::string solution, records, trace, tree;
};

int cmd_solve(const MeshSource& src, const SchedulerFlags& flags, const SolveOutputs& out) {
  const Mesh mesh = src.load();
  const PartitionTree tree = build_partition(mesh, flags.aspect_threshold);
  const auto t0 = std::chrono::steady_clock::now();
  Solution solution;
  FactorStore store;
  std::optional<ParallelRun> run;
  std::optional<TraderAssignment> assignment;
  if (flags.mode == "seq") {
    auto r = solve_sequential(tree, mesh);
    solution = std::move(r.solution);
    store = std::move(r.store);
  } else if (flags.mode == "par") {
    assignment = partition_tasks(tree, flags.traders, flags.alpha);
    run = run_parallel(tree, mesh, *assignment, flags.options());
  } else {
    run = run_static_levelcut(tree, &mesh, flags.options());
  }
  if (run) {
    solution = run->solution;
    store = run->store;
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out.solution.empty()) write_file(out.solution, solution_to_csv(solution));
  if (!out.records.empty()) write_cache(out.records, RecordCache{mesh_fingerprint(mesh), flags.aspect_threshold, {}, store});
  if (!out.tree.empty()) write_file(out.tree, tree_to_json(tree, assignment ? &*assignment : nullptr));
  if (!out.trace.empty()) {
    if (!run) throw Error(ErrorKind::InvalidArgument, "--trace needs --mode par or static-levelcut");
    write_file(out.trace, traces_to_csv(run->traces));
  }
  std::cout << "mode " << flags.mode << " dofs " << mesh.n_dofs << " nodes " << tree.size() << " depth "
            << tree.depth << " time " << elapsed << "\n";
  if (run) std::cout << "span " << run->full_window().span() << " tasks " << 2 * tree.size() << "\n";
  return 0;
}

int cmd_resolve(const MeshSource& src, const std::string& records, const std::string& records_out,
                const std::string& modify, const std::string& solution_out) {
  Mesh mesh = src.load();
  RecordCache cache = read_cache(records);
  if (cache.fingerprint != mesh_fingerprint(mesh))
    throw Error(ErrorKind::Inconsistency, "record cache " + records + " was written for a different mesh");
  const PartitionTree tree = build_partition(mesh, cache.aspect_threshold);
  if (cache.store.size() != tree.size())
    throw Error(ErrorKind::Inconsistency, "record cache does not match the partition tree");
  for (const Modification& m : cache.applied) scale_element(mesh, m.element, m.factor);
  const auto mods = parse_modifications(modify);
  const IncrementalResult r = incremental_resolve(tree, mesh, cache.store, mods);
  cache.applied.insert(cache.applied.end(), mods.begin(), mods.end());
  std::cout << "recompute_count " << r.recompute_count << "\n";
  if (!solution_out.empty()) write_file(solution_out, solution_to_csv(r.solution));
  if (!records_out.empty()) write_cache(records_out, cache);
  return 0;
}

int cmd_verify(const MeshSource& src, double aspect_threshold) {
  std::optional<ExactSolution> exact;
  const Mesh mesh = src.load(&exact);
  const PartitionTree tree = build_partition(mesh, aspect_threshold);
  const Solution nd = solve_sequential(tree, mesh).solution;
  const Solution dense = dense_reference_solve(mesh);
  const double err = max_relative_difference(nd, dense);
  const double res = relative_residual(mesh, nd);
  std::cout << "dofs " << mesh.n_dofs << " max_rel_error " << err << " residual " << res << "\n";
  if (exact) std::cout << "l2_error " << l2_error(mesh, nd.values, *exact) << "\n";
  if (err > 1e-8 || res > 1e-8) {
    std::cerr << "dissect: verification failed\n";
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& trace_path, int n_traders, std::optional<double> seq_time,
               const std::string& csv_out, const std::string& json_out) {
  const auto traces = traces_from_csv(read_file(trace_path));
  // Phase windows from the first start to the last end in the trace.
  PhaseWindow cond{INFINITY, -INFINITY}, full{INFINITY, -INFINITY};
  std::vector<WorkerTrace> cond_traces;
  for (const auto& t : traces) {
    WorkerTrace c{t.worker, {}};
    for (const auto& iv : t.intervals) {
      full.begin = std::min(full.begin, iv.start);
      full.end = std::max(full.end, iv.end);
      if (iv.phase != Phase::Condense) continue;
      c.intervals.push_back(iv);
      cond.begin = std::min(cond.begin, iv.start);
      cond.end = std::max(cond.end, iv.end);
    }
    cond_traces.push_back(std::move(c));
  }
  if (!(cond.span() > 0.0)) throw Error(ErrorKind::InvalidTrace, "trace holds no condensation interval");
  MetricsSummary s;
  s.n_workers = static_cast<int>(traces.size());
  s.n_traders = n_traders;
  s.condense = working_index_report(cond_traces, cond);
  s.full = working_index_report(traces, full);
  if (seq_time) {
    s.speedup = *seq_time / full.span();
    s.efficiency = *s.speedup / s.n_workers;
  }
  if (!csv_out.empty()) write_file(csv_out, step_function_csv(s.condense));
  const std::string summary = summary_json(s);
  if (!json_out.empty()) write_file(json_out, summary);
  std::cout << summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested-dissection solver with a master/trader/worker scheduler"};
  app.require_subcommand(1);

  MeshSource mesh_src, solve_src, resolve_src, verify_src;
  SchedulerFlags solve_flags;
  std::string mesh_out = "mesh.json";
  SolveOutputs solve_out;
  std::string records, records_out, modify, resolve_out;
  std::string trace_in, csv_out, json_out;
  int report_traders = 0;
  std::optional<double> seq_time;

  auto* mesh_cmd = app.add_subcommand("mesh", "Write a generated mesh as JSON");
  mesh_src.add(*mesh_cmd);
  mesh_cmd->add_option("--out", mesh_out, "Mesh JSON path");

  auto* solve_cmd = app.add_subcommand("solve", "Solve and write the solution, records and trace");
  solve_src.add(*solve_cmd);
  solve_flags.add(*solve_cmd);
  solve_cmd->add_option("--out", solve_out.solution, "Solution CSV path");
  solve_cmd->add_option("--records", solve_out.records, "Record cache path");
  solve_cmd->add_option("--trace", solve_out.trace, "Trace CSV path (par and static-levelcut)");
  solve_cmd->add_option("--tree", solve_out.tree, "Tree dump JSON path");

  auto* resolve_cmd = app.add_subcommand("resolve", "Re-solve from a record cache after scaling elements");
  resolve_src.add(*resolve_cmd);
  resolve_cmd->add_option("--records", records, "Record cache written by solve")->required();
  resolve_cmd->add_option("--records-out", records_out, "Updated record cache path");
  resolve_cmd->add_option("--modify", modify, "Element scalings id:factor,...");
  resolve_cmd->add_option("--out", resolve_out, "Solution CSV path");

  auto* verify_cmd = app.add_subcommand("verify", "Compare against the dense reference solve");
  verify_src.add(*verify_cmd);
  double verify_threshold = 2.0;
  verify_cmd->add_option("--aspect-threshold", verify_threshold, "Tree bisection threshold")
      ->check(CLI::Range(1.0, 1e9));

  auto* report_cmd = app.add_subcommand("report", "Working indices from a trace CSV");
  report_cmd->add_option("--trace", trace_in, "Trace CSV")->required();
  report_cmd->add_option("--traders", report_traders, "Trader count of the traced run");
  report_cmd->add_option("--seq-time", seq_time, "Sequential time for speedup and efficiency");
  report_cmd->add_option("--out", csv_out, "Step-function CSV path (worker_id,omega)");
  report_cmd->add_option("--summary", json_out, "Summary JSON path");

  CLI11_PARSE(app, argc, argv);
  logger();

  try {
    if (mesh_cmd->parsed()) return cmd_mesh(mesh_src, mesh_out);
    if (solve_cmd->parsed()) return cmd_solve(solve_src, solve_flags, solve_out);
    if (resolve_cmd->parsed()) return cmd_resolve(resolve_src, records, records_out, modify, resolve_out);
    if (verify_cmd->parsed()) return cmd_verify(verify_src, verify_threshold);
    if (report_cmd->parsed()) return cmd_report(trace_in, report_traders, seq_time, csv_out, json_out);
  } catch (const Error& e) {
    std::cerr << "dissect: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dissect: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
