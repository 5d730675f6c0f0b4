#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dissect/mesh.hpp"
#include "dissect/scheduler.hpp"
#include "dissect/solver.hpp"
#include "dissect/tree.hpp"

namespace dissect {

/// Mesh file: {"n_dofs", "elements": [{"id", "dofs", "k_lower", "f"}]} with
/// k_lower the row-major lower triangle. Generated meshes also carry
/// "corners", "degree", "modes" per element and "extents", "cells",
/// "degree" at the top level. Corners are required to build a tree.
std::string mesh_to_json(const Mesh& mesh);
/// Throws a format error naming the byte offset for malformed JSON and the
/// offending field for structural problems.
Mesh mesh_from_json(std::string_view text);

std::string tree_to_json(const PartitionTree& tree, const TraderAssignment* assignment = nullptr);

/// `dof_id,value` rows, values printed with round-trip precision.
std::string solution_to_csv(const Solution& solution);
Solution solution_from_csv(std::string_view text);

/// `worker_id,task_id,start,end` rows; task ids are "C<node>" for
/// condensation and "B<node>" for back substitution.
std::string traces_to_csv(const std::vector<WorkerTrace>& traces);
std::vector<WorkerTrace> traces_from_csv(std::string_view text);

/// 64-bit FNV-1a digest of the DOF topology, matrices and loads.
std::uint64_t mesh_fingerprint(const Mesh& mesh);

/// Contents of a record cache: the factors of a finished solve together with
/// what is needed to rebuild the same tree and modified mesh.
struct RecordCache {
  std::uint64_t fingerprint = 0;       // of the unmodified mesh
  double aspect_threshold = 2.0;
  std::vector<Modification> applied;   // scalings already in `store`, in order
  FactorStore store;
};

inline constexpr std::uint32_t kRecordCacheVersion = 1;

void write_record_cache(std::ostream& out, const RecordCache& cache);
RecordCache read_record_cache(std::istream& in);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace dissect
