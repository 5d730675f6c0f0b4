#include "dissect/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "dissect/error.hpp"
#include "json.hpp"

namespace dissect {

namespace {

using nlohmann::json;

[[noreturn]] void format_error(const std::string& what) { throw Error(ErrorKind::Format, what); }

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) format_error(where + ": missing field '" + key + "'");
  return obj.at(key);
}

template <class T>
T as(const json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    format_error(where + ": " + e.what());
  }
}

std::string print_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Line-oriented CSV reader that remembers the byte offset of each line.
class CsvLines {
 public:
  explicit CsvLines(std::string_view text) : text_(text) {}

  bool next(std::vector<std::string_view>& cells) {
    while (pos_ < text_.size()) {
      line_start_ = pos_;
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) continue;
      cells.clear();
      std::size_t a = 0;
      while (true) {
        const std::size_t b = line.find(',', a);
        cells.push_back(line.substr(a, b == std::string_view::npos ? std::string_view::npos : b - a));
        if (b == std::string_view::npos) break;
        a = b + 1;
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    format_error("byte " + std::to_string(line_start_) + ": " + what);
  }

  template <class T>
  T number(std::string_view cell) const {
    T v{};
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      fail("cannot parse '" + std::string(cell) + "' as a number");
    return v;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

// Binary helpers for the record cache (little-endian hosts only).
static_assert(std::endian::native == std::endian::little, "record cache assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <class T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class T>
  void vec(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void matrix(const Matrix& m) {
    pod<std::uint64_t>(m.rows());
    pod<std::uint64_t>(m.cols());
    const auto d = m.data();
    out_.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::string buf) : buf_(std::move(buf)) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  template <class T>
  std::vector<T> vec() {
    const auto n = count(sizeof(T));
    std::vector<T> v(n);
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return v;
  }
  Matrix matrix() {
    const std::size_t at = pos_;
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (cols != 0 && rows > (buf_.size() - pos_) / sizeof(double) / cols)
      format_error("byte " + std::to_string(at) + ": matrix dimensions exceed the file size");
    Matrix m(rows, cols);
    const auto d = m.data();
    need(d.size() * sizeof(double));
    std::memcpy(d.data(), buf_.data() + pos_, d.size() * sizeof(double));
    pos_ += d.size() * sizeof(double);
    return m;
  }
  void bytes(std::string_view expected, const char* what) {
    need(expected.size());
    if (std::string_view(buf_).substr(pos_, expected.size()) != expected)
      format_error("byte " + std::to_string(pos_) + ": " + what);
    pos_ += expected.size();
  }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > buf_.size() - pos_) format_error("byte " + std::to_string(pos_) + ": record cache is truncated");
  }
  std::size_t count(std::size_t elem) {
    const std::size_t at = pos_;
    const auto n = pod<std::uint64_t>();
    if (n > (buf_.size() - pos_) / elem)
      format_error("byte " + std::to_string(at) + ": length " + std::to_string(n) + " exceeds the file size");
    return static_cast<std::size_t>(n);
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic{"DSCTREC\0", 8};

class Fnv {
 public:
  void add(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void add(const T& v) {
    add(&v, sizeof v);
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string mesh_to_json(const Mesh& mesh) {
  json j;
  j["n_dofs"] = mesh.n_dofs;
  j["degree"] = mesh.degree;
  j["cells"] = mesh.cells;
  j["extents"] = {mesh.extents.lx, mesh.extents.ly, mesh.extents.lz};
  json elements = json::array();
  for (const Element& el : mesh.elements) {
    json e;
    e["id"] = el.id;
    e["dofs"] = el.dof_ids;
    std::vector<double> lower;
    lower.reserve(el.size() * (el.size() + 1) / 2);
    for (std::size_t r = 0; r < el.size(); ++r)
      for (std::size_t c = 0; c <= r; ++c) lower.push_back(el.stiffness(r, c));
    e["k_lower"] = std::move(lower);
    e["f"] = el.load;
    e["degree"] = el.degree;
    e["modes"] = el.local_modes;
    e["corners"] = el.corners;
    elements.push_back(std::move(e));
  }
  j["elements"] = std::move(elements);
  return j.dump() + "\n";
}

Mesh mesh_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    format_error("byte " + std::to_string(e.byte) + ": " + e.what());
  }
  Mesh mesh;
  mesh.n_dofs = as<int>(field(j, "n_dofs", "mesh"), "mesh.n_dofs");
  if (mesh.n_dofs < 0) format_error("mesh.n_dofs: must be non-negative");
  if (j.contains("degree")) mesh.degree = as<int>(j["degree"], "mesh.degree");
  if (j.contains("cells")) mesh.cells = as<std::array<int, 3>>(j["cells"], "mesh.cells");
  if (j.contains("extents")) {
    const auto e = as<std::array<double, 3>>(j["extents"], "mesh.extents");
    mesh.extents = Extents{e[0], e[1], e[2]};
  }
  const json& elements = field(j, "elements", "mesh");
  if (!elements.is_array()) format_error("mesh.elements: expected an array");
  std::set<ElementId> ids;
  std::vector<char> used(static_cast<std::size_t>(mesh.n_dofs), 0);
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const json& e = elements[k];
    const std::string where = "mesh.elements[" + std::to_string(k) + "]";
    Element el;
    el.id = as<ElementId>(field(e, "id", where), where + ".id");
    if (!ids.insert(el.id).second) format_error(where + ": duplicate element id " + std::to_string(el.id));
    el.dof_ids = as<std::vector<DofId>>(field(e, "dofs", where), where + ".dofs");
    const auto lower = as<std::vector<double>>(field(e, "k_lower", where), where + ".k_lower");
    el.load = as<std::vector<double>>(field(e, "f", where), where + ".f");
    const std::size_t m = el.dof_ids.size();
    if (lower.size() != m * (m + 1) / 2)
      format_error(where + ".k_lower: expected " + std::to_string(m * (m + 1) / 2) + " entries, got " +
                   std::to_string(lower.size()));
    if (el.load.size() != m) format_error(where + ".f: expected " + std::to_string(m) + " entries");
    for (DofId d : el.dof_ids) {
      if (d < 0 || d >= mesh.n_dofs) format_error(where + ".dofs: id " + std::to_string(d) + " out of range");
      used[static_cast<std::size_t>(d)] = 1;
    }
    el.stiffness = Matrix::square(m);
    std::size_t at = 0;
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c <= r; ++c) {
        el.stiffness(r, c) = lower[at];
        el.stiffness(c, r) = lower[at++];
      }
    if (e.contains("degree")) el.degree = as<int>(e["degree"], where + ".degree");
    if (e.contains("modes")) {
      el.local_modes = as<std::vector<int>>(e["modes"], where + ".modes");
      if (el.local_modes.size() != m) format_error(where + ".modes: expected " + std::to_string(m) + " entries");
    }
    if (e.contains("corners")) el.corners = as<std::array<Point, 8>>(e["corners"], where + ".corners");
    mesh.elements.push_back(std::move(el));
  }
  for (std::size_t d = 0; d < used.size(); ++d)
    if (!used[d]) format_error("mesh: DOF " + std::to_string(d) + " is not referenced by any element");
  return mesh;
}

std::string tree_to_json(const PartitionTree& tree, const TraderAssignment* assignment) {
  json nodes = json::array();
  for (const TreeNode& n : tree.nodes) {
    json o;
    o["id"] = n.id;
    o["parent"] = n.parent;
    o["depth"] = n.depth;
    o["bbox"] = {{"lo", n.bbox.lo}, {"hi", n.bbox.hi}};
    o["children"] = n.children;
    o["element"] = n.element ? json(*n.element) : json();
    o["n_eliminated"] = n.eliminated_dofs.size();
    o["n_interface"] = n.interface_dofs.size();
    o["workload"] = n.workload;
    if (assignment) o["owner"] = assignment->owner.at(static_cast<std::size_t>(n.id));
    nodes.push_back(std::move(o));
  }
  json j;
  j["root"] = tree.root;
  j["depth"] = tree.depth;
  j["n_leaf_elements"] = tree.n_leaf_elements;
  j["nodes"] = std::move(nodes);
  return j.dump(1) + "\n";
}

std::string solution_to_csv(const Solution& solution) {
  std::string out = "dof_id,value\n";
  for (std::size_t d = 0; d < solution.values.size(); ++d)
    out += std::to_string(d) + "," + print_double(solution.values[d]) + "\n";
  return out;
}

Solution solution_from_csv(std::string_view text) {
  CsvLines lines(text);
  std::vector<std::string_view> cells;
  Solution sol;
  bool header = true;
  while (lines.next(cells)) {
    if (cells.size() != 2) lines.fail("expected 2 columns");
    if (header) {
      header = false;
      if (cells[0] == "dof_id") continue;
    }
    const auto d = lines.number<long>(cells[0]);
    if (d != static_cast<long>(sol.values.size())) lines.fail("DOF ids must be consecutive from 0");
    sol.values.push_back(lines.number<double>(cells[1]));
  }
  return sol;
}

std::string traces_to_csv(const std::vector<WorkerTrace>& traces) {
  std::string out = "worker_id,task_id,start,end\n";
  for (const auto& t : traces)
    for (const auto& iv : t.intervals)
      out += std::to_string(t.worker) + "," + to_string(TaskKey{iv.task, iv.phase}) + "," + print_double(iv.start) +
             "," + print_double(iv.end) + "\n";
  return out;
}

std::vector<WorkerTrace> traces_from_csv(std::string_view text) {
  CsvLines lines(text);
  std::vector<std::string_view> cells;
  std::vector<WorkerTrace> traces;
  bool header = true;
  while (lines.next(cells)) {
    if (cells.size() != 4) lines.fail("expected 4 columns");
    if (header) {
      header = false;
      if (cells[0] == "worker_id") continue;
    }
    const int worker = lines.number<int>(cells[0]);
    if (worker < 0) lines.fail("negative worker id");
    std::string_view task = cells[1];
    if (task.size() < 2 || (task[0] != 'C' && task[0] != 'B')) lines.fail("task id must be C<node> or B<node>");
    TraceInterval iv;
    iv.phase = task[0] == 'C' ? Phase::Condense : Phase::BackSubstitute;
    iv.task = lines.number<NodeId>(task.substr(1));
    iv.start = lines.number<double>(cells[2]);
    iv.end = lines.number<double>(cells[3]);
    while (traces.size() <= static_cast<std::size_t>(worker))
      traces.push_back(WorkerTrace{static_cast<int>(traces.size()), {}});
    traces[static_cast<std::size_t>(worker)].intervals.push_back(iv);
  }
  return traces;
}

std::uint64_t mesh_fingerprint(const Mesh& mesh) {
  Fnv h;
  h.add(mesh.n_dofs);
  for (const Element& el : mesh.elements) {
    h.add(el.id);
    h.add(el.dof_ids.data(), el.dof_ids.size() * sizeof(DofId));
    const auto k = el.stiffness.data();
    h.add(k.data(), k.size() * sizeof(double));
    h.add(el.load.data(), el.load.size() * sizeof(double));
  }
  return h.value();
}

void write_record_cache(std::ostream& out, const RecordCache& cache) {
  Writer w(out);
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  w.pod(kRecordCacheVersion);
  w.pod(cache.fingerprint);
  w.pod(cache.aspect_threshold);
  w.pod<std::uint64_t>(cache.applied.size());
  for (const Modification& m : cache.applied) {
    w.pod<std::int32_t>(m.element);
    w.pod(m.factor);
  }
  w.pod<std::uint64_t>(cache.store.size());
  for (const Condensed& c : cache.store) {
    w.pod<std::int32_t>(c.schur.source);
    w.vec(c.schur.dofs);
    w.matrix(c.schur.S);
    w.vec(c.schur.g);
    w.pod<std::int32_t>(c.record.node);
    w.vec(c.record.eliminated);
    w.vec(c.record.interface);
    w.matrix(c.record.factor);
    w.matrix(c.record.coupling);
    w.vec(c.record.rhs);
  }
  if (!out) format_error("failed to write the record cache");
}

RecordCache read_record_cache(std::istream& in) {
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  r.bytes(kMagic, "not a record cache (bad magic)");
  const std::size_t version_at = r.offset();
  const auto version = r.pod<std::uint32_t>();
  if (version != kRecordCacheVersion)
    format_error("byte " + std::to_string(version_at) + ": unsupported record cache version " +
                 std::to_string(version));
  RecordCache cache;
  cache.fingerprint = r.pod<std::uint64_t>();
  cache.aspect_threshold = r.pod<double>();
  const auto n_applied = r.pod<std::uint64_t>();
  for (std::uint64_t k = 0; k < n_applied; ++k) {
    Modification m;
    m.element = r.pod<std::int32_t>();
    m.factor = r.pod<double>();
    cache.applied.push_back(m);
  }
  const auto n_nodes = r.pod<std::uint64_t>();
  for (std::uint64_t k = 0; k < n_nodes; ++k) {
    Condensed c;
    c.schur.source = r.pod<std::int32_t>();
    c.schur.dofs = r.vec<DofId>();
    c.schur.S = r.matrix();
    c.schur.g = r.vec<double>();
    c.record.node = r.pod<std::int32_t>();
    c.record.eliminated = r.vec<DofId>();
    c.record.interface = r.vec<DofId>();
    c.record.factor = r.matrix();
    c.record.coupling = r.matrix();
    c.record.rhs = r.vec<double>();
    cache.store.push_back(std::move(c));
  }
  if (!r.at_end()) format_error("byte " + std::to_string(r.offset()) + ": trailing data after the record cache");
  return cache;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::InvalidArgument, "failed writing " + path);
}

}  // namespace dissect
