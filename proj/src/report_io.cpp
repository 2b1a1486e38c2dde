#include "avem/report_io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace avem {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

void check_written(std::ostream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

template <class T>
T parse_field(const std::string& s, int line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("csv line " + std::to_string(line) + ": cannot parse '" + s + "'");
  return v;
}

void write_row(std::ostream& os, const IterationRecord& r) {
  os << r.iter << ',' << r.ndofs << ',' << r.n_cells << ',' << format_double(r.h1err) << ','
     << format_double(r.eta) << ',' << format_double(r.stab) << ',' << r.lambda_max << ','
     << r.n_marked << ',' << r.n_refined << ',' << r.cg_iters << '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& os, std::span<const IterationRecord> records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) write_row(os, r);
}

void write_csv(const std::filesystem::path& path, std::span<const IterationRecord> records) {
  auto os = open_out(path);
  write_csv(os, records);
  check_written(os, path);
}

std::vector<IterationRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw std::runtime_error("csv: unexpected header");
  std::vector<IterationRecord> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected 10 fields");
    IterationRecord r;
    r.iter = parse_field<int>(f[0], lineno);
    r.ndofs = parse_field<std::size_t>(f[1], lineno);
    r.n_cells = parse_field<std::size_t>(f[2], lineno);
    r.h1err = parse_field<double>(f[3], lineno);
    r.eta = parse_field<double>(f[4], lineno);
    r.stab = parse_field<double>(f[5], lineno);
    r.lambda_max = parse_field<int>(f[6], lineno);
    r.n_marked = parse_field<std::size_t>(f[7], lineno);
    r.n_refined = parse_field<std::size_t>(f[8], lineno);
    r.cg_iters = parse_field<int>(f[9], lineno);
    out.push_back(r);
  }
  return out;
}

std::vector<IterationRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_csv(is);
}

void write_joined_csv(const std::filesystem::path& path,
                      std::span<const std::pair<std::string, std::vector<IterationRecord>>> runs) {
  auto os = open_out(path);
  os << "method," << kCsvHeader << '\n';
  for (const auto& [name, records] : runs)
    for (const auto& r : records) {
      os << name << ',';
      write_row(os, r);
    }
  check_written(os, path);
}

void write_vtk(std::ostream& os, const MeshForest& mesh, std::span<const TetId> leaves,
               std::span<const double> solution, std::span<const double> eta2_local) {
  if (eta2_local.size() != leaves.size()) throw std::invalid_argument("write_vtk: one indicator per leaf expected");
  if (solution.size() != mesh.nodes().size()) throw std::invalid_argument("write_vtk: one value per node expected");
  // Only nodes used as leaf vertices are written.
  std::unordered_map<NodeId, int> point_index;
  std::vector<NodeId> points;
  for (TetId t : leaves)
    for (NodeId v : mesh.tet(t).vertices)
      if (point_index.emplace(v, static_cast<int>(points.size())).second) points.push_back(v);

  os << "# vtk DataFile Version 3.0\navem solution\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << points.size() << " double\n";
  for (NodeId v : points) {
    const Vec3& x = mesh.node(v).coords;
    os << format_double(x(0)) << ' ' << format_double(x(1)) << ' ' << format_double(x(2)) << '\n';
  }
  os << "CELLS " << leaves.size() << ' ' << 5 * leaves.size() << '\n';
  for (TetId t : leaves) {
    os << 4;
    for (NodeId v : mesh.tet(t).vertices) os << ' ' << point_index.at(v);
    os << '\n';
  }
  os << "CELL_TYPES " << leaves.size() << '\n';
  for (std::size_t i = 0; i < leaves.size(); ++i) os << "10\n";

  os << "POINT_DATA " << points.size() << "\nSCALARS solution double 1\nLOOKUP_TABLE default\n";
  for (NodeId v : points) os << format_double(solution[static_cast<std::size_t>(v)]) << '\n';

  os << "CELL_DATA " << leaves.size() << "\nSCALARS eta2 double 1\nLOOKUP_TABLE default\n";
  for (double e : eta2_local) os << format_double(e) << '\n';
  os << "SCALARS lambda_max int 1\nLOOKUP_TABLE default\n";
  for (TetId t : leaves) {
    int lam = 0;
    for (NodeId v : mesh.tet(t).vertices) lam = std::max(lam, mesh.node(v).lambda);
    os << lam << '\n';
  }
}

void write_vtk(const std::filesystem::path& path, const MeshForest& mesh, std::span<const TetId> leaves,
               std::span<const double> solution, std::span<const double> eta2_local) {
  auto os = open_out(path);
  write_vtk(os, mesh, leaves, solution, eta2_local);
  check_written(os, path);
}

}  // namespace avem
