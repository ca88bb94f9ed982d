#include "slsg/grid_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "slsg/basis.hpp"

namespace slsg {

namespace {

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "binary grid format assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw Error("truncated grid stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

AdaptiveSparseGrid make_header(int d, int mode, int p, int n) {
  if (mode != 0 && mode != 1) throw Error("bad boundary mode in grid stream");
  return AdaptiveSparseGrid(d, mode == 0 ? BoundaryMode::exact : BoundaryMode::modified, p, n);
}

void finish(AdaptiveSparseGrid& grid) {
  grid.relink();
  if (!grid.father_closed()) throw Error("grid stream is not father-closed");
  dehierarchize(grid);
}

}  // namespace

void write_grid_binary(const AdaptiveSparseGrid& grid, std::ostream& out) {
  const int d = grid.dimension();
  put<std::int32_t>(out, d);
  put<std::int32_t>(out, grid.boundary_mode() == BoundaryMode::exact ? 0 : 1);
  put<std::int32_t>(out, grid.basis_order());
  put<std::int32_t>(out, grid.max_level());
  put<std::uint64_t>(out, grid.size());
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) {
    for (int j = 0; j < d; ++j) put<std::int32_t>(out, grid.level(id, j));
    for (int j = 0; j < d; ++j) put<std::int32_t>(out, grid.index(id, j));
    put<double>(out, grid.surpluses()[id]);
  }
  if (!out) throw Error("failed writing grid stream");
}

AdaptiveSparseGrid read_grid_binary(std::istream& in) {
  const int d = get<std::int32_t>(in);
  const int mode = get<std::int32_t>(in);
  const int p = get<std::int32_t>(in);
  const int n = get<std::int32_t>(in);
  const auto count = get<std::uint64_t>(in);
  AdaptiveSparseGrid grid = make_header(d, mode, p, n);
  MultiLevel l(d);
  MultiIndex i(d);
  for (std::uint64_t k = 0; k < count; ++k) {
    for (int j = 0; j < d; ++j) l[j] = get<std::int32_t>(in);
    for (int j = 0; j < d; ++j) i[j] = get<std::int32_t>(in);
    const NodeId id = grid.insert(l, i);
    grid.surpluses()[id] = get<double>(in);
  }
  finish(grid);
  return grid;
}

void write_grid_text(const AdaptiveSparseGrid& grid, std::ostream& out) {
  const int d = grid.dimension();
  out << d << ' ' << (grid.boundary_mode() == BoundaryMode::exact ? 0 : 1) << ' ' << grid.basis_order() << ' '
      << grid.max_level() << ' ' << grid.size() << '\n';
  out << std::setprecision(17);
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) {
    for (int j = 0; j < d; ++j) out << grid.level(id, j) << ' ';
    for (int j = 0; j < d; ++j) out << grid.index(id, j) << ' ';
    out << grid.surpluses()[id] << '\n';
  }
  if (!out) throw Error("failed writing grid stream");
}

AdaptiveSparseGrid read_grid_text(std::istream& in) {
  int d, mode, p, n;
  std::uint64_t count;
  if (!(in >> d >> mode >> p >> n >> count)) throw Error("bad grid text header");
  AdaptiveSparseGrid grid = make_header(d, mode, p, n);
  MultiLevel l(d);
  MultiIndex i(d);
  for (std::uint64_t k = 0; k < count; ++k) {
    for (int j = 0; j < d; ++j) in >> l[j];
    for (int j = 0; j < d; ++j) in >> i[j];
    double s;
    in >> s;
    if (!in) throw Error("truncated grid text at node " + std::to_string(k));
    const NodeId id = grid.insert(l, i);
    grid.surpluses()[id] = s;
  }
  finish(grid);
  return grid;
}

namespace {
bool is_text(const std::string& path) { return path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0; }
}  // namespace

void save_grid(const AdaptiveSparseGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  if (is_text(path))
    write_grid_text(grid, out);
  else
    write_grid_binary(grid, out);
}

AdaptiveSparseGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return is_text(path) ? read_grid_text(in) : read_grid_binary(in);
}

}  // namespace slsg
