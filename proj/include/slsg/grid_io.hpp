#pragma once

#include <iosfwd>
#include <string>

#include "slsg/grid.hpp"

namespace slsg {

/// Record stream: d, boundary mode (0 exact, 1 modified), p, N, node count, then per node
/// levels[d], indices[d], surplus. Binary form is little-endian (int32 header fields, uint64
/// count, int32 levels/indices, float64 surplus); text form puts the header on the first line
/// and one node per line. Reading rebuilds nodal values by dehierarchization.
void write_grid_binary(const AdaptiveSparseGrid& grid, std::ostream& out);
AdaptiveSparseGrid read_grid_binary(std::istream& in);
void write_grid_text(const AdaptiveSparseGrid& grid, std::ostream& out);
AdaptiveSparseGrid read_grid_text(std::istream& in);

/// File helpers; the format is chosen by extension (".txt" is text, anything else binary).
void save_grid(const AdaptiveSparseGrid& grid, const std::string& path);
AdaptiveSparseGrid load_grid(const std::string& path);

}  // namespace slsg
