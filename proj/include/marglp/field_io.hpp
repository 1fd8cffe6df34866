#pragma once

#include <string>

#include "marglp/grid.hpp"

// Field/marginal file I/O. A field is stored as a JSON header naming the
// axes, quadrature scheme, tensor order, and a payload file that holds the
// values either as CSV (one float per line) or raw little-endian float64.
// Exact layout: docs/formats.md.

namespace marglp {

enum class PayloadEncoding { Csv, F64le };

/// Writes `<path>` (JSON header) and the payload file next to it, named after
/// the header with the payload extension. Returns the payload filename.
std::string write_field(const ScalarField& f, const std::string& path,
                        PayloadEncoding enc = PayloadEncoding::Csv);

/// Reads a field written by write_field. Axis nodes are rebuilt from the
/// header, so only uniform-node grids round-trip (the only kind build_axis
/// makes).
ScalarField read_field(const std::string& path);

/// Marginal sets are small 1D arrays and are stored inline in one JSON file.
void write_marginals(const MarginalSet& m, const GridSpec& grid, const std::string& path);
MarginalSet read_marginals(const std::string& path, const GridSpec& grid);

}  // namespace marglp
