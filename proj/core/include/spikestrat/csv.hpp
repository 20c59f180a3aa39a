#pragma once

#include <string>

#include "spikestrat/dataset.hpp"

namespace spikestrat {

// Dataset CSV schema: header `id,source,w,y,x1,...,xd` followed by any of
// the optional columns `yt,yc,e,prog`, always in that order. A present
// optional column may hold empty cells for subjects lacking the field.
// Floats are written in shortest round-trip form, so write/read is lossless.
dataset read_dataset(const std::string& path);
void write_dataset(const dataset& data, const std::string& path);

// Shortest round-trip decimal rendering shared by all CSV/table writers.
std::string format_double(double v);

}  // namespace spikestrat
