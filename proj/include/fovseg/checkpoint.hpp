// SPDX-License-Identifier: Apache-2.0
//
// Parameter checkpoint file. Layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "FOVSEGCK"
//   8       4     u32 format version (currently 1)
//   12      4     u32 parameter count N
//   then N records:
//           4     u32 name length L
//           L     name bytes (UTF-8, no terminator)
//           4     u32 ndim
//           4*nd  u32 dims
//           8*n   f64 values, row-major, IEEE-754 little-endian
//
// Buffers (running statistics) are stored like any other parameter.

#pragma once

#include <string>
#include <vector>

#include "fovseg/optim.hpp"

namespace fovseg {

void save_checkpoint(const std::string& path, const ParamSet& params);
// Several sets (disjoint name prefixes) in one file.
void save_checkpoint(const std::string& path, const std::vector<const ParamSet*>& sets);

// Loads values into an already-built ParamSet; every file entry must match an
// existing parameter by name and shape, and every parameter must be present.
void load_checkpoint(const std::string& path, ParamSet& params);
void load_checkpoint(const std::string& path, const std::vector<ParamSet*>& sets);

}  // namespace fovseg
