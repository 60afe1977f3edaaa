// Copyright 2026 The QECD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qecd/code/layout.h"

#include "qecd/util/errors.h"

namespace qecd {

std::string basis_name(Basis b) { return b == Basis::kX ? "X" : "Z"; }

Basis parse_basis(const std::string& s) {
  if (s == "X" || s == "x") return Basis::kX;
  if (s == "Z" || s == "z") return Basis::kZ;
  throw ParameterError("basis must be X or Z, got '" + s + "'");
}

std::vector<std::size_t> CodeLayout::logical_support(Basis basis) const {
  std::vector<std::size_t> out;
  for (int k = 0; k < d; ++k) {
    out.push_back(basis == Basis::kZ ? static_cast<std::size_t>(k * d)
                                     : static_cast<std::size_t>(k));
  }
  return out;
}

CodeLayout build_layout(int d) {
  if (d < 3 || d % 2 == 0) {
    throw ParameterError("code distance must be odd and >= 3, got " + std::to_string(d));
  }
  CodeLayout layout;
  layout.d = d;
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) layout.data.push_back({r, c});
  }
  for (int i = 0; i <= d; ++i) {
    for (int j = 0; j <= d; ++j) {
      const bool x_type = (i + j) % 2 == 0;
      const bool row_edge = i == 0 || i == d;
      const bool col_edge = j == 0 || j == d;
      if (row_edge && col_edge) continue;
      // Top and bottom edges carry Z checks, left and right edges X checks.
      if (row_edge && x_type) continue;
      if (col_edge && !x_type) continue;
      Stabilizer s;
      s.index = layout.stabilizers.size();
      s.kind = x_type ? Basis::kX : Basis::kZ;
      s.cell_row = i;
      s.cell_col = j;
      const int rows[4] = {i - 1, i - 1, i, i};
      const int cols[4] = {j - 1, j, j - 1, j};
      for (int k = 0; k < 4; ++k) {
        if (rows[k] >= 0 && rows[k] < d && cols[k] >= 0 && cols[k] < d) {
          s.corners[k] = rows[k] * d + cols[k];
          s.support.push_back(static_cast<std::size_t>(s.corners[k]));
        }
      }
      layout.stabilizers.push_back(std::move(s));
    }
  }
  return layout;
}

GridMap grid_embed_map(const CodeLayout& layout) {
  GridMap map;
  map.side = static_cast<std::size_t>(layout.d) + 1;
  map.cell_to_slot.assign(map.side * map.side, -1);
  for (const Stabilizer& s : layout.stabilizers) {
    const std::size_t cell =
        static_cast<std::size_t>(s.cell_row) * map.side + static_cast<std::size_t>(s.cell_col);
    map.slot_to_cell.push_back(cell);
    map.cell_to_slot[cell] = static_cast<int>(s.index);
  }
  return map;
}

}  // namespace qecd
