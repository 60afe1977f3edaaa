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

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace qecd {

enum class Basis { kX, kZ };

std::string basis_name(Basis b);
Basis parse_basis(const std::string& s);

struct DataQubit {
  int row = 0;
  int col = 0;
};

/// One plaquette of the rotated surface code. Plaquettes sit on the cells of
/// a (d+1) x (d+1) grid; cell (i, j) touches data qubits (i-1, j-1), (i-1, j),
/// (i, j-1) and (i, j) where those exist.
struct Stabilizer {
  std::size_t index = 0;
  Basis kind = Basis::kZ;
  int cell_row = 0;
  int cell_col = 0;
  // Data qubit index at the NW, NE, SW, SE corners, or -1 off the lattice.
  std::array<int, 4> corners{-1, -1, -1, -1};
  std::vector<std::size_t> support;
};

/// Rotated distance-d surface code. Data qubit (r, c) has index r*d + c.
/// Stabilizer indices follow row-major order of their grid cells.
struct CodeLayout {
  int d = 0;
  std::vector<DataQubit> data;
  std::vector<Stabilizer> stabilizers;

  std::size_t num_data() const { return data.size(); }
  std::size_t num_stabilizers() const { return stabilizers.size(); }
  std::size_t num_qubits() const { return data.size() + stabilizers.size(); }
  std::size_t ancilla(std::size_t stab) const { return data.size() + stab; }

  /// Data qubits of the logical operator measured in `basis`: the left
  /// column for Z, the top row for X.
  std::vector<std::size_t> logical_support(Basis basis) const;
};

/// Throws ParameterError unless d is odd and >= 3.
CodeLayout build_layout(int d);

/// Stabilizer slots placed on the (d+1) x (d+1) grid.
struct GridMap {
  std::size_t side = 0;
  std::vector<std::size_t> slot_to_cell;  // row-major cell index per slot
  std::vector<int> cell_to_slot;          // -1 marks a padding cell

  std::size_t num_cells() const { return side * side; }
  std::size_t num_padding() const { return num_cells() - slot_to_cell.size(); }
};

GridMap grid_embed_map(const CodeLayout& layout);

}  // namespace qecd
