// Mesh generators shared by the test binaries.
#pragma once

#include "avem/mesh_forest.hpp"

#include <random>
#include <vector>

namespace avem::testing {

/// Eight unit cubes filling [0,2]^3.
inline std::vector<UnitCube> block_cubes() {
  std::vector<UnitCube> cubes;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) cubes.push_back({{i, j, k}});
  return cubes;
}

/// Marks a random fraction of the leaves `rounds` times and refines with the
/// given admissibility bound.
inline MeshForest random_admissible_mesh(unsigned seed, int lambda_max, int rounds,
                                         double fraction = 0.25) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution pick(fraction);
  auto mesh = MeshForest::kuhn(block_cubes());
  for (int r = 0; r < rounds; ++r) {
    std::vector<TetId> marked;
    for (TetId t : mesh.leaves())
      if (pick(rng)) marked.push_back(t);
    if (marked.empty()) marked.push_back(mesh.leaves().front());
    mesh.refine_set(marked, RefineMode::admissible, lambda_max);
  }
  return mesh;
}

}  // namespace avem::testing
