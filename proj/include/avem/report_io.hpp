// CSV records and legacy VTK snapshots.
#pragma once

#include "avem/adaptive_driver.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace avem {

inline constexpr const char* kCsvHeader =
    "iter,ndofs,ncells,h1err,eta,stab,lambda_max,n_marked,n_refined,cg_iters";

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

void write_csv(std::ostream& os, std::span<const IterationRecord> records);
void write_csv(const std::filesystem::path& path, std::span<const IterationRecord> records);
std::vector<IterationRecord> read_csv(std::istream& is);
std::vector<IterationRecord> read_csv(const std::filesystem::path& path);

/// One CSV with a leading `method` column for several runs.
void write_joined_csv(const std::filesystem::path& path,
                      std::span<const std::pair<std::string, std::vector<IterationRecord>>> runs);

/// Legacy ASCII unstructured grid of the leaves: point data is the nodal
/// solution, cell data the local eta^2 and the largest vertex index lambda.
void write_vtk(std::ostream& os, const MeshForest& mesh, std::span<const TetId> leaves,
               std::span<const double> solution, std::span<const double> eta2_local);
void write_vtk(const std::filesystem::path& path, const MeshForest& mesh, std::span<const TetId> leaves,
               std::span<const double> solution, std::span<const double> eta2_local);

}  // namespace avem
