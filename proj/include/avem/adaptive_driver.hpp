// SOLVE -> ESTIMATE -> MARK -> REFINE loop with Doerfler marking.
#pragma once

#include "avem/estimator.hpp"
#include "avem/mesh_forest.hpp"
#include "avem/system.hpp"
#include "avem/vem_local.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace avem {

using VectorField = std::function<Vec3(const Vec3&)>;
using MatrixField = std::function<Eigen::Matrix3d(const Vec3&)>;

/// Relative H1 error of a discrete solution, if the problem can report one.
using ErrorFunctional =
    std::function<double(const MeshForest&, std::span<const ElementLocal>, std::span<const double>)>;

struct ProblemSpec {
  std::string name;
  std::vector<UnitCube> domain;
  MatrixField K = [](const Vec3&) { return Eigen::Matrix3d::Identity(); };
  ScalarField c = [](const Vec3&) { return 0.0; };
  ScalarField f;
  ScalarField g;  // Dirichlet data
  ScalarField exact;        // optional
  VectorField exact_grad;   // optional
  ErrorFunctional h1_error; // optional
};

struct GalerkinConfig {
  int lambda_max = 10;  // 0 selects conforming refinement
  double theta = 0.5;
  double gamma = 1.0;
  double tol = 0.0;
  std::size_t max_ndofs = 38000;
  double cg_tol = 1e-10;
  int cg_max_iter = 0;  // 0: default budget from the system size
  int threads = 1;
  bool four_point_source = false;
  std::size_t max_iterations = 1000;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  std::size_t ndofs = 0;
  std::size_t n_cells = 0;
  double h1err = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;   // sqrt of the global eta^2
  double stab = 0.0;  // S_T(u,u)
  int lambda_max = 0;
  std::size_t n_marked = 0;
  std::size_t n_refined = 0;
  int cg_iters = 0;
  // Diagnostics that are not part of the CSV output.
  double stab_ratio = 0.0;       // gamma^2 S_T / eta^2
  double quasi_orthogonality = 0.0;
};

/// Everything known about one iteration before marking; handed to observers.
struct IterationState {
  const MeshForest& mesh;
  std::span<const TetId> leaves;
  std::span<const ElementLocal> elements;
  std::span<const ElementData> data;
  const LinearSystem& system;
  std::span<const double> solution;  // nodal
  const EstimatorReport& estimate;
  const IterationRecord& record;
};

using IterationObserver = std::function<void(const IterationState&)>;

std::vector<ElementData> approximate_data(const ProblemSpec& problem,
                                          std::span<const ElementLocal> elements,
                                          bool four_point_source = false);

/// Positions (into `eta2`) of the shortest prefix of the indicators sorted
/// descending, ties by `ids` ascending, carrying at least theta of the total.
std::vector<std::size_t> dorfler_mark(std::span<const double> eta2, std::span<const TetId> ids,
                                      double theta);

std::vector<ElementLocal> build_elements(const MeshForest& mesh, std::span<const TetId> leaves,
                                         int threads = 1);

std::vector<IterationRecord> galerkin_loop(const ProblemSpec& problem, const GalerkinConfig& config,
                                           const IterationObserver& observer = {});

/// Same loop started from a given mesh instead of the problem's cubes.
std::vector<IterationRecord> galerkin_loop(const ProblemSpec& problem, const GalerkinConfig& config,
                                           MeshForest mesh, const IterationObserver& observer = {});

}  // namespace avem
