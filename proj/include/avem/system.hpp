// Global assembly of the discrete bilinear form and load, Dirichlet
// elimination, and a Jacobi-preconditioned conjugate gradient solver.
#pragma once

#include "avem/mesh_forest.hpp"
#include "avem/vem_local.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace avem {

/// Piecewise-constant data on one element.
struct ElementData {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  double c = 0.0;
  double f = 0.0;
};

struct DofMap {
  std::vector<int> node_to_dof;     // -1 for Dirichlet nodes
  std::vector<NodeId> dof_to_node;
  std::vector<char> dirichlet;      // per node
  std::vector<double> boundary_values;  // per node, zero off the boundary

  std::size_t n_free() const { return dof_to_node.size(); }
};

/// Compressed row storage.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const;
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> diagonal() const;
  std::size_t nnz() const { return val.size(); }

  /// Builds the matrix from upper-triangle triplets (i <= j), summing
  /// duplicates and mirroring the strict upper part.
  static CsrMatrix from_upper_triplets(std::size_t n,
                                       std::vector<std::tuple<int, int, double>> upper);
};

struct LinearSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  double gamma = 1.0;
  DofMap dofs;
};

using ScalarField = std::function<double(const Vec3&)>;

/// Sum of A_E + M_E + gamma S_E and of the local loads over all elements,
/// with the Dirichlet nodes eliminated.
LinearSystem assemble(const MeshForest& mesh, std::span<const ElementLocal> elements,
                      std::span<const ElementData> data, double gamma,
                      const ScalarField& dirichlet, int threads = 1);

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  std::vector<double> residual_history;  // preconditioned residual norms
};

/// Stops once the preconditioned residual norm drops below rel_tol times its
/// initial value. Throws SolverError on non-convergence.
CgResult solve_cg(const CsrMatrix& A, std::span<const double> rhs, double rel_tol, int max_iter);

/// Default iteration budget 20 sqrt(n) + 1000.
int default_cg_max_iter(std::size_t n);

/// Full nodal vector: free values from `free`, Dirichlet values elsewhere.
std::vector<double> reconstitute(const DofMap& dofs, std::span<const double> free);

/// Largest |F(v_p) - B(u_T, v_p)| over piecewise-linear hats v_p of free
/// proper nodes, divided by the Euclidean norm of the load vector.
double quasi_orthogonality_residual(const MeshForest& mesh, std::span<const ElementLocal> elements,
                                    std::span<const ElementData> data,
                                    std::span<const double> nodal_u, const LinearSystem& system);

}  // namespace avem
