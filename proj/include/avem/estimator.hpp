// Residual a posteriori estimator and the stabilization term.
#pragma once

#include "avem/mesh_forest.hpp"
#include "avem/system.hpp"
#include "avem/vem_local.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace avem {

struct EstimatorReport {
  std::vector<double> eta2_local;  // per element, in the order of `elements`
  double eta2 = 0.0;
  double stab = 0.0;   // S_T(u,u)
  double ratio = 0.0;  // gamma^2 S_T / eta^2
};

/// Projections of a nodal field on every element, with the tet-to-element
/// lookup needed to reach neighbors.
struct ProjectedField {
  std::vector<LinearPoly3> poly;
  std::vector<int> tet_to_element;
};

ProjectedField project_field(const MeshForest& mesh, std::span<const ElementLocal> elements,
                             std::span<const double> nodal);

double local_indicator(std::size_t e, std::span<const ElementLocal> elements,
                       std::span<const ElementData> data, const ProjectedField& projected);

double stab_term(std::span<const ElementLocal> elements, std::span<const double> nodal);

EstimatorReport global_estimate(const MeshForest& mesh, std::span<const ElementLocal> elements,
                                std::span<const ElementData> data,
                                std::span<const double> nodal, double gamma, int threads = 1);

/// Broken H1 seminorm squared of the piecewise-linear lift of the nodal
/// values: every element is replayed by bisection until its boundary nodes
/// are vertices of a conforming sub-tetrahedralization.
double h1_seminorm_oracle(const MeshForest& mesh, std::span<const ElementLocal> elements,
                          std::span<const double> nodal);

/// Matrix G with v^T G v the squared seminorm of the lift on element `e`,
/// for dof values v ordered like `e.dofs`.
Eigen::MatrixXd lift_stiffness(const MeshForest& mesh, const ElementLocal& e);

/// Same quantity for one element; `dof_values` follows the element's dofs.
double h1_seminorm_element(const MeshForest& mesh, const ElementLocal& e,
                           std::span<const double> dof_values);

}  // namespace avem
