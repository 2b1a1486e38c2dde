// Element-local machinery of the lowest-order enhanced virtual element space
// on tetrahedral-shape elements with hanging nodes.
//
// Every leaf is a polyhedron whose faces are its interface facets (planar
// triangles, possibly with hanging nodes on their sides). Because the
// element is geometrically a simplex, all volume integrals of polynomials
// are evaluated in closed form.
#pragma once

#include "avem/mesh_forest.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace avem {

/// Affine function c0 + grad . x.
struct LinearPoly3 {
  double c0 = 0.0;
  Vec3 grad = Vec3::Zero();

  double operator()(const Vec3& x) const { return c0 + grad.dot(x); }
};

struct FacetPolygon {
  FacetId facet = kNone;
  TetId neighbor = kNone;  // across the facet; kNone on the domain boundary
  int local_face = -1;
  std::vector<NodeId> nodes;  // counterclockwise seen from outside the element
  std::vector<Vec3> points;
  Vec3 normal = Vec3::Zero();  // outward unit normal
  Vec3 e1 = Vec3::Zero(), e2 = Vec3::Zero();  // in-plane orthonormal basis
  Vec3 centroid = Vec3::Zero();
  double area = 0.0;
  double perimeter = 0.0;
};

/// Linear maps from the polygon's boundary values to its projector.
struct FacetWeights {
  Eigen::Matrix3Xd grad;          // column k: gradient contribution of node k
  Eigen::VectorXd const_term;     // c0 contribution of node k
  Eigen::VectorXd integral;       // contribution of node k to the facet integral
};

struct FacetProjection {
  LinearPoly3 poly;
  double integral = 0.0;
};

struct ElementLocal {
  TetId tet = kNone;
  ElementGeometry geom;
  std::vector<NodeId> dofs;  // the four vertices come first
  std::vector<FacetPolygon> facets;
  std::vector<std::vector<int>> facet_dofs;  // local dof index of each polygon node
  Eigen::Matrix3Xd proj_grad;    // column i: gradient of the projection of basis i
  Eigen::VectorXd proj_const;    // constant term of the projection of basis i
  Eigen::MatrixXd bary;          // n x 4 barycentric weights of every dof node
  std::array<Vec3, 4> vertex_coords;

  std::size_t size() const { return dofs.size(); }
  LinearPoly3 basis_projection(std::size_t i) const { return {proj_const(static_cast<Eigen::Index>(i)), proj_grad.col(static_cast<Eigen::Index>(i))}; }
};

struct LocalMatrices {
  Eigen::MatrixXd A;  // consistency (diffusion)
  Eigen::MatrixXd M;  // reaction
  Eigen::MatrixXd S;  // stabilization, unscaled by gamma
};

struct InterpolationDefect {
  LinearPoly3 interpolant;
  Eigen::VectorXd defect;  // (v - I_E v) at every dof
};

FacetPolygon make_facet_polygon(const MeshForest& mesh, const InterfaceFacet& facet,
                                const Vec3& outward);

FacetWeights facet_weights(const FacetPolygon& facet);

/// Projection of the face function with boundary values `values` (one per
/// polygon node) and its integral over the facet.
FacetProjection facet_projector(const FacetPolygon& facet, std::span<const double> values);

ElementLocal build_element(const MeshForest& mesh, TetId t);

LinearPoly3 element_projector(const ElementLocal& e, std::span<const double> dof_values);

LocalMatrices local_matrices(const ElementLocal& e, const Eigen::Matrix3d& K, double c);

Eigen::VectorXd local_rhs(const ElementLocal& e, double f);

InterpolationDefect lagrange_p1_interp(const ElementLocal& e, std::span<const double> dof_values);

/// v(z) for proper z, v(z) minus the mean of the parent-edge endpoints otherwise.
double hierarchical_detail(const MeshForest& mesh, std::span<const double> values, NodeId z);

/// Gathers a nodal vector onto the element's dofs.
Eigen::VectorXd gather(const ElementLocal& e, std::span<const double> nodal);

}  // namespace avem
