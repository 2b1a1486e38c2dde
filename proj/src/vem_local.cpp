#include "avem/vem_local.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace avem {

FacetPolygon make_facet_polygon(const MeshForest& mesh, const InterfaceFacet& facet,
                                const Vec3& outward) {
  const auto& rec = mesh.facet(facet.facet);
  std::array<NodeId, 3> c = rec.nodes;
  const Vec3& p = mesh.node(c[0]).coords;
  Vec3 n = (mesh.node(c[1]).coords - p).cross(mesh.node(c[2]).coords - p);
  if (n.dot(outward) < 0.0) {
    std::swap(c[1], c[2]);
    n = -n;
  }
  const double twice_area = n.norm();
  if (twice_area == 0.0) throw std::runtime_error("make_facet_polygon: degenerate facet");

  FacetPolygon poly;
  poly.facet = facet.facet;
  poly.neighbor = facet.neighbor;
  poly.local_face = facet.local_face;
  poly.nodes = mesh.facet_cycle(c);
  poly.points.reserve(poly.nodes.size());
  for (NodeId id : poly.nodes) poly.points.push_back(mesh.node(id).coords);
  poly.normal = n / twice_area;
  poly.area = 0.5 * twice_area;
  poly.e1 = (mesh.node(c[1]).coords - p).normalized();
  poly.e2 = poly.normal.cross(poly.e1);
  poly.centroid = (p + mesh.node(c[1]).coords + mesh.node(c[2]).coords) / 3.0;
  for (std::size_t k = 0; k < poly.points.size(); ++k)
    poly.perimeter += (poly.points[(k + 1) % poly.points.size()] - poly.points[k]).norm();
  return poly;
}

FacetWeights facet_weights(const FacetPolygon& facet) {
  const auto m = static_cast<Eigen::Index>(facet.points.size());
  if (m < 3 || facet.area <= 0.0) throw std::runtime_error("facet_weights: degenerate polygon");

  // Segment s runs from node s to node s+1.
  std::vector<double> len(static_cast<std::size_t>(m));
  std::vector<Vec3> nrm(static_cast<std::size_t>(m));
  Vec3 moment = Vec3::Zero();  // integral of x along the boundary
  for (Eigen::Index s = 0; s < m; ++s) {
    const Vec3& a = facet.points[static_cast<std::size_t>(s)];
    const Vec3& b = facet.points[static_cast<std::size_t>((s + 1) % m)];
    const Vec3 t = b - a;
    len[static_cast<std::size_t>(s)] = t.norm();
    nrm[static_cast<std::size_t>(s)] = t.cross(facet.normal).normalized();
    moment += len[static_cast<std::size_t>(s)] * 0.5 * (a + b);
  }

  FacetWeights w;
  w.grad.resize(3, m);
  w.const_term.resize(m);
  w.integral.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto prev = static_cast<std::size_t>((k + m - 1) % m);
    const auto next = static_cast<std::size_t>(k);
    const Vec3 g = 0.5 * (len[prev] * nrm[prev] + len[next] * nrm[next]) / facet.area;
    const double mean_weight = 0.5 * (len[prev] + len[next]);
    w.grad.col(k) = g;
    w.const_term(k) = (mean_weight - g.dot(moment)) / facet.perimeter;
    w.integral(k) = facet.area * (w.const_term(k) + g.dot(facet.centroid));
  }
  return w;
}

FacetProjection facet_projector(const FacetPolygon& facet, std::span<const double> values) {
  if (values.size() != facet.points.size())
    throw std::invalid_argument("facet_projector: one value per boundary node expected");
  const auto w = facet_weights(facet);
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  FacetProjection out;
  out.poly.grad = w.grad * v;
  out.poly.c0 = w.const_term.dot(v);
  out.integral = w.integral.dot(v);
  return out;
}

ElementLocal build_element(const MeshForest& mesh, TetId t) {
  ElementLocal e;
  e.tet = t;
  e.geom = mesh.element_geometry(t);
  e.dofs = mesh.element_boundary_nodes(t);
  const auto n = static_cast<Eigen::Index>(e.dofs.size());
  const auto& verts = mesh.tet(t).vertices;
  for (std::size_t k = 0; k < 4; ++k) e.vertex_coords[k] = mesh.node(verts[k]).coords;

  auto local_index = [&](NodeId id) {
    auto it = std::find(e.dofs.begin(), e.dofs.end(), id);
    if (it == e.dofs.end()) throw std::logic_error("facet node missing from element dofs");
    return static_cast<int>(it - e.dofs.begin());
  };

  Eigen::RowVectorXd face_integral = Eigen::RowVectorXd::Zero(n);
  Eigen::Matrix3Xd flux = Eigen::Matrix3Xd::Zero(3, n);
  Vec3 surface_moment = Vec3::Zero();
  double surface_area = 0.0;
  for (const auto& ifc : mesh.interface_facets(t)) {
    auto poly = make_facet_polygon(mesh, ifc, e.geom.face_normal[static_cast<std::size_t>(ifc.local_face)]);
    const auto w = facet_weights(poly);
    std::vector<int> idx;
    idx.reserve(poly.nodes.size());
    for (NodeId id : poly.nodes) idx.push_back(local_index(id));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double wk = w.integral(static_cast<Eigen::Index>(k));
      face_integral(idx[k]) += wk;
      flux.col(idx[k]) += wk * poly.normal;
    }
    surface_moment += poly.area * poly.centroid;
    surface_area += poly.area;
    e.facets.push_back(std::move(poly));
    e.facet_dofs.push_back(std::move(idx));
  }

  e.proj_grad = flux / e.geom.volume;
  e.proj_const.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    e.proj_const(i) = (face_integral(i) - e.proj_grad.col(i).dot(surface_moment)) / surface_area;

  Eigen::Matrix3d B;
  for (int k = 0; k < 3; ++k) B.col(k) = e.vertex_coords[static_cast<std::size_t>(k + 1)] - e.vertex_coords[0];
  const Eigen::Matrix3d Binv = B.inverse();
  e.bary.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 l = Binv * (mesh.node(e.dofs[static_cast<std::size_t>(i)]).coords - e.vertex_coords[0]);
    e.bary(i, 0) = 1.0 - l.sum();
    e.bary(i, 1) = l(0);
    e.bary(i, 2) = l(1);
    e.bary(i, 3) = l(2);
  }
  // Vertices are exact.
  e.bary.topRows(4).setIdentity();
  return e;
}

Eigen::VectorXd gather(const ElementLocal& e, std::span<const double> nodal) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = nodal[static_cast<std::size_t>(e.dofs[i])];
  return v;
}

LinearPoly3 element_projector(const ElementLocal& e, std::span<const double> dof_values) {
  if (dof_values.size() != e.size())
    throw std::invalid_argument("element_projector: one value per dof expected");
  const Eigen::Map<const Eigen::VectorXd> v(dof_values.data(), static_cast<Eigen::Index>(dof_values.size()));
  return {e.proj_const.dot(v), e.proj_grad * v};
}

LocalMatrices local_matrices(const ElementLocal& e, const Eigen::Matrix3d& K, double c) {
  if (!(c >= 0.0)) throw std::invalid_argument("local_matrices: reaction coefficient must be >= 0");
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * K.cwiseAbs().maxCoeff())
    throw std::invalid_argument("local_matrices: diffusion tensor is not symmetric");
  if (Eigen::LLT<Eigen::Matrix3d>(K).info() != Eigen::Success)
    throw std::invalid_argument("local_matrices: diffusion tensor is not positive definite");

  const auto n = static_cast<Eigen::Index>(e.size());
  const double vol = e.geom.volume;
  LocalMatrices out;
  out.A = vol * e.proj_grad.transpose() * K * e.proj_grad;

  // Projected basis functions at the four vertices.
  Eigen::MatrixXd V(4, n);
  for (int k = 0; k < 4; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      V(k, i) = e.proj_const(i) + e.proj_grad.col(i).dot(e.vertex_coords[static_cast<std::size_t>(k)]);
  const Eigen::RowVectorXd s = V.colwise().sum();
  out.M = (c * vol / 20.0) * (V.transpose() * V + s.transpose() * s);

  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n, n);
  D.leftCols(4) -= e.bary;
  out.S = e.geom.h * D.transpose() * D;

  out.A = 0.5 * (out.A + out.A.transpose());
  out.M = 0.5 * (out.M + out.M.transpose());
  out.S = 0.5 * (out.S + out.S.transpose());
  return out;
}

Eigen::VectorXd local_rhs(const ElementLocal& e, double f) {
  const auto n = static_cast<Eigen::Index>(e.size());
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i)
    r(i) = f * e.geom.volume * (e.proj_const(i) + e.proj_grad.col(i).dot(e.geom.centroid));
  return r;
}

InterpolationDefect lagrange_p1_interp(const ElementLocal& e, std::span<const double> dof_values) {
  if (dof_values.size() != e.size())
    throw std::invalid_argument("lagrange_p1_interp: one value per dof expected");
  const Eigen::Map<const Eigen::VectorXd> v(dof_values.data(), static_cast<Eigen::Index>(dof_values.size()));
  InterpolationDefect out;
  out.defect = v - e.bary * v.head<4>();
  out.defect.head<4>().setZero();

  Eigen::Matrix3d B;
  for (int k = 0; k < 3; ++k) B.col(k) = e.vertex_coords[static_cast<std::size_t>(k + 1)] - e.vertex_coords[0];
  const Vec3 dv(v(1) - v(0), v(2) - v(0), v(3) - v(0));
  out.interpolant.grad = B.transpose().partialPivLu().solve(dv);
  out.interpolant.c0 = v(0) - out.interpolant.grad.dot(e.vertex_coords[0]);
  return out;
}

double hierarchical_detail(const MeshForest& mesh, std::span<const double> values, NodeId z) {
  const auto& n = mesh.node(z);
  const double vz = values[static_cast<std::size_t>(z)];
  if (n.is_proper) return vz;
  if (!n.parent_edge) throw std::logic_error("hierarchical_detail: hanging node without parent edge");
  const auto [a, b] = *n.parent_edge;
  return vz - 0.5 * (values[static_cast<std::size_t>(a)] + values[static_cast<std::size_t>(b)]);
}

}  // namespace avem
