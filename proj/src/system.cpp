#include "avem/system.hpp"

#include "avem/parallel.hpp"
#include "avem/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace avem {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      s += val[k] * x[static_cast<std::size_t>(col[k])];
    y[i] = s;
  }
}

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<int>(j));
  if (it == last || *it != static_cast<int>(j)) return 0.0;
  return val[static_cast<std::size_t>(it - col.begin())];
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
  return d;
}

CsrMatrix CsrMatrix::from_upper_triplets(std::size_t n,
                                         std::vector<std::tuple<int, int, double>> upper) {
  std::sort(upper.begin(), upper.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  // Merge duplicates in a fixed order.
  std::vector<std::tuple<int, int, double>> merged;
  merged.reserve(upper.size());
  for (const auto& t : upper) {
    if (std::get<0>(t) > std::get<1>(t)) throw std::invalid_argument("from_upper_triplets: lower entry");
    if (!merged.empty() && std::get<0>(merged.back()) == std::get<0>(t) &&
        std::get<1>(merged.back()) == std::get<1>(t))
      std::get<2>(merged.back()) += std::get<2>(t);
    else
      merged.push_back(t);
  }

  CsrMatrix A;
  A.n = n;
  std::vector<std::size_t> count(n, 0);
  for (const auto& [i, j, v] : merged) {
    ++count[static_cast<std::size_t>(i)];
    if (i != j) ++count[static_cast<std::size_t>(j)];
  }
  A.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) A.row_ptr[i + 1] = A.row_ptr[i] + count[i];
  A.col.resize(A.row_ptr[n]);
  A.val.resize(A.row_ptr[n]);
  std::vector<std::size_t> fill(A.row_ptr.begin(), A.row_ptr.end() - 1);
  // Mirrored entries of row i come from rows < i, so they are emitted first
  // and columns stay sorted.
  for (const auto& [i, j, v] : merged) {
    if (i != j) {
      const auto r = static_cast<std::size_t>(j);
      A.col[fill[r]] = i;
      A.val[fill[r]++] = v;
    }
  }
  for (const auto& [i, j, v] : merged) {
    const auto r = static_cast<std::size_t>(i);
    A.col[fill[r]] = j;
    A.val[fill[r]++] = v;
  }
  return A;
}

LinearSystem assemble(const MeshForest& mesh, std::span<const ElementLocal> elements,
                      std::span<const ElementData> data, double gamma,
                      const ScalarField& dirichlet, int threads) {
  if (!(gamma > 0.0)) throw std::invalid_argument("assemble: gamma must be positive");
  if (elements.size() != data.size()) throw std::invalid_argument("assemble: data size mismatch");

  LinearSystem sys;
  sys.gamma = gamma;
  auto& dofs = sys.dofs;
  const std::size_t n_nodes = mesh.nodes().size();
  dofs.dirichlet = mesh.boundary_node_mask();
  dofs.node_to_dof.assign(n_nodes, -1);
  dofs.boundary_values.assign(n_nodes, 0.0);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (dofs.dirichlet[i]) {
      dofs.boundary_values[i] = dirichlet(mesh.node(static_cast<NodeId>(i)).coords);
    } else {
      dofs.node_to_dof[i] = static_cast<int>(dofs.dof_to_node.size());
      dofs.dof_to_node.push_back(static_cast<NodeId>(i));
    }
  }
  const bool has_dirichlet = dofs.dof_to_node.size() < n_nodes;
  const bool has_reaction = std::any_of(data.begin(), data.end(), [](const ElementData& d) { return d.c > 0.0; });
  if (dofs.n_free() > 0 && !has_dirichlet && !has_reaction)
    throw std::runtime_error("assemble: singular system (no Dirichlet nodes and no reaction)");

  std::vector<Eigen::MatrixXd> local(elements.size());
  std::vector<Eigen::VectorXd> loads(elements.size());
  parallel_for(elements.size(), threads, [&](std::size_t e) {
    const auto m = local_matrices(elements[e], data[e].K, data[e].c);
    local[e] = m.A + m.M + gamma * m.S;
    loads[e] = local_rhs(elements[e], data[e].f);
  });

  sys.rhs.assign(dofs.n_free(), 0.0);
  std::vector<std::tuple<int, int, double>> upper;
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto& el = elements[e];
    const auto& K = local[e];
    for (std::size_t i = 0; i < el.size(); ++i) {
      const int gi = dofs.node_to_dof[static_cast<std::size_t>(el.dofs[i])];
      if (gi < 0) continue;
      sys.rhs[static_cast<std::size_t>(gi)] += loads[e](static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < el.size(); ++j) {
        const auto nj = static_cast<std::size_t>(el.dofs[j]);
        const int gj = dofs.node_to_dof[nj];
        const double kij = K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (gj < 0)
          sys.rhs[static_cast<std::size_t>(gi)] -= kij * dofs.boundary_values[nj];
        else if (gi <= gj)
          upper.emplace_back(gi, gj, kij);
      }
    }
  }
  sys.matrix = CsrMatrix::from_upper_triplets(dofs.n_free(), std::move(upper));
  return sys;
}

int default_cg_max_iter(std::size_t n) {
  return static_cast<int>(20.0 * std::sqrt(static_cast<double>(n))) + 1000;
}

CgResult solve_cg(const CsrMatrix& A, std::span<const double> b, double rel_tol, int max_iter) {
  const std::size_t n = A.n;
  if (b.size() != n) throw std::invalid_argument("solve_cg: rhs size mismatch");
  CgResult out;
  out.x.assign(n, 0.0);
  if (n == 0) return out;

  const auto diag = A.diagonal();
  for (double d : diag)
    if (!(d > 0.0)) throw std::invalid_argument("solve_cg: matrix diagonal is not positive");

  std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
  auto dot = [n](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += u[i] * v[i];
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  double rz = dot(r, z);
  const double norm0 = std::sqrt(rz);
  out.residual_history.push_back(norm0);
  if (norm0 == 0.0) return out;
  p = z;

  for (int it = 1; it <= max_iter; ++it) {
    A.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0))
      throw SolverError("solve_cg: matrix is not positive definite", out.residual_history);
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = r[i] / diag[i];
    }
    const double rz_new = dot(r, z);
    const double res = std::sqrt(std::max(rz_new, 0.0));
    out.residual_history.push_back(res);
    if (res <= rel_tol * norm0) {
      out.iterations = it;
      return out;
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("solve_cg: no convergence within " + std::to_string(max_iter) + " iterations",
                    out.residual_history);
}

std::vector<double> reconstitute(const DofMap& dofs, std::span<const double> free) {
  if (free.size() != dofs.n_free()) throw std::invalid_argument("reconstitute: size mismatch");
  std::vector<double> u = dofs.boundary_values;
  for (std::size_t k = 0; k < free.size(); ++k) u[static_cast<std::size_t>(dofs.dof_to_node[k])] = free[k];
  return u;
}

double quasi_orthogonality_residual(const MeshForest& mesh, std::span<const ElementLocal> elements,
                                    std::span<const ElementData> data,
                                    std::span<const double> nodal_u, const LinearSystem& system) {
  std::vector<double> R(mesh.nodes().size(), 0.0);
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto& el = elements[e];
    const auto& d = data[e];
    const auto u = gather(el, nodal_u);
    const LinearPoly3 pu = element_projector(el, std::span<const double>(u.data(), el.size()));
    Eigen::Matrix3d B;
    for (int k = 0; k < 3; ++k) B.col(k) = el.vertex_coords[static_cast<std::size_t>(k + 1)] - el.vertex_coords[0];
    const Eigen::Matrix3d Binv = B.inverse();
    std::array<Vec3, 4> grad_l;
    grad_l[1] = Binv.row(0).transpose();
    grad_l[2] = Binv.row(1).transpose();
    grad_l[3] = Binv.row(2).transpose();
    grad_l[0] = -(grad_l[1] + grad_l[2] + grad_l[3]);
    std::array<double, 4> pu_vertex;
    for (std::size_t k = 0; k < 4; ++k) pu_vertex[k] = pu(el.vertex_coords[k]);
    const Vec3 flux = d.K * pu.grad;
    const double vol = el.geom.volume;
    for (std::size_t k = 0; k < 4; ++k) {
      std::array<double, 4> hat{0.0, 0.0, 0.0, 0.0};
      hat[k] = 1.0;
      const double rk = d.f * vol / 4.0 - vol * flux.dot(grad_l[k]) -
                        d.c * integrate_affine_product(vol, pu_vertex, hat);
      R[static_cast<std::size_t>(el.dofs[k])] += rk;
    }
  }
  // Transpose of the recursive midpoint averaging that defines the hats at
  // hanging nodes.
  const auto& nodes = mesh.nodes();
  for (std::size_t i = nodes.size(); i-- > 0;) {
    if (nodes[i].is_proper) continue;
    const auto [a, b] = *nodes[i].parent_edge;
    R[static_cast<std::size_t>(a)] += 0.5 * R[i];
    R[static_cast<std::size_t>(b)] += 0.5 * R[i];
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_proper && !system.dofs.dirichlet[i]) worst = std::max(worst, std::abs(R[i]));
  double rhs_norm = 0.0;
  for (double v : system.rhs) rhs_norm += v * v;
  rhs_norm = std::sqrt(rhs_norm);
  return rhs_norm > 0.0 ? worst / rhs_norm : worst;
}

}  // namespace avem
