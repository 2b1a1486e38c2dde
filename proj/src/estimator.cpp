#include "avem/estimator.hpp"

#include "avem/parallel.hpp"
#include "avem/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <stdexcept>

namespace avem {

ProjectedField project_field(const MeshForest& mesh, std::span<const ElementLocal> elements,
                             std::span<const double> nodal) {
  ProjectedField out;
  out.poly.resize(elements.size());
  out.tet_to_element.assign(mesh.tets().size(), -1);
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto v = gather(elements[e], nodal);
    out.poly[e] = element_projector(elements[e], std::span<const double>(v.data(), elements[e].size()));
    out.tet_to_element[static_cast<std::size_t>(elements[e].tet)] = static_cast<int>(e);
  }
  return out;
}

double local_indicator(std::size_t e, std::span<const ElementLocal> elements,
                       std::span<const ElementData> data, const ProjectedField& projected) {
  const auto& el = elements[e];
  const auto& d = data[e];
  const auto& pu = projected.poly[e];
  const double h = el.geom.h;

  std::array<double, 4> r;
  for (std::size_t k = 0; k < 4; ++k) r[k] = d.f - d.c * pu(el.vertex_coords[k]);
  double eta2 = h * h * integrate_affine_product(el.geom.volume, r, r);

  const Vec3 flux = d.K * pu.grad;
  for (const auto& F : el.facets) {
    if (F.neighbor == kNone) continue;
    const int nb = projected.tet_to_element[static_cast<std::size_t>(F.neighbor)];
    if (nb < 0) throw std::logic_error("local_indicator: neighbor is not an element of the mesh");
    const Vec3 flux_nb = data[static_cast<std::size_t>(nb)].K * projected.poly[static_cast<std::size_t>(nb)].grad;
    const double jump = flux.dot(F.normal) - flux_nb.dot(F.normal);
    eta2 += 0.5 * h * F.area * jump * jump;
  }
  return eta2;
}

double stab_term(std::span<const ElementLocal> elements, std::span<const double> nodal) {
  double s = 0.0;
  for (const auto& el : elements) {
    const auto v = gather(el, nodal);
    const Eigen::VectorXd defect = v - el.bary * v.head<4>();
    s += el.geom.h * defect.tail(defect.size() - 4).squaredNorm();
  }
  return s;
}

EstimatorReport global_estimate(const MeshForest& mesh, std::span<const ElementLocal> elements,
                                std::span<const ElementData> data,
                                std::span<const double> nodal, double gamma, int threads) {
  const auto projected = project_field(mesh, elements, nodal);
  EstimatorReport rep;
  rep.eta2_local.resize(elements.size());
  parallel_for(elements.size(), threads, [&](std::size_t e) {
    rep.eta2_local[e] = local_indicator(e, elements, data, projected);
  });
  for (double v : rep.eta2_local) rep.eta2 += v;
  rep.stab = stab_term(elements, nodal);
  rep.ratio = rep.eta2 > 0.0 ? gamma * gamma * rep.stab / rep.eta2 : 0.0;
  return rep;
}

namespace {

// Bisection replay of a single element inside its own local node table.
class ElementReplay {
 public:
  ElementReplay(const MeshForest& mesh, const ElementLocal& e) {
    const auto& rec = mesh.tet(e.tet);
    const auto n = static_cast<Eigen::Index>(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      const Vec3& x = mesh.node(e.dofs[i]).coords;
      target_.emplace(key(x), static_cast<int>(i));
      if (i >= 4) targets_.push_back(x);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(n);
      w(static_cast<Eigen::Index>(k)) = 1.0;
      add_node(e.vertex_coords[k], w);
    }
    tets_.push_back({{0, 1, 2, 3}, rec.tag});
    n_dofs_ = n;
  }

  // Lift stiffness in terms of the element's dof values.
  Eigen::MatrixXd stiffness() {
    refine();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_dofs_, n_dofs_);
    for (const auto& t : tets_) {
      if (!t.leaf) continue;
      std::array<Vec3, 4> x;
      for (std::size_t k = 0; k < 4; ++k) x[k] = coords_[static_cast<std::size_t>(t.v[k])];
      Eigen::Matrix3d B;
      for (int k = 0; k < 3; ++k) B.col(k) = x[static_cast<std::size_t>(k + 1)] - x[0];
      const Eigen::Matrix3d Binv = B.inverse();
      // Gradient of the lift as a linear map of the dof values.
      Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(3, n_dofs_);
      for (int k = 1; k < 4; ++k) {
        const Eigen::RowVectorXd dv = weights_[static_cast<std::size_t>(t.v[static_cast<std::size_t>(k)])] -
                                      weights_[static_cast<std::size_t>(t.v[0])];
        grad += Binv.row(k - 1).transpose() * dv;
      }
      const double vol = std::abs(signed_volume(x[0], x[1], x[2], x[3]));
      G += vol * grad.transpose() * grad;
    }
    return 0.5 * (G + G.transpose());
  }

 private:
  struct SubTet {
    std::array<int, 4> v;
    int tag;
    bool leaf = true;
  };
  using Key = std::array<double, 3>;
  static Key key(const Vec3& x) { return {x(0), x(1), x(2)}; }

  int add_node(const Vec3& x, const Eigen::RowVectorXd& w) {
    coords_.push_back(x);
    weights_.push_back(w);
    return static_cast<int>(coords_.size() - 1);
  }

  int midpoint(int a, int b) {
    const auto k = std::minmax(a, b);
    auto it = mids_.find(k);
    if (it != mids_.end()) return it->second;
    const Vec3 x = 0.5 * (coords_[static_cast<std::size_t>(a)] + coords_[static_cast<std::size_t>(b)]);
    Eigen::RowVectorXd w;
    if (auto t = target_.find(key(x)); t != target_.end()) {
      w = Eigen::RowVectorXd::Zero(n_dofs_);
      w(t->second) = 1.0;
    } else {
      w = 0.5 * (weights_[static_cast<std::size_t>(a)] + weights_[static_cast<std::size_t>(b)]);
    }
    const int m = add_node(x, w);
    mids_.emplace(k, m);
    return m;
  }

  bool needs_split(const SubTet& t) const {
    static constexpr std::array<std::array<int, 2>, 6> edges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
    for (const auto& e : edges)
      if (mids_.count(std::minmax(t.v[static_cast<std::size_t>(e[0])], t.v[static_cast<std::size_t>(e[1])])))
        return true;
    std::array<Vec3, 4> x;
    for (std::size_t k = 0; k < 4; ++k) x[k] = coords_[static_cast<std::size_t>(t.v[k])];
    Eigen::Matrix3d B;
    for (int k = 0; k < 3; ++k) B.col(k) = x[static_cast<std::size_t>(k + 1)] - x[0];
    const Eigen::Matrix3d Binv = B.inverse();
    for (const Vec3& p : targets_) {
      bool is_vertex = false;
      for (const auto& xv : x) is_vertex = is_vertex || xv == p;
      if (is_vertex) continue;
      const Vec3 l = Binv * (p - x[0]);
      constexpr double tol = 1e-12;
      if (l.minCoeff() >= -tol && l.sum() <= 1.0 + tol) return true;
    }
    return false;
  }

  void refine() {
    for (int sweep = 0;; ++sweep) {
      if (sweep > 200) throw std::runtime_error("h1_seminorm_oracle: replay did not terminate");
      std::vector<std::size_t> todo;
      for (std::size_t i = 0; i < tets_.size(); ++i)
        if (tets_[i].leaf && needs_split(tets_[i])) todo.push_back(i);
      if (todo.empty()) return;
      for (std::size_t i : todo) {
        const SubTet t = tets_[i];
        const auto k = static_cast<std::size_t>(t.tag);
        const int m = midpoint(t.v[0], t.v[k]);
        SubTet c1{t.v, t.tag == 1 ? 3 : t.tag - 1};
        SubTet c2 = c1;
        c1.v[k] = m;
        for (std::size_t j = 0; j < k; ++j) c2.v[j] = t.v[j + 1];
        c2.v[k] = m;
        tets_[i].leaf = false;
        tets_.push_back(c1);
        tets_.push_back(c2);
      }
    }
  }

  std::vector<Vec3> coords_;
  std::vector<Eigen::RowVectorXd> weights_;
  std::map<std::pair<int, int>, int> mids_;
  std::map<Key, int> target_;
  std::vector<Vec3> targets_;
  std::vector<SubTet> tets_;
  Eigen::Index n_dofs_ = 0;
};

}  // namespace

Eigen::MatrixXd lift_stiffness(const MeshForest& mesh, const ElementLocal& e) {
  ElementReplay replay(mesh, e);
  return replay.stiffness();
}

double h1_seminorm_element(const MeshForest& mesh, const ElementLocal& e,
                           std::span<const double> dof_values) {
  if (dof_values.size() != e.size()) throw std::invalid_argument("h1_seminorm_element: size mismatch");
  const Eigen::MatrixXd G = lift_stiffness(mesh, e);
  const Eigen::Map<const Eigen::VectorXd> v(dof_values.data(), static_cast<Eigen::Index>(dof_values.size()));
  return v.dot(G * v);
}

double h1_seminorm_oracle(const MeshForest& mesh, std::span<const ElementLocal> elements,
                          std::span<const double> nodal) {
  double s = 0.0;
  for (const auto& el : elements) {
    const auto v = gather(el, nodal);
    s += h1_seminorm_element(mesh, el, std::span<const double>(v.data(), el.size()));
  }
  return s;
}

}  // namespace avem
