#include "avem/quadrature.hpp"

#include <cmath>

namespace avem {

namespace {

std::array<QuadraturePoint, 14> make_rule() {
  std::array<QuadraturePoint, 14> r{};
  std::size_t n = 0;
  // Six points on the edge-midpoint orbit (a,a,b,b).
  const double a6 = 0.045503704125649649492;
  const double b6 = 0.5 - a6;
  const double w6 = 0.042546020777081466438;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      std::array<double, 4> l{a6, a6, a6, a6};
      l[i] = b6;
      l[j] = b6;
      r[n++] = {l, w6};
    }
  // Two vertex orbits (a,a,a,1-3a).
  for (const auto& [a, w] : {std::pair{0.092735250310891226402, 0.073493043116361949544},
                             std::pair{0.31088591926330060980, 0.11268792571801585080}}) {
    for (std::size_t i = 0; i < 4; ++i) {
      std::array<double, 4> l{a, a, a, a};
      l[i] = 1.0 - 3.0 * a;
      r[n++] = {l, w};
    }
  }
  return r;
}

}  // namespace

const std::array<QuadraturePoint, 14>& tet_rule_degree5() {
  static const auto rule = make_rule();
  return rule;
}

double integrate_affine_product(double volume, const std::array<double, 4>& p,
                                const std::array<double, 4>& q) {
  double pq = 0.0, sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    pq += p[k] * q[k];
    sp += p[k];
    sq += q[k];
  }
  return volume / 20.0 * (pq + sp * sq);
}

double integrate_tet(const std::array<Vec3, 4>& x, const std::function<double(const Vec3&)>& fn) {
  const double vol = std::abs(signed_volume(x[0], x[1], x[2], x[3]));
  double sum = 0.0;
  for (const auto& qp : tet_rule_degree5()) {
    Vec3 p = Vec3::Zero();
    for (std::size_t k = 0; k < 4; ++k) p += qp.barycentric[k] * x[k];
    sum += qp.weight * fn(p);
  }
  return vol * sum;
}

double integrate_tet_graded(const std::array<Vec3, 4>& x,
                            const std::function<double(const Vec3&)>& fn, const Vec3& singular,
                            int levels) {
  int corner = -1;
  for (int k = 0; k < 4; ++k)
    if (x[static_cast<std::size_t>(k)] == singular) corner = k;
  if (levels <= 0 || corner < 0) return integrate_tet(x, fn);

  // Red split: four corner children plus the inner octahedron cut along the
  // (x0x1 midpoint, x2x3 midpoint) diagonal.
  auto mid = [&](std::size_t i, std::size_t j) -> Vec3 { return 0.5 * (x[i] + x[j]); };
  const Vec3 m01 = mid(0, 1), m02 = mid(0, 2), m03 = mid(0, 3);
  const Vec3 m12 = mid(1, 2), m13 = mid(1, 3), m23 = mid(2, 3);
  const std::array<std::array<Vec3, 4>, 8> kids{{
      {x[0], m01, m02, m03},
      {m01, x[1], m12, m13},
      {m02, m12, x[2], m23},
      {m03, m13, m23, x[3]},
      {m01, m23, m02, m03},
      {m01, m23, m03, m13},
      {m01, m23, m13, m12},
      {m01, m23, m12, m02},
  }};
  double sum = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    if (static_cast<int>(i) == corner)
      sum += integrate_tet_graded(kids[i], fn, singular, levels - 1);
    else
      sum += integrate_tet(kids[i], fn);
  }
  return sum;
}

}  // namespace avem
