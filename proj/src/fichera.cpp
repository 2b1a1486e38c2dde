#include "avem/fichera.hpp"

#include "avem/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace avem {

namespace {

constexpr int kDenominatorRefinements = 9;

double tet_squared_norm(const std::array<Vec3, 4>& x, const std::function<double(const Vec3&)>& fn,
                        const Vec3& singular, int levels) {
  for (const auto& v : x)
    if (v == singular) return integrate_tet_graded(x, fn, singular, levels);
  return integrate_tet(x, fn);
}

}  // namespace

ProblemSpec fichera_problem(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fichera_problem: alpha must lie in (0,1)");
  ProblemSpec p;
  p.name = "fichera";
  p.domain = fichera_cubes();
  p.c = [](const Vec3&) { return 1.0; };
  p.exact = [alpha](const Vec3& x) {
    const double r = x.norm();
    return r == 0.0 ? 0.0 : std::pow(r, alpha);
  };
  p.g = p.exact;
  p.exact_grad = [alpha](const Vec3& x) -> Vec3 {
    const double r = x.norm();
    if (r == 0.0) throw std::domain_error("fichera: gradient undefined at the origin");
    return alpha * std::pow(r, alpha - 2.0) * x;
  };
  p.f = [alpha](const Vec3& x) {
    const double r = x.norm();
    if (r == 0.0) throw std::domain_error("fichera: source undefined at the origin");
    return -alpha * (alpha + 1.0) * std::pow(r, alpha - 2.0) + std::pow(r, alpha);
  };
  const double denom = fichera_gradient_norm(alpha);
  p.h1_error = [grad = p.exact_grad, denom](const MeshForest&, std::span<const ElementLocal> elements,
                                            std::span<const double> nodal) {
    return relative_h1_error(elements, nodal, grad, denom);
  };
  return p;
}

double l2_norm_squared(const MeshForest& mesh, const VectorField& field, const Vec3& singular,
                       int graded_levels) {
  double s = 0.0;
  const auto fn = [&](const Vec3& x) { return field(x).squaredNorm(); };
  for (TetId t : mesh.leaves()) {
    std::array<Vec3, 4> x;
    for (std::size_t k = 0; k < 4; ++k) x[k] = mesh.node(mesh.tet(t).vertices[k]).coords;
    s += tet_squared_norm(x, fn, singular, graded_levels);
  }
  return s;
}

double fichera_gradient_norm(double alpha) {
  static std::mutex guard;
  static std::map<double, double> cache;
  std::lock_guard<std::mutex> lock(guard);
  if (auto it = cache.find(alpha); it != cache.end()) return it->second;

  const auto cubes = fichera_cubes();
  auto mesh = MeshForest::kuhn(cubes);
  for (int k = 0; k < kDenominatorRefinements; ++k) {
    const auto leaves = mesh.leaves();
    mesh.refine_set(leaves, RefineMode::conforming, 0);
  }
  const VectorField grad = [alpha](const Vec3& x) -> Vec3 {
    return alpha * std::pow(x.norm(), alpha - 2.0) * x;
  };
  const double norm = std::sqrt(l2_norm_squared(mesh, grad));
  cache.emplace(alpha, norm);
  return norm;
}

double relative_h1_error(std::span<const ElementLocal> elements, std::span<const double> nodal,
                         const VectorField& exact_grad, double denominator, const Vec3& singular,
                         int graded_levels) {
  if (!(denominator > 0.0)) throw std::invalid_argument("relative_h1_error: denominator must be positive");
  double s = 0.0;
  for (const auto& el : elements) {
    const auto v = gather(el, nodal);
    const Vec3 g = element_projector(el, std::span<const double>(v.data(), el.size())).grad;
    s += tet_squared_norm(el.vertex_coords, [&](const Vec3& x) { return (exact_grad(x) - g).squaredNorm(); },
                          singular, graded_levels);
  }
  return std::sqrt(s) / denominator;
}

}  // namespace avem
