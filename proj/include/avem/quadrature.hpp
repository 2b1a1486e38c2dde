#pragma once

#include "avem/mesh_forest.hpp"

#include <array>
#include <functional>

namespace avem {

struct QuadraturePoint {
  std::array<double, 4> barycentric;
  double weight;  // weights sum to 1 (multiply by the volume)
};

/// Degree-5 symmetric rule with 14 points on the tetrahedron.
const std::array<QuadraturePoint, 14>& tet_rule_degree5();

/// Integral of the product of two affine functions over a tetrahedron of
/// volume `volume`, given their values at the four vertices.
double integrate_affine_product(double volume, const std::array<double, 4>& p,
                                const std::array<double, 4>& q);

/// Integral of `fn` over the tetrahedron with the 14-point rule.
double integrate_tet(const std::array<Vec3, 4>& x, const std::function<double(const Vec3&)>& fn);

/// Same rule, but sub-tetrahedra having `singular` as a vertex are split into
/// eight children, `levels` times, before the rule is applied.
double integrate_tet_graded(const std::array<Vec3, 4>& x,
                            const std::function<double(const Vec3&)>& fn, const Vec3& singular,
                            int levels);

}  // namespace avem
