// The Fichera corner benchmark u = |x|^alpha and the relative H1 error.
#pragma once

#include "avem/adaptive_driver.hpp"

namespace avem {

/// K = I, c = 1, f = -alpha(alpha+1)|x|^(alpha-2) + |x|^alpha, g = u.
/// alpha must lie in (0,1).
ProblemSpec fichera_problem(double alpha);

/// ||grad u||_{L2} of the Fichera solution, computed once per alpha on a
/// uniform refinement of the initial mesh and cached.
double fichera_gradient_norm(double alpha);

/// sqrt(sum_E ||grad_exact - grad Pi_E u||^2) / denominator. Elements with a
/// vertex at `singular` use graded quadrature.
double relative_h1_error(std::span<const ElementLocal> elements, std::span<const double> nodal,
                         const VectorField& exact_grad, double denominator,
                         const Vec3& singular = Vec3::Zero(), int graded_levels = 3);

/// sum_E ||field||^2 over the leaves of `mesh` with the same quadrature.
double l2_norm_squared(const MeshForest& mesh, const VectorField& field,
                       const Vec3& singular = Vec3::Zero(), int graded_levels = 3);

}  // namespace avem
