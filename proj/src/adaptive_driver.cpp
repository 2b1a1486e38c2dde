#include "avem/adaptive_driver.hpp"

#include "avem/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace avem {

void GalerkinConfig::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in (0,1]");
  if (lambda_max < 0) throw std::invalid_argument("lambda_max must be nonnegative");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(tol >= 0.0)) throw std::invalid_argument("tol must be nonnegative");
  if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw std::invalid_argument("cg_tol must lie in (0,1)");
  if (cg_max_iter < 0) throw std::invalid_argument("cg_max_iter must be nonnegative");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

std::vector<ElementData> approximate_data(const ProblemSpec& problem,
                                          std::span<const ElementLocal> elements,
                                          bool four_point_source) {
  // Degree-2 four-point rule.
  constexpr double a = 0.1381966011250105151795;
  constexpr double b = 1.0 - 3.0 * a;
  std::vector<ElementData> out(elements.size());
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto& el = elements[e];
    const Vec3& xc = el.geom.centroid;
    auto& d = out[e];
    d.K = problem.K(xc);
    d.c = problem.c(xc);
    if (four_point_source) {
      d.f = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        Vec3 x = Vec3::Zero();
        for (std::size_t j = 0; j < 4; ++j) x += (j == k ? b : a) * el.vertex_coords[j];
        d.f += 0.25 * problem.f(x);
      }
    } else {
      d.f = problem.f(xc);
    }
    if (!d.K.allFinite() || !std::isfinite(d.c) || !std::isfinite(d.f))
      throw std::runtime_error("approximate_data: data not finite on element " + std::to_string(el.tet));
    if (d.c < 0.0) throw std::invalid_argument("approximate_data: negative reaction coefficient");
  }
  return out;
}

std::vector<std::size_t> dorfler_mark(std::span<const double> eta2, std::span<const TetId> ids,
                                      double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in (0,1]");
  if (ids.size() != eta2.size()) throw std::invalid_argument("dorfler_mark: size mismatch");
  const double total = std::accumulate(eta2.begin(), eta2.end(), 0.0);
  if (!(total > 0.0)) return {};
  std::vector<std::size_t> order(eta2.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (eta2[i] != eta2[j]) return eta2[i] > eta2[j];
    return ids[i] < ids[j];
  });
  std::vector<std::size_t> marked;
  double sum = 0.0;
  for (std::size_t i : order) {
    if (sum >= theta * total || !(eta2[i] > 0.0)) break;
    marked.push_back(i);
    sum += eta2[i];
  }
  return marked;
}

std::vector<ElementLocal> build_elements(const MeshForest& mesh, std::span<const TetId> leaves,
                                         int threads) {
  std::vector<ElementLocal> elements(leaves.size());
  parallel_for(leaves.size(), threads, [&](std::size_t i) { elements[i] = build_element(mesh, leaves[i]); });
  return elements;
}

std::vector<IterationRecord> galerkin_loop(const ProblemSpec& problem, const GalerkinConfig& config,
                                           const IterationObserver& observer) {
  return galerkin_loop(problem, config, MeshForest::kuhn(problem.domain), observer);
}

std::vector<IterationRecord> galerkin_loop(const ProblemSpec& problem, const GalerkinConfig& config,
                                           MeshForest mesh, const IterationObserver& observer) {
  config.validate();
  if (!problem.f || !problem.g) throw std::invalid_argument("galerkin_loop: problem needs f and g");
  const RefineMode mode = config.lambda_max == 0 ? RefineMode::conforming : RefineMode::admissible;

  std::vector<IterationRecord> records;
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    const auto leaves = mesh.leaves();
    const auto elements = build_elements(mesh, leaves, config.threads);
    const auto data = approximate_data(problem, elements, config.four_point_source);
    const auto system = assemble(mesh, elements, data, config.gamma, problem.g, config.threads);

    IterationRecord rec;
    rec.iter = static_cast<int>(iter);
    rec.ndofs = system.dofs.n_free();
    rec.n_cells = leaves.size();
    rec.lambda_max = mesh.max_lambda();

    CgResult cg;
    try {
      const int max_iter = config.cg_max_iter > 0 ? config.cg_max_iter : default_cg_max_iter(rec.ndofs);
      cg = solve_cg(system.matrix, system.rhs, config.cg_tol, max_iter);
    } catch (const SolverError& err) {
      throw SolverError("iteration " + std::to_string(iter) + ": " + err.what(), err.residual_history);
    }
    rec.cg_iters = cg.iterations;
    const auto u = reconstitute(system.dofs, cg.x);

    const auto est = global_estimate(mesh, elements, data, u, config.gamma, config.threads);
    rec.eta = std::sqrt(est.eta2);
    rec.stab = est.stab;
    rec.stab_ratio = est.ratio;
    rec.quasi_orthogonality = quasi_orthogonality_residual(mesh, elements, data, u, system);
    if (problem.h1_error) rec.h1err = problem.h1_error(mesh, elements, u);

    const bool done = rec.eta < config.tol || rec.ndofs >= config.max_ndofs;
    std::vector<std::size_t> marked;
    if (!done) marked = dorfler_mark(est.eta2_local, leaves, config.theta);
    rec.n_marked = marked.size();
    if (observer) observer(IterationState{mesh, leaves, elements, data, system, u, est, rec});

    if (done || marked.empty()) {
      records.push_back(rec);
      break;
    }
    std::vector<TetId> marked_ids;
    marked_ids.reserve(marked.size());
    for (std::size_t i : marked) marked_ids.push_back(leaves[i]);
    const auto report = mesh.refine_set(marked_ids, mode, config.lambda_max);
    rec.n_refined = report.n_refined;
    records.push_back(rec);
  }
  return records;
}

}  // namespace avem
