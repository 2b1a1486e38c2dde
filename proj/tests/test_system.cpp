#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avem/system.hpp"
#include "fixtures.hpp"

#include <Eigen/Dense>

#include <random>

using namespace avem;

namespace {

Eigen::MatrixXd dense(const CsrMatrix& A) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.n), static_cast<Eigen::Index>(A.n));
  for (std::size_t i = 0; i < A.n; ++i)
    for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
      D(static_cast<Eigen::Index>(i), A.col[k]) = A.val[k];
  return D;
}

std::vector<ElementLocal> elements_of(const MeshForest& mesh) {
  std::vector<ElementLocal> out;
  for (TetId t : mesh.leaves()) out.push_back(build_element(mesh, t));
  return out;
}

}  // namespace

TEST_CASE("CSR assembly from upper triplets") {
  std::vector<std::tuple<int, int, double>> upper{{0, 0, 2.0}, {0, 2, -1.0}, {1, 1, 3.0}, {0, 2, -0.5}, {2, 2, 4.0}};
  const auto A = CsrMatrix::from_upper_triplets(3, upper);
  Eigen::Matrix3d expected;
  expected << 2, 0, -1.5, 0, 3, 0, -1.5, 0, 4;
  CHECK((dense(A) - expected).norm() == 0.0);
  CHECK(A.nnz() == 5);
  CHECK(A.at(2, 0) == -1.5);
  std::vector<std::tuple<int, int, double>> lower{{1, 0, 1.0}};
  CHECK_THROWS_AS(CsrMatrix::from_upper_triplets(2, lower), std::invalid_argument);
}

TEST_CASE("CG agrees with dense Cholesky") {
  std::mt19937 rng(7);
  std::normal_distribution<double> N;
  for (int n : {1, 5, 40}) {
    Eigen::MatrixXd R(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) R(i, j) = N(rng);
    const Eigen::MatrixXd S = R * R.transpose() + n * Eigen::MatrixXd::Identity(n, n);
    std::vector<std::tuple<int, int, double>> upper;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) upper.emplace_back(i, j, S(i, j));
    const auto A = CsrMatrix::from_upper_triplets(static_cast<std::size_t>(n), upper);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = N(rng);
    const auto cg = solve_cg(A, std::span<const double>(b.data(), static_cast<std::size_t>(n)), 1e-13, 1000);
    const Eigen::VectorXd x = S.llt().solve(b);
    for (int i = 0; i < n; ++i) CHECK(cg.x[static_cast<std::size_t>(i)] == doctest::Approx(x(i)).epsilon(1e-9));
  }
}

TEST_CASE("CG failure modes") {
  std::vector<std::tuple<int, int, double>> indefinite{{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 1.0}};
  const auto A = CsrMatrix::from_upper_triplets(2, indefinite);
  const std::vector<double> b{1.0, -1.0};
  CHECK_THROWS_AS(solve_cg(A, b, 1e-12, 50), SolverError);

  std::vector<std::tuple<int, int, double>> spd{{0, 0, 4.0}, {0, 1, 1.0}, {1, 1, 3.0}, {2, 2, 1.0}, {1, 2, 0.9}};
  const auto B = CsrMatrix::from_upper_triplets(3, spd);
  const std::vector<double> c{1.0, 2.0, 3.0};
  try {
    solve_cg(B, c, 1e-15, 1);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual_history.size() == 2);
  }
  CHECK(default_cg_max_iter(100) == 1200);
}

TEST_CASE("assembly validation") {
  const auto mesh = MeshForest::kuhn(testing::block_cubes());
  const auto el = elements_of(mesh);
  std::vector<ElementData> data(el.size());
  const ScalarField zero = [](const Vec3&) { return 0.0; };
  CHECK_THROWS_AS(assemble(mesh, el, data, 0.0, zero), std::invalid_argument);
  std::vector<ElementData> short_data(1);
  CHECK_THROWS_AS(assemble(mesh, el, short_data, 1.0, zero), std::invalid_argument);
  const auto sys = assemble(mesh, el, data, 1.0, zero);
  CHECK(sys.dofs.n_free() == 1);  // the centre of the block
}

TEST_CASE("patch test with hanging nodes, serial and threaded") {
  const auto mesh = testing::random_admissible_mesh(3, 2, 4);
  const auto el = elements_of(mesh);
  std::vector<ElementData> data(el.size());
  const ScalarField u = [](const Vec3& x) { return 1.0 + 2.0 * x(0) - x(1) + 0.5 * x(2); };
  const auto sys = assemble(mesh, el, data, 1.0, u);
  const auto threaded = assemble(mesh, el, data, 1.0, u, 4);
  CHECK(sys.matrix.val == threaded.matrix.val);
  CHECK(sys.rhs == threaded.rhs);

  const auto cg = solve_cg(sys.matrix, sys.rhs, 1e-14, default_cg_max_iter(sys.dofs.n_free()));
  const auto nodal = reconstitute(sys.dofs, cg.x);
  for (std::size_t i = 0; i < nodal.size(); ++i) CHECK(nodal[i] == doctest::Approx(u(mesh.nodes()[i].coords)).epsilon(1e-10));
  CHECK(quasi_orthogonality_residual(mesh, el, data, nodal, sys) < 1e-12);
}

TEST_CASE("quasi-orthogonality residual detects a perturbed solution") {
  const auto mesh = testing::random_admissible_mesh(9, 2, 4);
  const auto el = elements_of(mesh);
  std::vector<ElementData> data(el.size());
  for (auto& d : data) {
    d.c = 1.0;
    d.f = 2.0;
  }
  const ScalarField g = [](const Vec3& x) { return x.squaredNorm(); };
  const auto sys = assemble(mesh, el, data, 1.0, g);
  const auto cg = solve_cg(sys.matrix, sys.rhs, 1e-12, default_cg_max_iter(sys.dofs.n_free()));
  auto nodal = reconstitute(sys.dofs, cg.x);
  CHECK(quasi_orthogonality_residual(mesh, el, data, nodal, sys) < 1e-10);
  nodal[static_cast<std::size_t>(sys.dofs.dof_to_node.front())] += 0.1;
  CHECK(quasi_orthogonality_residual(mesh, el, data, nodal, sys) > 1e-4);
}

TEST_CASE("a mesh without interior nodes has no free dofs") {
  const std::vector<UnitCube> cube{{{0, 0, 0}}};
  const auto mesh = MeshForest::kuhn(cube);
  const auto el = elements_of(mesh);
  std::vector<ElementData> data(el.size());
  const auto sys = assemble(mesh, el, data, 1.0, [](const Vec3&) { return 1.0; });
  CHECK(sys.dofs.n_free() == 0);
  const auto cg = solve_cg(sys.matrix, sys.rhs, 1e-10, 10);
  CHECK(cg.x.empty());
  CHECK(reconstitute(sys.dofs, cg.x) == std::vector<double>(8, 1.0));
}
