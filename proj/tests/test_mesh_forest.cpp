#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avem/mesh_forest.hpp"
#include "fixtures.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace avem;

namespace {

// Six times the volume: the triple products are exact on dyadic coordinates.
double leaf_volume(const MeshForest& mesh) {
  double v = 0.0;
  for (TetId t : mesh.leaves()) {
    const auto& x = mesh.tet(t).vertices;
    const Vec3& a = mesh.node(x[0]).coords;
    v += std::abs((mesh.node(x[1]).coords - a).dot((mesh.node(x[2]).coords - a).cross(mesh.node(x[3]).coords - a)));
  }
  return v / 6.0;
}

double triangle_area(const MeshForest& mesh, const std::array<NodeId, 3>& n) {
  const Vec3& a = mesh.node(n[0]).coords;
  return 0.5 * (mesh.node(n[1]).coords - a).cross(mesh.node(n[2]).coords - a).norm();
}

}  // namespace

TEST_CASE("single Kuhn cube") {
  const std::vector<UnitCube> cube{{{0, 0, 0}}};
  const auto mesh = MeshForest::kuhn(cube);
  CHECK(mesh.n_leaves() == 6);
  CHECK(mesh.nodes().size() == 8);
  CHECK(leaf_volume(mesh) == 1.0);
  CHECK(mesh.is_conforming());
  for (TetId t : mesh.leaves()) {
    const auto& rec = mesh.tet(t);
    CHECK(rec.tag == 3);
    CHECK(mesh.node(rec.vertices[0]).coords == Vec3(0, 0, 0));
    CHECK(mesh.node(rec.vertices[3]).coords == Vec3(1, 1, 1));
  }
}

TEST_CASE("Fichera initial mesh") {
  const auto mesh = MeshForest::kuhn(fichera_cubes());
  CHECK(mesh.n_leaves() == 42);
  CHECK(mesh.nodes().size() == 26);
  CHECK(leaf_volume(mesh) == 7.0);
  const auto mask = mesh.boundary_node_mask();
  CHECK(std::all_of(mask.begin(), mask.end(), [](char b) { return b != 0; }));
  for (TetId t : mesh.leaves())
    for (NodeId v : mesh.tet(t).vertices) CHECK(mesh.node(v).coords.maxCoeff() <= 1.0);
}

TEST_CASE("Kuhn input validation") {
  const std::vector<UnitCube> twice{{{0, 0, 0}}, {{0, 0, 0}}};
  CHECK_THROWS_AS(MeshForest::kuhn(twice), std::invalid_argument);
  const std::vector<UnitCube> apart{{{0, 0, 0}}, {{2, 0, 0}}};
  CHECK_THROWS_AS(MeshForest::kuhn(apart), std::invalid_argument);
  CHECK_THROWS_AS(MeshForest::kuhn({}), std::invalid_argument);
}

TEST_CASE("bisection follows the tag cycle and halves the volume") {
  const std::vector<UnitCube> cube{{{0, 0, 0}}};
  auto mesh = MeshForest::kuhn(cube);
  const TetId t = mesh.leaves().front();
  const auto parent = mesh.tet(t);
  const auto r = mesh.bisect(t);
  const auto& c1 = mesh.tet(r.child1);
  const auto& c2 = mesh.tet(r.child2);
  CHECK(c1.tag == 2);
  CHECK(c2.tag == 2);
  CHECK(mesh.node(r.midpoint).coords == Vec3(0.5, 0.5, 0.5));
  CHECK(c1.vertices == std::array<NodeId, 4>{parent.vertices[0], parent.vertices[1], parent.vertices[2], r.midpoint});
  CHECK(c2.vertices == std::array<NodeId, 4>{parent.vertices[1], parent.vertices[2], parent.vertices[3], r.midpoint});
  const double half = mesh.element_geometry(t).volume / 2.0;
  CHECK(mesh.element_geometry(r.child1).volume == half);
  CHECK(mesh.element_geometry(r.child2).volume == half);
  CHECK_THROWS_AS(mesh.bisect(t), std::invalid_argument);
}

TEST_CASE("one bisection in a cube hangs the centre on the other five") {
  const std::vector<UnitCube> cube{{{0, 0, 0}}};
  auto mesh = MeshForest::kuhn(cube);
  const std::vector<TetId> marked{mesh.leaves().front()};
  const auto rep = mesh.refine_set(marked, RefineMode::admissible, 1);
  CHECK(rep.n_marked == 1);
  CHECK(rep.n_refined == 1);
  CHECK(mesh.n_leaves() == 7);
  CHECK(mesh.max_lambda() == 1);
  int with_hanging = 0;
  for (TetId t : mesh.leaves()) {
    const auto nodes = mesh.element_boundary_nodes(t);
    if (mesh.has_hanging_node(t)) {
      ++with_hanging;
      CHECK(nodes.size() == 5);
    } else {
      CHECK(nodes.size() == 4);
    }
  }
  CHECK(with_hanging == 5);

  auto conforming = mesh;
  CHECK(conforming.conforming_closure() == 5);
  CHECK(conforming.n_leaves() == 12);
  CHECK(conforming.is_conforming());
  CHECK(conforming.max_lambda() == 0);
}

TEST_CASE("refine_set rejects bad input") {
  auto mesh = MeshForest::kuhn(testing::block_cubes());
  const std::vector<TetId> first{mesh.leaves().front()};
  CHECK_THROWS_AS(mesh.refine_set(first, RefineMode::admissible, 0), std::invalid_argument);
  mesh.refine_set(first, RefineMode::admissible, 2);
  CHECK_THROWS_AS(mesh.refine_set(first, RefineMode::admissible, 2), std::invalid_argument);
  const std::vector<TetId> none;
  const auto rep = mesh.refine_set(none, RefineMode::admissible, 2);
  CHECK(rep.n_refined == 0);
}

TEST_CASE("uniform refinement of the Fichera mesh doubles the cells") {
  auto mesh = MeshForest::kuhn(fichera_cubes());
  for (int k = 1; k <= 5; ++k) {
    const auto leaves = mesh.leaves();
    mesh.refine_set(leaves, RefineMode::conforming, 0);
    CHECK(mesh.n_leaves() == (42u << k));
    CHECK(mesh.is_conforming());
    CHECK(leaf_volume(mesh) == 7.0);
  }
}

TEST_CASE("admissible refinement invariants on random meshes") {
  for (int lambda = 1; lambda <= 3; ++lambda) {
    for (unsigned seed = 1; seed <= 4; ++seed) {
      CAPTURE(lambda);
      CAPTURE(seed);
      const auto mesh = testing::random_admissible_mesh(seed * 17 + static_cast<unsigned>(lambda), lambda, 4);
      CHECK(mesh.max_lambda() <= lambda);
      CHECK(leaf_volume(mesh) == 8.0);

      std::map<std::pair<FacetId, TetId>, TetId> seen;
      for (TetId t : mesh.leaves()) {
        // No leaf whose vertices all share one positive index.
        std::set<int> lambdas;
        for (NodeId v : mesh.tet(t).vertices) lambdas.insert(mesh.node(v).lambda);
        CHECK_FALSE((lambdas.size() == 1 && *lambdas.begin() > 0));

        const auto chain = mesh.ancestor_chain(t);
        if (!chain.empty()) CHECK(static_cast<int>(chain.size()) - 1 <= 3 * (lambda - 1));

        // The interface facets partition every face.
        const auto geom = mesh.element_geometry(t);
        std::array<double, 4> area{};
        for (const auto& f : mesh.interface_facets(t)) {
          area[static_cast<std::size_t>(f.local_face)] += triangle_area(mesh, mesh.facet(f.facet).nodes);
          if (!f.on_boundary()) seen[{f.facet, t}] = f.neighbor;
        }
        for (std::size_t k = 0; k < 4; ++k) CHECK(area[k] == doctest::Approx(geom.face_area[k]).epsilon(1e-14));
      }
      // Neighbor relations are symmetric.
      for (const auto& [key, nb] : seen) {
        auto it = seen.find({key.first, nb});
        REQUIRE(it != seen.end());
        CHECK(it->second == key.second);
      }

      auto closed = mesh;
      closed.conforming_closure();
      CHECK(closed.is_conforming());
      CHECK(closed.max_lambda() == 0);
      for (TetId t : closed.leaves()) CHECK_FALSE(closed.has_hanging_node(t));
    }
  }
}

TEST_CASE("hanging node indices follow the parent edge") {
  const auto mesh = testing::random_admissible_mesh(5, 3, 5);
  for (const auto& n : mesh.nodes()) {
    if (!n.parent_edge) {
      CHECK(n.lambda == 0);
      continue;
    }
    if (n.is_proper) {
      CHECK(n.lambda == 0);
    } else {
      const auto [a, b] = *n.parent_edge;
      CHECK(n.lambda == std::max(mesh.node(a).lambda, mesh.node(b).lambda) + 1);
      CHECK(n.coords == 0.5 * (mesh.node(a).coords + mesh.node(b).coords));
    }
  }
}

TEST_CASE("refine_toward makes a node a vertex of every element containing it") {
  const std::vector<UnitCube> cube{{{0, 0, 0}}};
  auto mesh = MeshForest::kuhn(cube);
  const std::vector<TetId> marked{mesh.leaves().front()};
  mesh.refine_set(marked, RefineMode::admissible, 1);
  NodeId centre = kNone;
  for (std::size_t i = 0; i < mesh.nodes().size(); ++i)
    if (!mesh.nodes()[i].is_proper) centre = static_cast<NodeId>(i);
  REQUIRE(centre != kNone);
  for (TetId t : mesh.leaves())
    if (mesh.has_hanging_node(t)) mesh.refine_toward(centre, t);
  mesh.recompute_node_status();
  CHECK(mesh.is_conforming());
  CHECK(mesh.n_leaves() == 12);
}
