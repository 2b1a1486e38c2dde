#include "avem/mesh_forest.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>

namespace avem {

namespace {

std::uint64_t edge_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::array<NodeId, 3> sorted(std::array<NodeId, 3> k) {
  std::sort(k.begin(), k.end());
  return k;
}

std::array<NodeId, 3> face_corners(const std::array<NodeId, 4>& v, int i) {
  std::array<NodeId, 3> out{};
  int n = 0;
  for (int j = 0; j < 4; ++j)
    if (j != i) out[static_cast<std::size_t>(n++)] = v[static_cast<std::size_t>(j)];
  return out;
}

constexpr std::array<std::array<int, 2>, 6> kTetEdges{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

}  // namespace

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

std::size_t MeshForest::TripleHash::operator()(const std::array<NodeId, 3>& k) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (NodeId v : k) {
    h ^= static_cast<std::uint32_t>(v);
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

std::vector<UnitCube> fichera_cubes() {
  std::vector<UnitCube> cubes;
  for (int i : {-1, 0})
    for (int j : {-1, 0})
      for (int k : {-1, 0})
        if (!(i == 0 && j == 0 && k == 0)) cubes.push_back({{i, j, k}});
  return cubes;
}

MeshForest MeshForest::kuhn(std::span<const UnitCube> cubes) {
  if (cubes.empty()) throw std::invalid_argument("kuhn: no cubes given");

  std::set<std::array<int, 3>> seen;
  for (const auto& c : cubes)
    if (!seen.insert(c.corner).second) throw std::invalid_argument("kuhn: overlapping cubes");

  // Face connectivity.
  std::set<std::array<int, 3>> reached{cubes.front().corner};
  std::queue<std::array<int, 3>> todo;
  todo.push(cubes.front().corner);
  while (!todo.empty()) {
    auto c = todo.front();
    todo.pop();
    for (int axis = 0; axis < 3; ++axis)
      for (int step : {-1, 1}) {
        auto n = c;
        n[static_cast<std::size_t>(axis)] += step;
        if (seen.count(n) && reached.insert(n).second) todo.push(n);
      }
  }
  if (reached.size() != seen.size()) throw std::invalid_argument("kuhn: cubes are not face-connected");

  std::vector<Vec3> coords;
  std::map<std::array<int, 3>, NodeId> lattice;
  auto lattice_node = [&](std::array<int, 3> p) {
    auto [it, inserted] = lattice.emplace(p, static_cast<NodeId>(coords.size()));
    if (inserted) coords.emplace_back(p[0], p[1], p[2]);
    return it->second;
  };

  std::vector<std::array<NodeId, 4>> tets;
  std::array<int, 3> perm{0, 1, 2};
  for (const auto& cube : cubes) {
    std::sort(perm.begin(), perm.end());
    do {
      std::array<int, 3> p = cube.corner;
      std::array<NodeId, 4> t{};
      t[0] = lattice_node(p);
      for (std::size_t s = 0; s < 3; ++s) {
        p[static_cast<std::size_t>(perm[s])] += 1;
        t[s + 1] = lattice_node(p);
      }
      tets.push_back(t);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return from_tetrahedra(std::move(coords), tets, 3);
}

MeshForest MeshForest::from_tetrahedra(std::vector<Vec3> coords,
                                       std::span<const std::array<NodeId, 4>> tets, int tag) {
  if (tag < 1 || tag > 3) throw std::invalid_argument("from_tetrahedra: tag must be in {1,2,3}");
  MeshForest m;
  for (const auto& x : coords) m.add_node(x, std::nullopt);
  for (const auto& t : tets) {
    for (NodeId v : t)
      if (v < 0 || static_cast<std::size_t>(v) >= coords.size())
        throw std::invalid_argument("from_tetrahedra: vertex id out of range");
    const double vol = signed_volume(m.node(t[0]).coords, m.node(t[1]).coords,
                                     m.node(t[2]).coords, m.node(t[3]).coords);
    if (vol == 0.0) throw std::invalid_argument("from_tetrahedra: degenerate tetrahedron");
    TetRecord rec;
    rec.vertices = t;
    rec.tag = tag;
    m.tets_.push_back(rec);
    m.attach_faces(static_cast<TetId>(m.tets_.size() - 1));
    ++m.n_leaves_;
  }
  for (auto& f : m.facets_) f.on_boundary = (f.n_owners == 1);
  return m;
}

NodeId MeshForest::add_node(const Vec3& x, std::optional<std::array<NodeId, 2>> parent) {
  NodeRecord n;
  n.coords = x;
  n.parent_edge = parent;
  n.creation_index = static_cast<std::int64_t>(nodes_.size());
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::optional<NodeId> MeshForest::edge_midpoint(NodeId a, NodeId b) const {
  auto it = edge_midpoints_.find(edge_key(a, b));
  if (it == edge_midpoints_.end()) return std::nullopt;
  return it->second;
}

NodeId MeshForest::midpoint_node(NodeId a, NodeId b) {
  if (auto m = edge_midpoint(a, b)) return *m;
  const Vec3 x = 0.5 * (node(a).coords + node(b).coords);
  const NodeId m = add_node(x, std::array<NodeId, 2>{std::min(a, b), std::max(a, b)});
  edge_midpoints_.emplace(edge_key(a, b), m);
  return m;
}

std::optional<FacetId> MeshForest::find_facet(std::array<NodeId, 3> key) const {
  auto it = facet_index_.find(sorted(key));
  if (it == facet_index_.end()) return std::nullopt;
  return it->second;
}

FacetId MeshForest::find_or_create_facet(std::array<NodeId, 3> key) {
  key = sorted(key);
  auto it = facet_index_.find(key);
  if (it != facet_index_.end()) return it->second;
  FacetRecord f;
  f.nodes = key;
  facets_.push_back(f);
  const auto id = static_cast<FacetId>(facets_.size() - 1);
  facet_index_.emplace(key, id);
  return id;
}

void MeshForest::split_facet(FacetId f, NodeId a, NodeId b, NodeId m) {
  const std::array<NodeId, 2> edge{std::min(a, b), std::max(a, b)};
  if (facets_[static_cast<std::size_t>(f)].has_children()) {
    if (facets_[static_cast<std::size_t>(f)].split_edge != edge)
      throw std::logic_error("facet bisected along two different edges");
    return;
  }
  const auto& nodes = facets_[static_cast<std::size_t>(f)].nodes;
  NodeId c = kNone;
  for (NodeId v : nodes)
    if (v != a && v != b) c = v;
  const bool boundary = facets_[static_cast<std::size_t>(f)].on_boundary;

  std::array<FacetId, 2> kids{};
  const std::array<std::array<NodeId, 3>, 2> halves{{{a, m, c}, {m, b, c}}};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto key = sorted(halves[i]);
    if (facet_index_.count(key)) throw std::logic_error("split facet already recorded");
    FacetRecord child;
    child.nodes = key;
    child.parent = f;
    child.on_boundary = boundary;
    facets_.push_back(child);
    kids[i] = static_cast<FacetId>(facets_.size() - 1);
    facet_index_.emplace(key, kids[i]);
  }
  auto& rec = facets_[static_cast<std::size_t>(f)];
  rec.children = kids;
  rec.split_edge = edge;
}

void MeshForest::add_owner(FacetId f, TetId t, int local_face) {
  auto& rec = facets_[static_cast<std::size_t>(f)];
  if (rec.n_owners == 2) throw std::logic_error("facet owned by more than two leaves");
  rec.owners[static_cast<std::size_t>(rec.n_owners++)] = {t, local_face};
}

void MeshForest::remove_owner(FacetId f, TetId t) {
  auto& rec = facets_[static_cast<std::size_t>(f)];
  for (int i = 0; i < rec.n_owners; ++i) {
    if (rec.owners[static_cast<std::size_t>(i)].tet == t) {
      rec.owners[static_cast<std::size_t>(i)] = rec.owners[static_cast<std::size_t>(rec.n_owners - 1)];
      rec.owners[static_cast<std::size_t>(rec.n_owners - 1)] = {};
      --rec.n_owners;
      return;
    }
  }
  throw std::logic_error("facet ownership record missing");
}

void MeshForest::attach_faces(TetId t) {
  for (int i = 0; i < 4; ++i) {
    const FacetId f = find_or_create_facet(face_corners(tet(t).vertices, i));
    tets_[static_cast<std::size_t>(t)].faces[static_cast<std::size_t>(i)] = f;
    add_owner(f, t, i);
  }
}

BisectionResult MeshForest::bisect(TetId t) {
  if (t < 0 || static_cast<std::size_t>(t) >= tets_.size())
    throw std::invalid_argument("bisect: unknown element");
  const TetRecord parent = tet(t);
  if (!parent.is_leaf) throw std::invalid_argument("bisect: element is not a leaf");
  if (parent.generation + 1 > kMaxGeneration)
    throw std::runtime_error("bisect: refinement depth guard exceeded (generation " +
                             std::to_string(parent.generation + 1) + ")");

  const auto k = static_cast<std::size_t>(parent.tag);
  const auto& v = parent.vertices;
  const NodeId m = midpoint_node(v[0], v[k]);

  for (std::size_t j = 1; j < 4; ++j)
    if (j != k) split_facet(parent.faces[j], v[0], v[k], m);
  for (FacetId f : parent.faces) remove_owner(f, t);

  TetRecord c1, c2;
  c1.vertices = v;
  c1.vertices[k] = m;
  for (std::size_t i = 0; i < k; ++i) c2.vertices[i] = v[i + 1];
  c2.vertices[k] = m;
  for (std::size_t i = k + 1; i < 4; ++i) c2.vertices[i] = v[i];
  const int child_tag = parent.tag == 1 ? 3 : parent.tag - 1;
  for (TetRecord* c : {&c1, &c2}) {
    c->tag = child_tag;
    c->parent = t;
    c->generation = parent.generation + 1;
  }

  BisectionResult r;
  tets_.push_back(c1);
  r.child1 = static_cast<TetId>(tets_.size() - 1);
  tets_.push_back(c2);
  r.child2 = static_cast<TetId>(tets_.size() - 1);
  r.midpoint = m;
  attach_faces(r.child1);
  attach_faces(r.child2);

  auto& p = tets_[static_cast<std::size_t>(t)];
  p.children = {r.child1, r.child2};
  p.is_leaf = false;
  ++n_leaves_;
  ++n_bisections_;
  return r;
}

void MeshForest::edge_interior_nodes(NodeId a, NodeId b, std::vector<NodeId>& out) const {
  const auto m = edge_midpoint(a, b);
  if (!m) return;
  edge_interior_nodes(a, *m, out);
  out.push_back(*m);
  edge_interior_nodes(*m, b, out);
}

std::vector<NodeId> MeshForest::facet_cycle(const std::array<NodeId, 3>& corners) const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < 3; ++i) {
    out.push_back(corners[i]);
    edge_interior_nodes(corners[i], corners[(i + 1) % 3], out);
  }
  return out;
}

void MeshForest::collect_face_nodes(FacetId f, std::vector<NodeId>& out) const {
  const auto& rec = facet(f);
  if (rec.has_children()) {
    collect_face_nodes(rec.children[0], out);
    collect_face_nodes(rec.children[1], out);
    return;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    out.push_back(rec.nodes[i]);
    edge_interior_nodes(rec.nodes[i], rec.nodes[(i + 1) % 3], out);
  }
}

std::vector<NodeId> MeshForest::element_boundary_nodes(TetId t) const {
  const auto& rec = tet(t);
  std::vector<NodeId> extra;
  for (FacetId f : rec.faces) collect_face_nodes(f, extra);
  std::sort(extra.begin(), extra.end());
  extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
  std::vector<NodeId> out(rec.vertices.begin(), rec.vertices.end());
  for (NodeId n : extra)
    if (std::find(rec.vertices.begin(), rec.vertices.end(), n) == rec.vertices.end())
      out.push_back(n);
  return out;
}

std::optional<FacetOwner> MeshForest::owner_across(FacetId f, TetId self) const {
  for (FacetId g = f; g != kNone; g = facet(g).parent) {
    const auto& rec = facet(g);
    for (int i = 0; i < rec.n_owners; ++i)
      if (rec.owners[static_cast<std::size_t>(i)].tet != self)
        return rec.owners[static_cast<std::size_t>(i)];
  }
  return std::nullopt;
}

void MeshForest::collect_interface(FacetId f, TetId self, int local_face,
                                   std::vector<InterfaceFacet>& out) const {
  const auto& rec = facet(f);
  if (rec.n_owners > 0) {
    if (rec.n_owners != 1 || rec.owners[0].tet == self)
      throw std::logic_error("inconsistent facet ownership below a leaf face");
    out.push_back({f, local_face, rec.owners[0].tet});
    return;
  }
  if (!rec.has_children()) throw std::logic_error("dangling facet without owner");
  collect_interface(rec.children[0], self, local_face, out);
  collect_interface(rec.children[1], self, local_face, out);
}

std::vector<InterfaceFacet> MeshForest::interface_facets(TetId t) const {
  const auto& rec = tet(t);
  if (!rec.is_leaf) throw std::invalid_argument("interface_facets: element is not a leaf");
  std::vector<InterfaceFacet> out;
  for (int i = 0; i < 4; ++i) {
    const FacetId f = rec.faces[static_cast<std::size_t>(i)];
    const auto& fr = facet(f);
    if (fr.has_children()) {
      collect_interface(fr.children[0], t, i, out);
      collect_interface(fr.children[1], t, i, out);
      continue;
    }
    if (auto owner = owner_across(f, t)) {
      out.push_back({f, i, owner->tet});
    } else {
      if (!fr.on_boundary) throw std::logic_error("interior facet without a neighbor");
      out.push_back({f, i, kNone});
    }
  }
  return out;
}

std::vector<TetId> MeshForest::ancestor_chain(TetId t) const {
  auto has_proper = [&](TetId id) {
    for (NodeId v : tet(id).vertices)
      if (node(v).is_proper) return true;
    return false;
  };
  std::vector<TetId> chain;
  if (has_proper(t)) return chain;
  for (TetId cur = t; cur != kNone; cur = tet(cur).parent) {
    chain.push_back(cur);
    if (has_proper(cur)) return chain;
  }
  throw std::logic_error("ancestor chain reached a root without proper vertices");
}

ElementGeometry MeshForest::element_geometry(TetId t) const {
  const auto& v = tet(t).vertices;
  std::array<Vec3, 4> x;
  for (std::size_t i = 0; i < 4; ++i) x[i] = node(v[i]).coords;
  ElementGeometry g;
  const double sv = signed_volume(x[0], x[1], x[2], x[3]);
  if (sv == 0.0) throw std::runtime_error("element_geometry: degenerate element");
  g.volume = std::abs(sv);
  g.h = std::cbrt(g.volume);
  g.centroid = 0.25 * (x[0] + x[1] + x[2] + x[3]);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto c = face_corners(v, static_cast<int>(i));
    const Vec3& a = node(c[0]).coords;
    Vec3 n = (node(c[1]).coords - a).cross(node(c[2]).coords - a);
    const double twice_area = n.norm();
    n /= twice_area;
    if (n.dot(x[i] - a) > 0.0) n = -n;
    g.face_area[i] = 0.5 * twice_area;
    g.face_normal[i] = n;
  }
  return g;
}

bool MeshForest::has_hanging_node(TetId t) const {
  const auto& v = tet(t).vertices;
  for (const auto& e : kTetEdges)
    if (edge_midpoint(v[static_cast<std::size_t>(e[0])], v[static_cast<std::size_t>(e[1])]))
      return true;
  return false;
}

std::vector<TetId> MeshForest::leaves() const {
  std::vector<TetId> out;
  out.reserve(n_leaves_);
  for (std::size_t i = 0; i < tets_.size(); ++i)
    if (tets_[i].is_leaf) out.push_back(static_cast<TetId>(i));
  return out;
}

bool MeshForest::is_conforming() const {
  for (TetId t : leaves())
    if (has_hanging_node(t)) return false;
  return true;
}

std::vector<char> MeshForest::boundary_node_mask() const {
  std::vector<char> mask(nodes_.size(), 0);
  std::vector<NodeId> cycle;
  for (TetId t : leaves()) {
    for (FacetId f : tet(t).faces) {
      const auto& rec = facet(f);
      if (!rec.on_boundary) continue;
      cycle.clear();
      collect_face_nodes(f, cycle);
      for (NodeId n : cycle) mask[static_cast<std::size_t>(n)] = 1;
    }
  }
  return mask;
}

void MeshForest::recompute_node_status() {
  std::vector<char> hanging(nodes_.size(), 0);
  for (TetId t : leaves()) {
    const auto bn = element_boundary_nodes(t);
    for (std::size_t i = 4; i < bn.size(); ++i) hanging[static_cast<std::size_t>(bn[i])] = 1;
  }
  max_lambda_ = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    n.is_proper = !hanging[i];
    if (n.is_proper) {
      n.lambda = 0;
      continue;
    }
    if (!n.parent_edge) throw std::logic_error("hanging node without parent edge");
    const auto [a, b] = *n.parent_edge;
    n.lambda = std::max(node(a).lambda, node(b).lambda) + 1;
    max_lambda_ = std::max(max_lambda_, n.lambda);
  }
}

void MeshForest::refine_toward_impl(NodeId x, TetId t, std::size_t& count) {
  const TetRecord& rec = tet(t);
  if (!rec.is_leaf) {
    const auto kids = rec.children;
    refine_toward_impl(x, kids[0], count);
    refine_toward_impl(x, kids[1], count);
    return;
  }
  if (std::find(rec.vertices.begin(), rec.vertices.end(), x) != rec.vertices.end()) return;
  const auto bn = element_boundary_nodes(t);
  if (std::find(bn.begin(), bn.end(), x) == bn.end()) return;
  const auto r = bisect(t);
  ++count;
  refine_toward_impl(x, r.child1, count);
  refine_toward_impl(x, r.child2, count);
}

std::size_t MeshForest::refine_toward(NodeId x, TetId t) {
  std::size_t count = 0;
  refine_toward_impl(x, t, count);
  return count;
}

std::size_t MeshForest::make_admissible(int lambda_max) {
  if (lambda_max < 1) throw std::invalid_argument("make_admissible: lambda_max must be >= 1");
  constexpr int kMaxSweeps = 1000;
  recompute_node_status();
  std::size_t extra = 0;
  int sweeps = 0;
  while (max_lambda_ > lambda_max) {
    if (++sweeps > kMaxSweeps)
      throw std::runtime_error("make_admissible: no termination after " +
                               std::to_string(kMaxSweeps) + " sweeps, max lambda " +
                               std::to_string(max_lambda_));
    std::vector<std::pair<NodeId, TetId>> work;
    for (TetId t : leaves()) {
      const auto bn = element_boundary_nodes(t);
      for (std::size_t i = 4; i < bn.size(); ++i)
        if (node(bn[i]).lambda > lambda_max) work.emplace_back(bn[i], t);
    }
    std::sort(work.begin(), work.end());
    for (const auto& [x, t] : work) extra += refine_toward(x, t);
    recompute_node_status();
  }
  return extra;
}

std::size_t MeshForest::conforming_closure() {
  constexpr int kMaxSweeps = 10000;
  std::size_t count = 0;
  for (int sweep = 0;; ++sweep) {
    if (sweep > kMaxSweeps) throw std::runtime_error("conforming_closure: no termination");
    std::vector<TetId> todo;
    for (TetId t : leaves())
      if (has_hanging_node(t)) todo.push_back(t);
    if (todo.empty()) break;
    for (TetId t : todo) bisect(t);
    count += todo.size();
  }
  recompute_node_status();
  return count;
}

RefinementReport MeshForest::refine_set(std::span<const TetId> marked, RefineMode mode,
                                        int lambda_max) {
  if (mode == RefineMode::admissible && lambda_max < 1)
    throw std::invalid_argument("refine_set: admissible mode needs lambda_max >= 1");
  for (TetId t : marked)
    if (t < 0 || static_cast<std::size_t>(t) >= tets_.size() || !tet(t).is_leaf)
      throw std::invalid_argument("refine_set: marked element is not a leaf");

  RefinementReport report;
  report.n_marked = marked.size();
  const std::size_t before = n_bisections_;
  if (marked.empty()) return report;

  std::vector<TetId> todo(marked.begin(), marked.end());
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
  for (TetId t : todo) bisect(t);

  if (mode == RefineMode::conforming) {
    conforming_closure();
  } else {
    make_admissible(lambda_max);
    if (max_lambda_ > lambda_max) throw std::logic_error("refine_set: admissibility not restored");
  }

  for (TetId t : leaves()) {
    const auto& v = tet(t).vertices;
    const int l0 = node(v[0]).lambda;
    if (l0 > 0 && node(v[1]).lambda == l0 && node(v[2]).lambda == l0 && node(v[3]).lambda == l0)
      throw std::logic_error("leaf with all vertices sharing a positive global index");
  }
  report.n_refined = n_bisections_ - before;
  return report;
}

}  // namespace avem
