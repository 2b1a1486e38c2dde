// Bisection forest for tetrahedral meshes with hanging nodes.
//
// Elements are refined by newest-vertex bisection in Maubach's formulation:
// a tetrahedron (x0,x1,x2,x3) carrying tag k is split at the midpoint of
// (x0,xk). Nodes are never deleted and all coordinates stay dyadic, so node
// identity is carried by the edge-midpoint map instead of geometric lookups.
//
// Faces are kept in a facet forest: splitting a face of a leaf records two
// child facets, and every facet remembers the (at most two) leaves owning it
// as an exact face. Interface facets and boundary nodes of an element are
// read from that forest.
#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace avem {

using Vec3 = Eigen::Vector3d;
using NodeId = std::int32_t;
using TetId = std::int32_t;
using FacetId = std::int32_t;
inline constexpr std::int32_t kNone = -1;

/// Deepest bisection generation accepted before coordinates could stop being
/// exactly representable midpoints.
inline constexpr int kMaxGeneration = 96;

struct NodeRecord {
  Vec3 coords;
  /// Endpoints of the bisected edge; absent for initial-mesh nodes.
  std::optional<std::array<NodeId, 2>> parent_edge;
  std::int64_t creation_index = 0;
  bool is_proper = true;
  int lambda = 0;
};

struct TetRecord {
  std::array<NodeId, 4> vertices{};  // Maubach ordering
  int tag = 3;
  TetId parent = kNone;
  std::array<TetId, 2> children{kNone, kNone};
  int generation = 0;
  bool is_leaf = true;
  /// Facet of the local face opposite vertex i.
  std::array<FacetId, 4> faces{kNone, kNone, kNone, kNone};
};

struct FacetOwner {
  TetId tet = kNone;
  int local_face = -1;
};

struct FacetRecord {
  std::array<NodeId, 3> nodes{};  // sorted ascending
  FacetId parent = kNone;
  std::array<FacetId, 2> children{kNone, kNone};
  std::array<NodeId, 2> split_edge{kNone, kNone};
  std::array<FacetOwner, 2> owners{};
  int n_owners = 0;
  bool on_boundary = false;

  bool has_children() const { return children[0] != kNone; }
};

/// One planar piece of an element face together with whatever lies across it.
struct InterfaceFacet {
  FacetId facet = kNone;
  int local_face = -1;
  TetId neighbor = kNone;  // kNone on the domain boundary

  bool on_boundary() const { return neighbor == kNone; }
};

struct BisectionResult {
  TetId child1 = kNone;
  TetId child2 = kNone;
  NodeId midpoint = kNone;
};

enum class RefineMode { admissible, conforming };

struct RefinementReport {
  std::size_t n_marked = 0;
  std::size_t n_refined = 0;
};

struct ElementGeometry {
  double volume = 0.0;
  double h = 0.0;  // volume^(1/3)
  Vec3 centroid = Vec3::Zero();
  std::array<double, 4> face_area{};
  std::array<Vec3, 4> face_normal{};  // outward, unit; face i opposite vertex i
};

/// Axis-aligned unit cube identified by its lowest corner.
struct UnitCube {
  std::array<int, 3> corner{};
};

class MeshForest {
 public:
  /// Kuhn triangulation: six tetrahedra per cube around the main diagonal.
  static MeshForest kuhn(std::span<const UnitCube> cubes);

  /// Conforming initial mesh from explicit tetrahedra, every element tagged
  /// with `tag`. The caller is responsible for the NVB matching condition.
  static MeshForest from_tetrahedra(std::vector<Vec3> coords,
                                    std::span<const std::array<NodeId, 4>> tets,
                                    int tag = 3);

  BisectionResult bisect(TetId t);

  RefinementReport refine_set(std::span<const TetId> marked, RefineMode mode,
                               int lambda_max);

  /// Restores lambda <= lambda_max; returns the number of extra bisections.
  std::size_t make_admissible(int lambda_max);

  /// Bisects until no leaf carries a hanging node; returns bisection count.
  std::size_t conforming_closure();

  /// Bisects `t` (or its leaf descendants) along NVB until `x` is a vertex
  /// of every descendant containing it. Returns the number of bisections.
  std::size_t refine_toward(NodeId x, TetId t);

  void recompute_node_status();

  /// The four vertices first, then all other nodes on the closed boundary of
  /// the leaf in ascending id order.
  std::vector<NodeId> element_boundary_nodes(TetId t) const;

  std::vector<InterfaceFacet> interface_facets(TetId t) const;

  /// Empty when `t` has a proper vertex; otherwise t, parent, ... up to and
  /// including the first ancestor having a proper vertex.
  std::vector<TetId> ancestor_chain(TetId t) const;

  ElementGeometry element_geometry(TetId t) const;

  /// Nodes strictly inside edge (a,b), ordered from a to b.
  void edge_interior_nodes(NodeId a, NodeId b, std::vector<NodeId>& out) const;

  /// Boundary cycle of a facet: corners in the given order, with the hanging
  /// nodes of each side inserted between them.
  std::vector<NodeId> facet_cycle(const std::array<NodeId, 3>& corners) const;

  std::optional<NodeId> edge_midpoint(NodeId a, NodeId b) const;
  bool has_hanging_node(TetId t) const;
  bool is_conforming() const;

  /// Mask over nodes lying on the domain boundary.
  std::vector<char> boundary_node_mask() const;

  std::vector<TetId> leaves() const;
  std::size_t n_leaves() const { return n_leaves_; }
  int max_lambda() const { return max_lambda_; }
  std::size_t n_bisections() const { return n_bisections_; }

  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const std::vector<TetRecord>& tets() const { return tets_; }
  const std::vector<FacetRecord>& facets() const { return facets_; }
  const NodeRecord& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const TetRecord& tet(TetId id) const { return tets_[static_cast<std::size_t>(id)]; }
  const FacetRecord& facet(FacetId id) const { return facets_[static_cast<std::size_t>(id)]; }

  /// Facet id of a node triple, if recorded.
  std::optional<FacetId> find_facet(std::array<NodeId, 3> nodes) const;

 private:
  struct TripleHash {
    std::size_t operator()(const std::array<NodeId, 3>& k) const noexcept;
  };

  NodeId add_node(const Vec3& x, std::optional<std::array<NodeId, 2>> parent);
  NodeId midpoint_node(NodeId a, NodeId b);
  FacetId find_or_create_facet(std::array<NodeId, 3> nodes);
  void split_facet(FacetId f, NodeId a, NodeId b, NodeId m);
  void add_owner(FacetId f, TetId t, int local_face);
  void remove_owner(FacetId f, TetId t);
  void attach_faces(TetId t);
  void collect_face_nodes(FacetId f, std::vector<NodeId>& out) const;
  void collect_interface(FacetId f, TetId self, int local_face,
                         std::vector<InterfaceFacet>& out) const;
  std::optional<FacetOwner> owner_across(FacetId f, TetId self) const;
  void refine_toward_impl(NodeId x, TetId t, std::size_t& count);

  std::vector<NodeRecord> nodes_;
  std::vector<TetRecord> tets_;
  std::vector<FacetRecord> facets_;
  std::unordered_map<std::uint64_t, NodeId> edge_midpoints_;
  std::unordered_map<std::array<NodeId, 3>, FacetId, TripleHash> facet_index_;
  std::size_t n_leaves_ = 0;
  std::size_t n_bisections_ = 0;
  int max_lambda_ = 0;
};

/// The seven unit cubes tiling (-1,1)^3 minus [0,1]^3.
std::vector<UnitCube> fichera_cubes();

/// Signed volume of the tetrahedron (a,b,c,d).
double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

}  // namespace avem
