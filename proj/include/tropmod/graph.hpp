#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tropmod {

// Vertex-weighted marked graph in the flag formalism: a flag is a half-edge
// or a leg, rooted at a vertex; the involution pairs half-edges into finite
// edges and fixes legs. Legs carry the marking labels 1..n bijectively.
struct MarkedGraph {
  std::vector<int> weights;       // per vertex
  std::vector<int> flag_vertex;   // root of each flag
  std::vector<int> flag_partner;  // involution; flag_partner[f] == f for a leg
  std::vector<int> flag_label;    // leg label (>= 1) or 0 for half-edges

  int num_vertices() const { return static_cast<int>(weights.size()); }
  int num_flags() const { return static_cast<int>(flag_vertex.size()); }
  int num_legs() const;
  int num_edges() const;

  // Edges as flag pairs (f, partner) with f < partner, sorted by f; the edge
  // index used everywhere (metrics, contraction sets) refers to this order.
  std::vector<std::pair<int, int>> edges() const;
  std::pair<int, int> edge_endpoints(int edge_index) const;
  bool edge_is_loop(int edge_index) const;
  int edge_of_flag(int flag) const;  // -1 for legs
  int leg_flag(int label) const;

  int valence(int v) const;
  bool connected() const;
  void validate() const;  // throws std::invalid_argument on broken invariants

  bool operator==(const MarkedGraph& o) const {
    return weights == o.weights && flag_vertex == o.flag_vertex &&
           flag_partner == o.flag_partner && flag_label == o.flag_label;
  }
};

// Incremental builder; flags are appended in call order.
struct GraphBuilder {
  MarkedGraph g;
  int add_vertex(int weight);
  int add_edge(int u, int v);  // returns first flag index
  int add_leg(int v, int label);
  MarkedGraph build() const;
};

int genus(const MarkedGraph& g);
bool is_stable(const MarkedGraph& g);

// Map of flag sets X = V ⊔ F commuting with root and involution; flags of
// contracted edges land on vertices.
struct GraphMorphism {
  MarkedGraph source;
  MarkedGraph target;
  std::vector<int> vertex_image;                  // per source vertex
  std::vector<std::pair<bool, int>> flag_image;   // (true, v) if contracted to vertex v, else (false, f')
  std::vector<int> contracted_edges;              // sorted source edge indices

  bool is_isomorphism() const { return contracted_edges.empty(); }
  void validate() const;
};

GraphMorphism compose(const GraphMorphism& second, const GraphMorphism& first);
bool same_map(const GraphMorphism& a, const GraphMorphism& b);

// Weighted edge contraction of the edge subset S, with the witnessing
// morphism. Contraction is order independent.
std::pair<MarkedGraph, GraphMorphism> contract(const MarkedGraph& g, const std::vector<int>& S);

// All isomorphisms g1 -> g2 as flag maps (empty when not isomorphic).
std::vector<GraphMorphism> isomorphisms(const MarkedGraph& g1, const MarkedGraph& g2);

// All morphisms g1 -> g2: pairs of an edge subset S of g1 and an isomorphism
// g1/S -> g2, composed into a single flag map.
std::vector<GraphMorphism> morphisms(const MarkedGraph& g1, const MarkedGraph& g2);

std::vector<GraphMorphism> automorphisms(const MarkedGraph& g);

// Invert an isomorphism.
GraphMorphism invert(const GraphMorphism& iso);

// Canonical byte encoding: equal iff isomorphic as weighted marked graphs.
std::string canonical_form(const MarkedGraph& g);

// The canonically relabeled representative of g's isomorphism class.
MarkedGraph canonical_graph(const MarkedGraph& g);

// One representative per isomorphism class of stable weighted n-marked
// genus-g graphs, sorted by (edge count, canonical form). Throws on
// 2g - 2 + n <= 0.
std::vector<MarkedGraph> enumerate_stable(int g, int n);

// The classes admitting no morphism from a strictly larger stable graph.
std::vector<MarkedGraph> enumerate_maximal(int g, int n);

}  // namespace tropmod
