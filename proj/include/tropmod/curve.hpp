#pragma once

#include <vector>

#include "tropmod/cone.hpp"
#include "tropmod/graph.hpp"

namespace tropmod {

// Stable marked graph with a nonzero dual-monoid element on each finite edge,
// over a base cone. Lengths may vanish on proper faces of the base but never
// identically.
struct TropicalCurve {
  Cone base;
  MarkedGraph graph;
  std::vector<Vec> lengths;  // covector on base, indexed by graph edge index

  static TropicalCurve make(Cone base, MarkedGraph graph, std::vector<Vec> lengths);
  DualElement length(int edge) const { return DualElement{lengths[edge]}; }
  int genus() const { return tropmod::genus(graph); }
  int markings() const { return graph.num_legs(); }
};

// Graph isomorphism matching metrics edgewise over a common base.
struct CurveIsomorphism {
  GraphMorphism map;  // source graph -> target graph
};

struct PullbackResult {
  TropicalCurve curve;        // over f.source
  GraphMorphism contraction;  // graph(input) -> graph(output), the witness
};

// Contract exactly the edges whose pulled-back length is zero; surviving
// edges keep pulled-back lengths.
PullbackResult pullback(const ConeMorphism& f, const TropicalCurve& c);

// Same as pullback; the spec-level name that stresses the returned witness.
inline PullbackResult specialize(const ConeMorphism& f, const TropicalCurve& c) {
  return pullback(f, c);
}

std::vector<CurveIsomorphism> isomorphisms(const TropicalCurve& a, const TropicalCurve& b);
std::vector<CurveIsomorphism> curve_automorphisms(const TropicalCurve& a);

struct MetricGraph {
  MarkedGraph graph;
  std::vector<Rat> lengths;  // positive, per edge
  std::vector<int> weights;  // per vertex
};

// Evaluate the metric at a rational point in the relative interior of the
// base; rejects boundary points (pull back to the face first).
MetricGraph realize_metric(const TropicalCurve& c, const QVec& point);

}  // namespace tropmod
