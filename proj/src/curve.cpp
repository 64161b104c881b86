#include "tropmod/curve.hpp"

#include <stdexcept>

namespace tropmod {

TropicalCurve TropicalCurve::make(Cone base, MarkedGraph graph, std::vector<Vec> lengths) {
  graph.validate();
  if (!is_stable(graph)) throw std::invalid_argument("curve over an unstable graph");
  if (static_cast<int>(lengths.size()) != graph.num_edges()) {
    throw std::invalid_argument("length count does not match edge count");
  }
  for (const Vec& d : lengths) {
    DualElement::make(base, d);  // validates nonnegativity on the base
    if (is_zero(d)) throw std::invalid_argument("edge of length zero");
  }
  return TropicalCurve{std::move(base), std::move(graph), std::move(lengths)};
}

PullbackResult pullback(const ConeMorphism& f, const TropicalCurve& c) {
  if (!(f.target == c.base)) throw std::invalid_argument("pullback: base mismatch");
  int ne = c.graph.num_edges();
  std::vector<Vec> pulled(ne);
  std::vector<int> dying;
  for (int e = 0; e < ne; ++e) {
    pulled[e] = pullback_element(f, c.length(e)).covector;
    if (is_zero(pulled[e])) dying.push_back(e);
  }
  auto [gc, witness] = contract(c.graph, dying);
  // Carry surviving lengths across the contraction witness.
  std::vector<Vec> lengths(gc.num_edges());
  auto src_edges = c.graph.edges();
  for (int e = 0; e < ne; ++e) {
    auto [tv, nf] = witness.flag_image[src_edges[e].first];
    if (tv) continue;
    lengths[gc.edge_of_flag(nf)] = pulled[e];
  }
  PullbackResult out{TropicalCurve::make(f.source, gc, std::move(lengths)), witness};
  return out;
}

std::vector<CurveIsomorphism> isomorphisms(const TropicalCurve& a, const TropicalCurve& b) {
  if (!(a.base == b.base)) throw std::invalid_argument("curve isomorphisms: base cones differ");
  std::vector<CurveIsomorphism> out;
  auto a_edges = a.graph.edges();
  for (const GraphMorphism& iso : isomorphisms(a.graph, b.graph)) {
    bool ok = true;
    for (int e = 0; e < a.graph.num_edges() && ok; ++e) {
      int image_flag = iso.flag_image[a_edges[e].first].second;
      int image_edge = b.graph.edge_of_flag(image_flag);
      if (a.lengths[e] != b.lengths[image_edge]) ok = false;
    }
    if (ok) out.push_back(CurveIsomorphism{iso});
  }
  return out;
}

std::vector<CurveIsomorphism> curve_automorphisms(const TropicalCurve& a) {
  return isomorphisms(a, a);
}

MetricGraph realize_metric(const TropicalCurve& c, const QVec& point) {
  if (!c.base.interior_contains_q(point)) {
    throw std::invalid_argument("realize_metric: point not in the relative interior");
  }
  MetricGraph out;
  out.graph = c.graph;
  out.weights = c.graph.weights;
  for (int e = 0; e < c.graph.num_edges(); ++e) {
    Rat len = dot_q(c.lengths[e], point);
    if (len <= 0) throw std::logic_error("interior point produced a nonpositive length");
    out.lengths.push_back(len);
  }
  return out;
}

}  // namespace tropmod
