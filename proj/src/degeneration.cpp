#include "tropmod/degeneration.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

namespace tropmod {

void NodalDegeneration::validate() const {
  int k = static_cast<int>(component_genus.size());
  if (k == 0) throw std::invalid_argument("degeneration without components");
  for (int g : component_genus) {
    if (g < 0) throw std::invalid_argument("negative component genus");
  }
  for (const Node& nd : nodes) {
    if (nd.a < 0 || nd.a >= k || nd.b < 0 || nd.b >= k) {
      throw std::invalid_argument("node on a missing component");
    }
    DualElement::make(base, nd.delta);
    if (is_zero(nd.delta)) throw std::invalid_argument("node with zero smoothing parameter");
  }
  std::set<int> labels;
  for (const auto& [label, comp] : markings) {
    if (comp < 0 || comp >= k) throw std::invalid_argument("marking on a missing component");
    labels.insert(label);
  }
  int n = static_cast<int>(labels.size());
  if (n > 0 && (*labels.begin() != 1 || *labels.rbegin() != n)) {
    throw std::invalid_argument("marking labels are not 1..n");
  }
  // Connectivity of the component graph.
  std::vector<int> comp(k);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  for (const Node& nd : nodes) comp[find(nd.a)] = find(nd.b);
  for (int v = 0; v < k; ++v) {
    if (find(v) != find(0)) throw std::invalid_argument("degeneration is not connected");
  }
}

TropicalCurve tropicalize(const NodalDegeneration& x) {
  x.validate();
  GraphBuilder b;
  for (int g : x.component_genus) b.add_vertex(g);
  std::vector<Vec> lengths;
  for (const auto& nd : x.nodes) {
    b.add_edge(nd.a, nd.b);
    lengths.push_back(nd.delta);
  }
  for (const auto& [label, comp] : x.markings) b.add_leg(comp, label);
  MarkedGraph g = b.build();
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (2 * g.weights[v] - 2 + g.valence(v) <= 0) {
      throw std::invalid_argument("dual graph unstable at component " + std::to_string(v));
    }
  }
  return TropicalCurve::make(x.base, g, lengths);
}

NodalDegeneration specialize_degeneration(const NodalDegeneration& x, const ConeMorphism& f) {
  if (!(f.target == x.base)) throw std::invalid_argument("specialize: base mismatch");
  // Pull parameters back; nodes whose parameter dies get smoothed, merging
  // their components; the merged geometric genus picks up the first Betti
  // number of the smoothed subgraph.
  int k = static_cast<int>(x.component_genus.size());
  std::vector<int> comp(k);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int y) { return comp[y] == y ? y : comp[y] = find(comp[y]); };
  std::vector<Vec> pulled;
  std::vector<bool> smoothed;
  for (const auto& nd : x.nodes) {
    Vec d = pullback_element(f, DualElement{nd.delta}).covector;
    pulled.push_back(d);
    bool dies = is_zero(d);
    smoothed.push_back(dies);
    if (dies) comp[find(nd.a)] = find(nd.b);
  }
  std::map<int, int> new_id;
  std::vector<int> rep;
  for (int v = 0; v < k; ++v) {
    int r = find(v);
    if (!new_id.count(r)) {
      new_id[r] = static_cast<int>(rep.size());
      rep.push_back(r);
    }
  }
  NodalDegeneration out;
  out.base = f.source;
  out.component_genus.assign(rep.size(), 0);
  std::vector<int> size_of(rep.size(), 0), internal(rep.size(), 0);
  for (int v = 0; v < k; ++v) {
    int c = new_id[find(v)];
    out.component_genus[c] += x.component_genus[v];
    size_of[c]++;
  }
  for (size_t i = 0; i < x.nodes.size(); ++i) {
    if (smoothed[i]) internal[new_id[find(x.nodes[i].a)]]++;
  }
  for (size_t c = 0; c < rep.size(); ++c) {
    out.component_genus[c] += internal[c] - size_of[c] + 1;
  }
  for (size_t i = 0; i < x.nodes.size(); ++i) {
    if (smoothed[i]) continue;
    out.nodes.push_back({new_id[find(x.nodes[i].a)], new_id[find(x.nodes[i].b)], pulled[i]});
  }
  for (const auto& [label, c] : x.markings) out.markings[label] = new_id[find(c)];
  return out;
}

SquareCertificate check_specialization_square(const NodalDegeneration& x, const ConeMorphism& f) {
  TropicalCurve route1 = pullback(f, tropicalize(x)).curve;
  TropicalCurve route2 = tropicalize(specialize_degeneration(x, f));
  if (isomorphisms(route1, route2).empty()) {
    return {false, "specialization square does not commute"};
  }
  return {true, ""};
}

NodalDegeneration glue_at_node(const NodalDegeneration& x1, const NodalDegeneration& x2,
                               const Vec& d) {
  if (!(x1.base == x2.base)) throw std::invalid_argument("glue: base cones differ");
  DualElement::make(x1.base, d);
  if (is_zero(d)) throw std::invalid_argument("glue: zero smoothing parameter");
  int n1 = static_cast<int>(x1.markings.size()) - 1;
  int n2 = static_cast<int>(x2.markings.size()) - 1;
  if (n1 < 0 || n2 < 0) throw std::invalid_argument("glue: missing gluing markings");
  NodalDegeneration out;
  out.base = x1.base;
  out.component_genus = x1.component_genus;
  int off = static_cast<int>(x1.component_genus.size());
  for (int g : x2.component_genus) out.component_genus.push_back(g);
  out.nodes = x1.nodes;
  for (const auto& nd : x2.nodes) out.nodes.push_back({nd.a + off, nd.b + off, nd.delta});
  out.nodes.push_back({x1.markings.at(n1 + 1), x2.markings.at(n2 + 1) + off, d});
  for (const auto& [label, c] : x1.markings) {
    if (label != n1 + 1) out.markings[label] = c;
  }
  for (const auto& [label, c] : x2.markings) {
    if (label != n2 + 1) out.markings[n1 + label] = c + off;
  }
  return out;
}

NodalDegeneration glue_self_node(const NodalDegeneration& x, const Vec& d) {
  DualElement::make(x.base, d);
  if (is_zero(d)) throw std::invalid_argument("glue: zero smoothing parameter");
  int n = static_cast<int>(x.markings.size()) - 2;
  if (n < 0) throw std::invalid_argument("glue: needs two gluing markings");
  NodalDegeneration out;
  out.base = x.base;
  out.component_genus = x.component_genus;
  out.nodes = x.nodes;
  out.nodes.push_back({x.markings.at(n + 1), x.markings.at(n + 2), d});
  for (const auto& [label, c] : x.markings) {
    if (label <= n) out.markings[label] = c;
  }
  return out;
}

SquareCertificate check_clutch_square(const NodalDegeneration& x1, const NodalDegeneration& x2,
                                      const Vec& d) {
  TropicalCurve route1 = tropicalize(glue_at_node(x1, x2, d));
  TropicalCurve route2 = clutch(tropicalize(x1), tropicalize(x2), d);
  if (isomorphisms(route1, route2).empty()) {
    return {false, "clutching square does not commute"};
  }
  return {true, ""};
}

SquareCertificate check_self_clutch_square(const NodalDegeneration& x, const Vec& d) {
  TropicalCurve route1 = tropicalize(glue_self_node(x, d));
  TropicalCurve route2 = self_clutch(tropicalize(x), d);
  if (isomorphisms(route1, route2).empty()) {
    return {false, "self-gluing square does not commute"};
  }
  return {true, ""};
}

NodalDegeneration forget_marking(const NodalDegeneration& x) {
  int n_plus = static_cast<int>(x.markings.size());
  if (n_plus == 0) throw std::invalid_argument("forget_marking: no markings");
  int comp = x.markings.at(n_plus);
  NodalDegeneration out = x;
  out.markings.erase(n_plus);
  // Stability of the component after removal.
  int genus = x.component_genus[comp];
  int incident = 0;
  for (const auto& nd : x.nodes) {
    if (nd.a == comp) ++incident;
    if (nd.b == comp) ++incident;
  }
  for (const auto& [label, c] : out.markings) {
    if (c == comp) ++incident;
  }
  if (2 * genus - 2 + incident > 0) return out;  // case (a)
  if (genus != 0) throw std::logic_error("forget_marking: destabilized component has genus > 0");
  // Collect the incident special points.
  std::vector<int> node_ids;
  for (size_t i = 0; i < x.nodes.size(); ++i) {
    if (x.nodes[i].a == comp) node_ids.push_back(static_cast<int>(i));
    if (x.nodes[i].b == comp) node_ids.push_back(static_cast<int>(i));
  }
  std::vector<int> marks_here;
  for (const auto& [label, c] : out.markings) {
    if (c == comp) marks_here.push_back(label);
  }
  auto drop_component = [&](NodalDegeneration& y) {
    std::vector<int> remap(x.component_genus.size(), -1);
    int nid = 0;
    y.component_genus.clear();
    for (size_t c = 0; c < x.component_genus.size(); ++c) {
      if (static_cast<int>(c) == comp) continue;
      remap[c] = nid++;
      y.component_genus.push_back(x.component_genus[c]);
    }
    return remap;
  };
  if (node_ids.size() == 2 && marks_here.empty()) {
    // Case (b): two nodes merge into one with summed parameter. A self-chain
    // (both nodes to the same outer component) becomes a self-node.
    int i1 = node_ids[0], i2 = node_ids[1];
    if (i1 == i2) throw std::logic_error("forget_marking: self-node on the destabilized component");
    auto other_end = [&](int i) { return x.nodes[i].a == comp ? x.nodes[i].b : x.nodes[i].a; };
    NodalDegeneration y;
    y.base = x.base;
    std::vector<int> remap = drop_component(y);
    for (size_t i = 0; i < x.nodes.size(); ++i) {
      if (static_cast<int>(i) == i1 || static_cast<int>(i) == i2) continue;
      y.nodes.push_back({remap[x.nodes[i].a], remap[x.nodes[i].b], x.nodes[i].delta});
    }
    Vec sum(x.base.rank, Int(0));
    for (int j = 0; j < x.base.rank; ++j) sum[j] = x.nodes[i1].delta[j] + x.nodes[i2].delta[j];
    y.nodes.push_back({remap[other_end(i1)], remap[other_end(i2)], sum});
    for (const auto& [label, c] : out.markings) y.markings[label] = remap[c];
    return y;
  }
  if (node_ids.size() == 1 && marks_here.size() == 1) {
    // Case (c): delete the component and its node; the marking moves to the
    // adjacent component.
    int i1 = node_ids[0];
    int other = x.nodes[i1].a == comp ? x.nodes[i1].b : x.nodes[i1].a;
    NodalDegeneration y;
    y.base = x.base;
    std::vector<int> remap = drop_component(y);
    for (size_t i = 0; i < x.nodes.size(); ++i) {
      if (static_cast<int>(i) == i1) continue;
      y.nodes.push_back({remap[x.nodes[i].a], remap[x.nodes[i].b], x.nodes[i].delta});
    }
    for (const auto& [label, c] : out.markings) {
      y.markings[label] = c == comp ? remap[other] : remap[c];
    }
    return y;
  }
  throw std::logic_error("forget_marking: unexpected destabilized configuration");
}

SquareCertificate check_forget_square(const NodalDegeneration& x) {
  TropicalCurve route1 = forget(tropicalize(x)).curve;
  TropicalCurve route2 = tropicalize(forget_marking(x));
  if (isomorphisms(route1, route2).empty()) {
    return {false, "forgetful square does not commute"};
  }
  return {true, ""};
}

}  // namespace tropmod
