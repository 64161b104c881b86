#include "tropmod/graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace tropmod {

int MarkedGraph::num_legs() const {
  int n = 0;
  for (int f = 0; f < num_flags(); ++f) {
    if (flag_partner[f] == f) ++n;
  }
  return n;
}

int MarkedGraph::num_edges() const { return (num_flags() - num_legs()) / 2; }

std::vector<std::pair<int, int>> MarkedGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int f = 0; f < num_flags(); ++f) {
    if (flag_partner[f] > f) out.emplace_back(f, flag_partner[f]);
  }
  return out;
}

std::pair<int, int> MarkedGraph::edge_endpoints(int edge_index) const {
  auto e = edges()[edge_index];
  return {flag_vertex[e.first], flag_vertex[e.second]};
}

bool MarkedGraph::edge_is_loop(int edge_index) const {
  auto [u, v] = edge_endpoints(edge_index);
  return u == v;
}

int MarkedGraph::edge_of_flag(int flag) const {
  if (flag_partner[flag] == flag) return -1;
  auto es = edges();
  for (int i = 0; i < static_cast<int>(es.size()); ++i) {
    if (es[i].first == flag || es[i].second == flag) return i;
  }
  return -1;
}

int MarkedGraph::leg_flag(int label) const {
  for (int f = 0; f < num_flags(); ++f) {
    if (flag_partner[f] == f && flag_label[f] == label) return f;
  }
  throw std::invalid_argument("no leg with label " + std::to_string(label));
}

int MarkedGraph::valence(int v) const {
  int n = 0;
  for (int f = 0; f < num_flags(); ++f) {
    if (flag_vertex[f] == v) ++n;
  }
  return n;
}

bool MarkedGraph::connected() const {
  int nv = num_vertices();
  if (nv == 0) return false;
  std::vector<int> comp(nv);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  for (auto [f1, f2] : edges()) {
    comp[find(flag_vertex[f1])] = find(flag_vertex[f2]);
  }
  for (int v = 0; v < nv; ++v) {
    if (find(v) != find(0)) return false;
  }
  return true;
}

void MarkedGraph::validate() const {
  int nf = num_flags();
  if (static_cast<int>(flag_partner.size()) != nf || static_cast<int>(flag_label.size()) != nf) {
    throw std::invalid_argument("flag array size mismatch");
  }
  for (int f = 0; f < nf; ++f) {
    if (flag_vertex[f] < 0 || flag_vertex[f] >= num_vertices()) {
      throw std::invalid_argument("flag rooted at a missing vertex");
    }
    int p = flag_partner[f];
    if (p < 0 || p >= nf || flag_partner[p] != f) throw std::invalid_argument("broken involution");
    if (p == f) {
      if (flag_label[f] < 1) throw std::invalid_argument("leg without a label");
    } else {
      if (flag_label[f] != 0) throw std::invalid_argument("half-edge with a label");
    }
  }
  for (int w : weights) {
    if (w < 0) throw std::invalid_argument("negative vertex weight");
  }
  // Labels are a bijection onto 1..n.
  std::set<int> labels;
  for (int f = 0; f < nf; ++f) {
    if (flag_partner[f] == f && !labels.insert(flag_label[f]).second) {
      throw std::invalid_argument("duplicate leg label");
    }
  }
  int n = static_cast<int>(labels.size());
  if (!labels.empty() && (*labels.begin() != 1 || *labels.rbegin() != n)) {
    throw std::invalid_argument("leg labels are not 1..n");
  }
  if (!connected()) throw std::invalid_argument("graph is not connected");
}

int GraphBuilder::add_vertex(int weight) {
  g.weights.push_back(weight);
  return g.num_vertices() - 1;
}

int GraphBuilder::add_edge(int u, int v) {
  int f1 = g.num_flags();
  g.flag_vertex.push_back(u);
  g.flag_vertex.push_back(v);
  g.flag_partner.push_back(f1 + 1);
  g.flag_partner.push_back(f1);
  g.flag_label.push_back(0);
  g.flag_label.push_back(0);
  return f1;
}

int GraphBuilder::add_leg(int v, int label) {
  int f = g.num_flags();
  g.flag_vertex.push_back(v);
  g.flag_partner.push_back(f);
  g.flag_label.push_back(label);
  return f;
}

MarkedGraph GraphBuilder::build() const {
  g.validate();
  return g;
}

int genus(const MarkedGraph& g) {
  if (!g.connected()) throw std::invalid_argument("genus: disconnected graph");
  int b1 = g.num_edges() - g.num_vertices() + 1;
  int w = 0;
  for (int x : g.weights) w += x;
  return b1 + w;
}

bool is_stable(const MarkedGraph& g) {
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (2 * g.weights[v] - 2 + g.valence(v) <= 0) return false;
  }
  return true;
}

void GraphMorphism::validate() const {
  source.validate();
  target.validate();
  if (static_cast<int>(vertex_image.size()) != source.num_vertices() ||
      static_cast<int>(flag_image.size()) != source.num_flags()) {
    throw std::invalid_argument("morphism map size mismatch");
  }
  std::set<int> contracted(contracted_edges.begin(), contracted_edges.end());
  // Flag images: contracted edges land on vertices, others on flags,
  // commuting with root and involution and preserving leg labels.
  for (int f = 0; f < source.num_flags(); ++f) {
    int e = source.edge_of_flag(f);
    auto [to_vertex, idx] = flag_image[f];
    if (e >= 0 && contracted.count(e)) {
      if (!to_vertex) throw std::invalid_argument("contracted flag mapped to a flag");
      if (idx != vertex_image[source.flag_vertex[f]]) {
        throw std::invalid_argument("contracted flag does not land on its root image");
      }
    } else {
      if (to_vertex) throw std::invalid_argument("surviving flag mapped to a vertex");
      if (target.flag_vertex[idx] != vertex_image[source.flag_vertex[f]]) {
        throw std::invalid_argument("root square does not commute");
      }
      int pf = source.flag_partner[f];
      if (pf == f) {
        if (target.flag_partner[idx] != idx) throw std::invalid_argument("leg mapped to a half-edge");
        if (target.flag_label[idx] != source.flag_label[f]) {
          throw std::invalid_argument("leg labels not preserved");
        }
      } else {
        auto [tv2, idx2] = flag_image[pf];
        if (tv2 || target.flag_partner[idx] != idx2) {
          throw std::invalid_argument("involution square does not commute");
        }
      }
    }
  }
  // Every target flag has exactly one preimage.
  std::vector<int> hit(target.num_flags(), 0);
  for (int f = 0; f < source.num_flags(); ++f) {
    if (!flag_image[f].first) hit[flag_image[f].second]++;
  }
  for (int h : hit) {
    if (h != 1) throw std::invalid_argument("target flag with preimage count != 1");
  }
  // Preimage of each target vertex is connected of the right genus.
  for (int tv = 0; tv < target.num_vertices(); ++tv) {
    std::vector<int> vs;
    for (int v = 0; v < source.num_vertices(); ++v) {
      if (vertex_image[v] == tv) vs.push_back(v);
    }
    if (vs.empty()) throw std::invalid_argument("target vertex with empty preimage");
    std::map<int, int> local;
    for (size_t i = 0; i < vs.size(); ++i) local[vs[i]] = static_cast<int>(i);
    int nloc = static_cast<int>(vs.size());
    std::vector<int> comp(nloc);
    std::iota(comp.begin(), comp.end(), 0);
    std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
    int internal_edges = 0;
    for (int e : contracted_edges) {
      auto [u, v] = source.edge_endpoints(e);
      if (local.count(u) && local.count(v)) {
        comp[find(local[u])] = find(local[v]);
        ++internal_edges;
      } else if (local.count(u) || local.count(v)) {
        throw std::invalid_argument("contracted edge crossing vertex fibers");
      }
    }
    int comps = 0;
    for (int i = 0; i < nloc; ++i) {
      if (find(i) == i) ++comps;
    }
    if (comps != 1) throw std::invalid_argument("vertex fiber not connected");
    int fiber_genus = internal_edges - nloc + 1;
    for (int v : vs) fiber_genus += source.weights[v];
    if (fiber_genus != target.weights[tv]) {
      throw std::invalid_argument("vertex fiber has wrong genus");
    }
  }
}

GraphMorphism compose(const GraphMorphism& second, const GraphMorphism& first) {
  if (!(first.target == second.source)) throw std::invalid_argument("compose: middle graph mismatch");
  GraphMorphism out;
  out.source = first.source;
  out.target = second.target;
  out.vertex_image.resize(first.source.num_vertices());
  for (int v = 0; v < first.source.num_vertices(); ++v) {
    out.vertex_image[v] = second.vertex_image[first.vertex_image[v]];
  }
  out.flag_image.resize(first.source.num_flags());
  for (int f = 0; f < first.source.num_flags(); ++f) {
    auto [tv, idx] = first.flag_image[f];
    if (tv) {
      out.flag_image[f] = {true, second.vertex_image[idx]};
    } else {
      out.flag_image[f] = second.flag_image[idx];
    }
  }
  // Contracted set: edges contracted by first, plus preimages of edges
  // contracted by second.
  std::set<int> contracted(first.contracted_edges.begin(), first.contracted_edges.end());
  auto src_edges = first.source.edges();
  for (int e = 0; e < static_cast<int>(src_edges.size()); ++e) {
    auto [tv, idx] = out.flag_image[src_edges[e].first];
    if (tv) contracted.insert(e);
  }
  out.contracted_edges.assign(contracted.begin(), contracted.end());
  return out;
}

bool same_map(const GraphMorphism& a, const GraphMorphism& b) {
  return a.source == b.source && a.target == b.target && a.vertex_image == b.vertex_image &&
         a.flag_image == b.flag_image;
}

std::pair<MarkedGraph, GraphMorphism> contract(const MarkedGraph& g, const std::vector<int>& S) {
  auto es = g.edges();
  for (int e : S) {
    if (e < 0 || e >= static_cast<int>(es.size())) throw std::invalid_argument("contract: bad edge index");
  }
  std::set<int> contracted(S.begin(), S.end());
  int nv = g.num_vertices();
  std::vector<int> comp(nv);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  for (int e : contracted) {
    auto [u, v] = g.edge_endpoints(e);
    comp[find(u)] = find(v);
  }
  // New vertices in order of the smallest old vertex in each class.
  std::map<int, int> new_index;
  std::vector<int> old_rep;
  for (int v = 0; v < nv; ++v) {
    int r = find(v);
    if (!new_index.count(r)) {
      new_index[r] = static_cast<int>(old_rep.size());
      old_rep.push_back(r);
    }
  }
  int nnv = static_cast<int>(old_rep.size());
  // Weight of a merged vertex: sum of weights plus the first Betti number of
  // the contracted subgraph on the class.
  std::vector<int> wsum(nnv, 0), class_size(nnv, 0), internal(nnv, 0);
  for (int v = 0; v < nv; ++v) {
    int c = new_index[find(v)];
    wsum[c] += g.weights[v];
    class_size[c]++;
  }
  for (int e : contracted) {
    auto [u, vtx] = g.edge_endpoints(e);
    internal[new_index[find(u)]]++;
  }
  MarkedGraph out;
  out.weights.resize(nnv);
  for (int c = 0; c < nnv; ++c) out.weights[c] = wsum[c] + internal[c] - class_size[c] + 1;

  GraphMorphism m;
  m.source = g;
  m.vertex_image.resize(nv);
  for (int v = 0; v < nv; ++v) m.vertex_image[v] = new_index[find(v)];
  m.flag_image.assign(g.num_flags(), {true, -1});
  std::vector<int> new_flag(g.num_flags(), -1);
  for (int f = 0; f < g.num_flags(); ++f) {
    int e = g.edge_of_flag(f);
    if (e >= 0 && contracted.count(e)) continue;
    new_flag[f] = static_cast<int>(out.flag_vertex.size());
    out.flag_vertex.push_back(m.vertex_image[g.flag_vertex[f]]);
    out.flag_partner.push_back(-1);
    out.flag_label.push_back(g.flag_label[f]);
  }
  for (int f = 0; f < g.num_flags(); ++f) {
    if (new_flag[f] < 0) {
      m.flag_image[f] = {true, m.vertex_image[g.flag_vertex[f]]};
    } else {
      out.flag_partner[new_flag[f]] = new_flag[g.flag_partner[f]];
      m.flag_image[f] = {false, new_flag[f]};
    }
  }
  m.contracted_edges.assign(contracted.begin(), contracted.end());
  m.target = out;
  return {out, m};
}

namespace {

// Vertex color used to prune isomorphism search and canonical labeling.
struct VertexColor {
  int weight;
  int valence;
  int loops;
  std::vector<int> leg_labels;
  bool operator<(const VertexColor& o) const {
    return std::tie(weight, valence, loops, leg_labels) <
           std::tie(o.weight, o.valence, o.loops, o.leg_labels);
  }
  bool operator==(const VertexColor& o) const {
    return weight == o.weight && valence == o.valence && loops == o.loops &&
           leg_labels == o.leg_labels;
  }
};

VertexColor color_of(const MarkedGraph& g, int v) {
  VertexColor c;
  c.weight = g.weights[v];
  c.valence = g.valence(v);
  c.loops = 0;
  auto es = g.edges();
  for (int e = 0; e < static_cast<int>(es.size()); ++e) {
    auto [a, b] = g.edge_endpoints(e);
    if (a == v && b == v) c.loops++;
  }
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] == f && g.flag_vertex[f] == v) c.leg_labels.push_back(g.flag_label[f]);
  }
  std::sort(c.leg_labels.begin(), c.leg_labels.end());
  return c;
}

// Multiset of edges between unordered vertex pairs (loops under {v,v}).
std::map<std::pair<int, int>, std::vector<int>> edge_buckets(const MarkedGraph& g) {
  std::map<std::pair<int, int>, std::vector<int>> buckets;
  auto es = g.edges();
  for (int e = 0; e < static_cast<int>(es.size()); ++e) {
    auto [u, v] = g.edge_endpoints(e);
    buckets[{std::min(u, v), std::max(u, v)}].push_back(e);
  }
  return buckets;
}

// Extend a vertex bijection to all flag bijections; emit each as a morphism.
void emit_flag_isos(const MarkedGraph& g1, const MarkedGraph& g2, const std::vector<int>& vmap,
                    std::vector<GraphMorphism>& out) {
  auto b1 = edge_buckets(g1);
  auto b2 = edge_buckets(g2);
  if (b1.size() != b2.size()) return;
  // The buckets must correspond under vmap with equal multiplicities.
  std::vector<std::pair<std::vector<int>, std::vector<int>>> paired;
  for (auto& [k, edges1] : b1) {
    std::pair<int, int> k2{std::min(vmap[k.first], vmap[k.second]),
                           std::max(vmap[k.first], vmap[k.second])};
    auto it = b2.find(k2);
    if (it == b2.end() || it->second.size() != edges1.size()) return;
    paired.emplace_back(edges1, it->second);
  }
  auto es1 = g1.edges();
  auto es2 = g2.edges();

  // Legs are forced by label.
  std::vector<int> base_flag(g1.num_flags(), -1);
  for (int f = 0; f < g1.num_flags(); ++f) {
    if (g1.flag_partner[f] != f) continue;
    int f2 = g2.leg_flag(g1.flag_label[f]);
    if (g2.flag_vertex[f2] != vmap[g1.flag_vertex[f]]) return;
    base_flag[f] = f2;
  }

  // Backtrack over per-bucket edge bijections and loop orientations.
  std::function<void(size_t, std::vector<int>&)> rec = [&](size_t bi, std::vector<int>& fmap) {
    if (bi == paired.size()) {
      GraphMorphism m;
      m.source = g1;
      m.target = g2;
      m.vertex_image = vmap;
      m.flag_image.resize(g1.num_flags());
      for (int f = 0; f < g1.num_flags(); ++f) m.flag_image[f] = {false, fmap[f]};
      out.push_back(std::move(m));
      return;
    }
    auto& [src_edges, dst_edges] = paired[bi];
    std::vector<int> perm(src_edges.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end());
    do {
      // Try each pairing; for every edge, match flags respecting roots.
      bool ok = true;
      std::vector<std::pair<int, int>> assigned;  // flag -> flag
      for (size_t i = 0; i < src_edges.size() && ok; ++i) {
        int e1 = src_edges[i], e2 = dst_edges[perm[i]];
        auto [f1a, f1b] = es1[e1];
        auto [f2a, f2b] = es2[e2];
        bool loop = g1.flag_vertex[f1a] == g1.flag_vertex[f1b];
        if (loop) {
          // Two orientations; handled by a nested expansion below. Mark with
          // a sentinel and expand after the non-loop edges.
          assigned.emplace_back(-(e1 + 1), -(e2 + 1));
        } else {
          // Roots decide the flag pairing.
          int u2 = vmap[g1.flag_vertex[f1a]];
          if (g2.flag_vertex[f2a] == u2) {
            assigned.emplace_back(f1a, f2a);
            assigned.emplace_back(f1b, f2b);
          } else if (g2.flag_vertex[f2b] == u2) {
            assigned.emplace_back(f1a, f2b);
            assigned.emplace_back(f1b, f2a);
          } else {
            ok = false;
          }
        }
      }
      if (!ok) continue;
      // Expand loop orientation choices.
      std::vector<std::pair<int, int>> loop_pairs;
      std::vector<std::pair<int, int>> fixed;
      for (auto& [a, b] : assigned) {
        if (a < 0)
          loop_pairs.emplace_back(-a - 1, -b - 1);
        else
          fixed.emplace_back(a, b);
      }
      int L = static_cast<int>(loop_pairs.size());
      for (int mask = 0; mask < (1 << L); ++mask) {
        std::vector<int> fmap2 = fmap;
        for (auto& [a, b] : fixed) fmap2[a] = b;
        for (int i = 0; i < L; ++i) {
          auto [e1, e2] = loop_pairs[i];
          auto [f1a, f1b] = es1[e1];
          auto [f2a, f2b] = es2[e2];
          if (mask & (1 << i)) std::swap(f2a, f2b);
          fmap2[f1a] = f2a;
          fmap2[f1b] = f2b;
        }
        rec(bi + 1, fmap2);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  };
  std::vector<int> fmap = base_flag;
  rec(0, fmap);
}

}  // namespace

std::vector<GraphMorphism> isomorphisms(const MarkedGraph& g1, const MarkedGraph& g2) {
  std::vector<GraphMorphism> out;
  if (g1.num_vertices() != g2.num_vertices() || g1.num_flags() != g2.num_flags() ||
      g1.num_legs() != g2.num_legs() || g1.num_edges() != g2.num_edges()) {
    return out;
  }
  int nv = g1.num_vertices();
  std::vector<VertexColor> c1(nv), c2(nv);
  for (int v = 0; v < nv; ++v) {
    c1[v] = color_of(g1, v);
    c2[v] = color_of(g2, v);
  }
  {
    std::vector<VertexColor> s1 = c1, s2 = c2;
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());
    if (!(s1 == s2)) return out;
  }
  std::vector<int> vmap(nv, -1);
  std::vector<bool> used(nv, false);
  std::function<void(int)> rec = [&](int v) {
    if (v == nv) {
      emit_flag_isos(g1, g2, vmap, out);
      return;
    }
    for (int w = 0; w < nv; ++w) {
      if (used[w] || !(c1[v] == c2[w])) continue;
      // Adjacency consistency with already-mapped vertices.
      bool ok = true;
      auto b1 = edge_buckets(g1);
      auto b2 = edge_buckets(g2);
      for (int u = 0; u < v && ok; ++u) {
        auto i1 = b1.find({std::min(u, v), std::max(u, v)});
        auto i2 = b2.find({std::min(vmap[u], w), std::max(vmap[u], w)});
        size_t m1 = i1 == b1.end() ? 0 : i1->second.size();
        size_t m2 = i2 == b2.end() ? 0 : i2->second.size();
        if (m1 != m2) ok = false;
      }
      if (!ok) continue;
      vmap[v] = w;
      used[w] = true;
      rec(v + 1);
      used[w] = false;
      vmap[v] = -1;
    }
  };
  rec(0);
  return out;
}

std::vector<GraphMorphism> automorphisms(const MarkedGraph& g) { return isomorphisms(g, g); }

GraphMorphism invert(const GraphMorphism& iso) {
  if (!iso.is_isomorphism()) throw std::invalid_argument("invert: not an isomorphism");
  GraphMorphism out;
  out.source = iso.target;
  out.target = iso.source;
  out.vertex_image.resize(iso.target.num_vertices());
  for (int v = 0; v < iso.source.num_vertices(); ++v) out.vertex_image[iso.vertex_image[v]] = v;
  out.flag_image.resize(iso.target.num_flags());
  for (int f = 0; f < iso.source.num_flags(); ++f) {
    out.flag_image[iso.flag_image[f].second] = {false, f};
  }
  return out;
}

std::vector<GraphMorphism> morphisms(const MarkedGraph& g1, const MarkedGraph& g2) {
  std::vector<GraphMorphism> out;
  int ne1 = g1.num_edges(), ne2 = g2.num_edges();
  if (ne2 > ne1) return out;
  if (g1.num_legs() != g2.num_legs()) return out;
  int k = ne1 - ne2;
  // All edge subsets of size k.
  std::vector<int> sel;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(sel.size()) == k) {
      auto [gc, cm] = contract(g1, sel);
      for (const GraphMorphism& iso : isomorphisms(gc, g2)) {
        out.push_back(compose(iso, cm));
      }
      return;
    }
    for (int i = start; i < ne1; ++i) {
      sel.push_back(i);
      rec(i + 1);
      sel.pop_back();
    }
  };
  rec(0);
  return out;
}

namespace {

std::string encode_with_order(const MarkedGraph& g, const std::vector<int>& pos) {
  // pos[v] = position of old vertex v in the new order.
  std::string s = "V" + std::to_string(g.num_vertices()) + ";";
  std::vector<int> w(g.num_vertices());
  for (int v = 0; v < g.num_vertices(); ++v) w[pos[v]] = g.weights[v];
  s += "w";
  for (int x : w) s += std::to_string(x) + ",";
  std::vector<std::pair<int, int>> es;
  for (auto [f1, f2] : g.edges()) {
    int a = pos[g.flag_vertex[f1]], b = pos[g.flag_vertex[f2]];
    es.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(es.begin(), es.end());
  s += ";E";
  for (auto [a, b] : es) s += std::to_string(a) + "-" + std::to_string(b) + ",";
  std::vector<std::pair<int, int>> legs;
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] == f) legs.emplace_back(g.flag_label[f], pos[g.flag_vertex[f]]);
  }
  std::sort(legs.begin(), legs.end());
  s += ";L";
  for (auto [l, v] : legs) s += std::to_string(l) + "@" + std::to_string(v) + ",";
  return s;
}

}  // namespace

std::string canonical_form(const MarkedGraph& g) {
  int nv = g.num_vertices();
  std::vector<VertexColor> colors(nv);
  for (int v = 0; v < nv; ++v) colors[v] = color_of(g, v);
  // Order vertices by color first; permute only within color classes.
  std::vector<int> order(nv);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return colors[a] < colors[b] || (colors[a] == colors[b] && a < b); });
  std::string best;
  std::vector<int> pos(nv);
  // Backtrack over permutations refining the color order.
  std::function<void(int)> rec = [&](int i) {
    if (i == nv) {
      for (int p = 0; p < nv; ++p) pos[order[p]] = p;
      std::string s = encode_with_order(g, pos);
      if (best.empty() || s < best) best = s;
      return;
    }
    // The block of positions sharing order[i]'s color.
    int j = i;
    while (j < nv && colors[order[j]] == colors[order[i]]) ++j;
    std::vector<int> block(order.begin() + i, order.begin() + j);
    std::sort(block.begin(), block.end());
    do {
      std::copy(block.begin(), block.end(), order.begin() + i);
      rec(j);
    } while (std::next_permutation(block.begin(), block.end()));
    std::sort(block.begin(), block.end());
    std::copy(block.begin(), block.end(), order.begin() + i);
  };
  rec(0);
  return best;
}

MarkedGraph canonical_graph(const MarkedGraph& g) {
  // Decode the canonical string deterministically by rebuilding with the
  // minimizing order; simplest is to recompute the order that achieves the
  // canonical encoding and rebuild.
  int nv = g.num_vertices();
  std::vector<VertexColor> colors(nv);
  for (int v = 0; v < nv; ++v) colors[v] = color_of(g, v);
  std::vector<int> order(nv);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return colors[a] < colors[b] || (colors[a] == colors[b] && a < b); });
  std::string best;
  std::vector<int> best_pos(nv);
  std::vector<int> pos(nv);
  std::function<void(int)> rec = [&](int i) {
    if (i == nv) {
      for (int p = 0; p < nv; ++p) pos[order[p]] = p;
      std::string s = encode_with_order(g, pos);
      if (best.empty() || s < best) {
        best = s;
        best_pos = pos;
      }
      return;
    }
    int j = i;
    while (j < nv && colors[order[j]] == colors[order[i]]) ++j;
    std::vector<int> block(order.begin() + i, order.begin() + j);
    std::sort(block.begin(), block.end());
    do {
      std::copy(block.begin(), block.end(), order.begin() + i);
      rec(j);
    } while (std::next_permutation(block.begin(), block.end()));
    std::sort(block.begin(), block.end());
    std::copy(block.begin(), block.end(), order.begin() + i);
  };
  rec(0);

  GraphBuilder b;
  std::vector<int> wts(nv);
  for (int v = 0; v < nv; ++v) wts[best_pos[v]] = g.weights[v];
  for (int w : wts) b.add_vertex(w);
  std::vector<std::pair<int, int>> es;
  for (auto [f1, f2] : g.edges()) {
    int a = best_pos[g.flag_vertex[f1]], bb = best_pos[g.flag_vertex[f2]];
    es.emplace_back(std::min(a, bb), std::max(a, bb));
  }
  std::sort(es.begin(), es.end());
  for (auto [u, v] : es) b.add_edge(u, v);
  std::vector<std::pair<int, int>> legs;
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] == f) legs.emplace_back(g.flag_label[f], best_pos[g.flag_vertex[f]]);
  }
  std::sort(legs.begin(), legs.end());
  for (auto [l, v] : legs) b.add_leg(v, l);
  return b.build();
}

namespace {

void enumerate_weights(int total, int parts, std::vector<int>& cur,
                       const std::function<void(const std::vector<int>&)>& emit) {
  if (parts == 1) {
    cur.push_back(total);
    emit(cur);
    cur.pop_back();
    return;
  }
  for (int w = 0; w <= total; ++w) {
    cur.push_back(w);
    enumerate_weights(total - w, parts - 1, cur, emit);
    cur.pop_back();
  }
}

}  // namespace

std::vector<MarkedGraph> enumerate_stable(int g, int n) {
  if (2 * g - 2 + n <= 0) throw std::invalid_argument("unstable (g, n) pair");
  std::map<std::string, MarkedGraph> classes;
  int max_edges = 3 * g - 3 + n;
  int max_vertices = 2 * g - 2 + n;
  for (int nv = 1; nv <= std::max(1, max_vertices); ++nv) {
    // Vertex pair types: (i, j) with i <= j; loops as (i, i).
    std::vector<std::pair<int, int>> types;
    for (int i = 0; i < nv; ++i)
      for (int j = i; j < nv; ++j) types.emplace_back(i, j);
    int lo = nv - 1;
    int hi = std::min(max_edges, nv - 1 + g);
    for (int m = lo; m <= hi; ++m) {
      int b1 = m - nv + 1;
      int wsum = g - b1;
      if (wsum < 0) continue;
      // Multisets of m pair types.
      std::vector<int> counts(types.size(), 0);
      std::function<void(size_t, int)> rec = [&](size_t t, int left) {
        if (left == 0) {
          // Connectivity over non-loop edges.
          std::vector<int> comp(nv);
          std::iota(comp.begin(), comp.end(), 0);
          std::function<int(int)> find = [&](int x) {
            return comp[x] == x ? x : comp[x] = find(comp[x]);
          };
          for (size_t i = 0; i < types.size(); ++i) {
            if (counts[i] > 0 && types[i].first != types[i].second) {
              comp[find(types[i].first)] = find(types[i].second);
            }
          }
          for (int v = 0; v < nv; ++v) {
            if (find(v) != find(0)) return;
          }
          // Distribute weights and legs.
          std::vector<int> cur;
          enumerate_weights(wsum, nv, cur, [&](const std::vector<int>& wts) {
            std::vector<int> legs(n, 0);
            std::function<void(int)> legrec = [&](int li) {
              if (li == n) {
                // Stability check.
                std::vector<int> val(nv, 0);
                for (size_t i = 0; i < types.size(); ++i) {
                  val[types[i].first] += counts[i];
                  val[types[i].second] += counts[i];
                }
                for (int l = 0; l < n; ++l) val[legs[l]]++;
                for (int v = 0; v < nv; ++v) {
                  if (2 * wts[v] - 2 + val[v] <= 0) return;
                }
                GraphBuilder b;
                for (int w : wts) b.add_vertex(w);
                for (size_t i = 0; i < types.size(); ++i) {
                  for (int c = 0; c < counts[i]; ++c) b.add_edge(types[i].first, types[i].second);
                }
                for (int l = 0; l < n; ++l) b.add_leg(legs[l], l + 1);
                MarkedGraph built = b.build();
                std::string key = canonical_form(built);
                if (!classes.count(key)) classes.emplace(key, canonical_graph(built));
              } else {
                for (int v = 0; v < nv; ++v) {
                  legs[li] = v;
                  legrec(li + 1);
                }
              }
            };
            legrec(0);
          });
          return;
        }
        if (t == types.size()) return;
        for (int c = 0; c <= left; ++c) {
          counts[t] = c;
          rec(t + 1, left - c);
        }
        counts[t] = 0;
      };
      rec(0, m);
    }
  }
  std::vector<MarkedGraph> out;
  for (auto& [key, graph] : classes) out.push_back(graph);
  std::sort(out.begin(), out.end(), [](const MarkedGraph& a, const MarkedGraph& b) {
    if (a.num_edges() != b.num_edges()) return a.num_edges() < b.num_edges();
    return canonical_form(a) < canonical_form(b);
  });
  return out;
}

std::vector<MarkedGraph> enumerate_maximal(int g, int n) {
  std::vector<MarkedGraph> all = enumerate_stable(g, n);
  std::vector<MarkedGraph> out;
  for (const MarkedGraph& cand : all) {
    bool maximal = true;
    for (const MarkedGraph& bigger : all) {
      if (bigger.num_edges() <= cand.num_edges()) continue;
      if (!morphisms(bigger, cand).empty()) {
        maximal = false;
        break;
      }
    }
    if (maximal) out.push_back(cand);
  }
  return out;
}

}  // namespace tropmod
