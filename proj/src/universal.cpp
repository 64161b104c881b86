#include "tropmod/universal.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace tropmod {

namespace {

// Piece projections to the base cone.
struct Piece {
  enum Kind { Vertex, Leg, Edge } kind;
  int which;        // vertex index, leg label, or edge index
  Cone cone;
  Mat to_base;      // cone -> sigma
  FaceComplex faces;
  // For edge pieces: the two flag sections (smaller flag first).
  Mat section1, section2;
  // For leg pieces: the section at distance zero.
  Mat section0;
};

Mat stack_rows(const Mat& top, const Mat& bottom) {
  Mat out(top.rows + bottom.rows, top.cols);
  for (int r = 0; r < top.rows; ++r)
    for (int c = 0; c < top.cols; ++c) out.at(r, c) = top.at(r, c);
  for (int r = 0; r < bottom.rows; ++r)
    for (int c = 0; c < bottom.cols; ++c) out.at(top.rows + r, c) = bottom.at(r, c);
  return out;
}

Piece make_vertex_piece(const TropicalCurve& curve, int v) {
  Piece p;
  p.kind = Piece::Vertex;
  p.which = v;
  p.cone = curve.base;
  p.to_base = Mat::identity(curve.base.rank);
  p.faces = cone_as_complex(p.cone);
  return p;
}

Piece make_leg_piece(const TropicalCurve& curve, int label) {
  Piece p;
  p.kind = Piece::Leg;
  p.which = label;
  int n = curve.base.rank;
  std::vector<Vec> rays;
  for (const Vec& r : curve.base.rays) {
    Vec v(n + 1, Int(0));
    for (int i = 0; i < n; ++i) v[i] = r[i];
    rays.push_back(std::move(v));
  }
  Vec last(n + 1, Int(0));
  last[n] = 1;
  rays.push_back(std::move(last));
  p.cone = Cone::from_rays(n + 1, rays);
  Mat proj(n, n + 1);
  for (int i = 0; i < n; ++i) proj.at(i, i) = 1;
  p.to_base = std::move(proj);
  p.faces = cone_as_complex(p.cone);
  Mat s0(n + 1, n);
  for (int i = 0; i < n; ++i) s0.at(i, i) = 1;
  p.section0 = std::move(s0);
  return p;
}

Piece make_edge_piece(const TropicalCurve& curve, int e) {
  Piece p;
  p.kind = Piece::Edge;
  p.which = e;
  int n = curve.base.rank;
  Cone ray = Cone::ray();
  Mat de(1, n);
  for (int i = 0; i < n; ++i) de.at(0, i) = curve.lengths[e][i];
  Mat sum(1, 2);
  sum.at(0, 0) = 1;
  sum.at(0, 1) = 1;
  FiberProduct fp = fiber_product(ConeMorphism::make(curve.base, ray, de),
                                  ConeMorphism::make(Cone::orthant(2), ray, sum));
  p.cone = fp.cone;
  p.to_base = fp.proj1.matrix;
  p.faces = cone_as_complex(p.cone);
  // Sections: s |-> (s, d(e) s, 0) and s |-> (s, 0, d(e) s) in ambient
  // (sigma; a, b) coordinates, solved back into fiber-product coordinates.
  Mat zero_row(1, n);
  Mat amb1 = stack_rows(stack_rows(Mat::identity(n), de), zero_row);
  Mat amb2 = stack_rows(stack_rows(Mat::identity(n), zero_row), de);
  auto s1 = solve_unique_integer_mat(fp.embedding, amb1);
  auto s2 = solve_unique_integer_mat(fp.embedding, amb2);
  if (!s1 || !s2) throw std::logic_error("edge piece sections not integral");
  p.section1 = *s1;
  p.section2 = *s2;
  return p;
}

}  // namespace

int UniversalCone::section_object(int label) const { return leg_piece[label - 1]; }

UniversalCone cone_over(const TropicalCurve& curve) {
  UniversalCone out;
  out.curve = curve;
  out.base = cone_as_complex(curve.base);

  std::vector<Piece> pieces;
  std::map<std::pair<int, int>, size_t> piece_of;  // (kind, which) -> index
  for (int v = 0; v < curve.graph.num_vertices(); ++v) {
    piece_of[{Piece::Vertex, v}] = pieces.size();
    pieces.push_back(make_vertex_piece(curve, v));
  }
  int n = curve.graph.num_legs();
  for (int l = 1; l <= n; ++l) {
    piece_of[{Piece::Leg, l}] = pieces.size();
    pieces.push_back(make_leg_piece(curve, l));
  }
  for (int e = 0; e < curve.graph.num_edges(); ++e) {
    piece_of[{Piece::Edge, e}] = pieces.size();
    pieces.push_back(make_edge_piece(curve, e));
  }

  // Disjoint union of the pieces' face lattices.
  std::vector<ConeCategory> complexes;
  for (const Piece& p : pieces) complexes.push_back(p.faces.complex);
  std::vector<int> offsets;
  ConeComplexData glued = disjoint_union(complexes, &offsets);

  // One gluing relation per flag: the flag face of its piece is identified
  // with the root's vertex piece. Loop edges glue both faces to one vertex.
  std::vector<ConeRelation> relations;
  auto flag_relation = [&](size_t piece_idx, const Mat& section, int root_vertex) {
    const Piece& p = pieces[piece_idx];
    std::vector<Vec> images;
    for (const Vec& r : curve.base.rays) images.push_back(mat_apply(section, r));
    Face f = smallest_face_containing(p.cone, images);
    int local = p.faces.face_index_of_rayset(f.ray_indices);
    // Isomorphism face -> sigma through the structural projection.
    Mat to_sigma = mat_mul(p.to_base, f.inclusion.matrix);
    size_t vp = piece_of.at({Piece::Vertex, root_vertex});
    int vtop = pieces[vp].faces.face_index_of_rayset(top_face(curve.base).ray_indices);
    relations.push_back({offsets[piece_idx] + local, offsets[vp] + vtop, to_sigma});
  };
  for (int l = 1; l <= n; ++l) {
    int flag = curve.graph.leg_flag(l);
    flag_relation(piece_of.at({Piece::Leg, l}), pieces[piece_of.at({Piece::Leg, l})].section0,
                  curve.graph.flag_vertex[flag]);
  }
  auto edges = curve.graph.edges();
  for (int e = 0; e < curve.graph.num_edges(); ++e) {
    auto [f1, f2] = edges[e];  // f1 < f2: flag order fixes the face bijection
    size_t ep = piece_of.at({Piece::Edge, e});
    flag_relation(ep, pieces[ep].section1, curve.graph.flag_vertex[f1]);
    flag_relation(ep, pieces[ep].section2, curve.graph.flag_vertex[f2]);
  }

  QuotientResult q = quotient_cone_space(glued, relations);
  out.presentation = q.stack;

  auto top_object = [&](size_t piece_idx) {
    const Piece& p = pieces[piece_idx];
    int local = p.faces.face_index_of_rayset(top_face(p.cone).ray_indices);
    return q.object_class[offsets[piece_idx] + local];
  };
  for (int v = 0; v < curve.graph.num_vertices(); ++v) {
    out.vertex_piece.push_back(top_object(piece_of.at({Piece::Vertex, v})));
  }
  for (int l = 1; l <= n; ++l) out.leg_piece.push_back(top_object(piece_of.at({Piece::Leg, l})));
  for (int e = 0; e < curve.graph.num_edges(); ++e) {
    out.edge_piece.push_back(top_object(piece_of.at({Piece::Edge, e})));
  }

  // Structure map: on each quotient object, project its root representative.
  int nq = out.presentation.num_objects();
  out.structure_map.obj_map.resize(nq);
  out.structure_map.cone_map.resize(nq);
  std::vector<int> root_of(nq, -1);
  for (int i = 0; i < glued.num_objects(); ++i) {
    int cls = q.object_class[i];
    if (root_of[cls] < 0 && q.transport[i] == Mat::identity(glued.cones[i].rank)) {
      root_of[cls] = i;
    }
  }
  // Locate the piece and face of each union index.
  auto locate = [&](int union_idx) {
    size_t pi = 0;
    while (pi + 1 < offsets.size() && offsets[pi + 1] <= union_idx) ++pi;
    return std::make_pair(pi, union_idx - offsets[pi]);
  };
  for (int o = 0; o < nq; ++o) {
    if (root_of[o] < 0) throw std::logic_error("cone_over: class without identity transport");
    auto [pi, local] = locate(root_of[o]);
    const Piece& p = pieces[pi];
    Mat proj = mat_mul(p.to_base, p.faces.faces[local].inclusion.matrix);
    std::vector<Vec> images;
    for (const Vec& r : out.presentation.cones[o].rays) images.push_back(mat_apply(proj, r));
    Face tf = smallest_face_containing(curve.base, images);
    int base_obj = out.base.face_index_of_rayset(tf.ray_indices);
    auto m = solve_unique_integer_mat(out.base.faces[base_obj].inclusion.matrix, proj);
    if (!m) throw std::logic_error("cone_over: structure map not integral");
    out.structure_map.obj_map[o] = base_obj;
    out.structure_map.cone_map[o] = *m;
  }
  out.structure_map.arrow_map.resize(out.presentation.num_arrows());
  for (int a = 0; a < out.presentation.num_arrows(); ++a) {
    int so = out.structure_map.obj_map[out.presentation.arrows[a].src];
    int de = out.structure_map.obj_map[out.presentation.arrows[a].dst];
    Mat want = mat_mul(out.structure_map.cone_map[out.presentation.arrows[a].dst],
                       out.presentation.arrows[a].matrix);
    int found = -1;
    for (int b : out.base.complex.hom(so, de)) {
      if (mat_mul(out.base.complex.arrows[b].matrix,
                  out.structure_map.cone_map[out.presentation.arrows[a].src]) == want) {
        found = b;
      }
    }
    if (found < 0) throw std::logic_error("cone_over: structure arrow missing");
    out.structure_map.arrow_map[a] = found;
  }
  return out;
}

// ---------------------------------------------------------------------------

SectionDatum normalize_datum(const TropicalCurve& curve, SectionDatum d) {
  if (auto* e = std::get_if<EdgeDatum>(&d)) {
    int partner = curve.graph.flag_partner[e->flag];
    if (partner < e->flag) {
      return EdgeDatum{partner, e->far_part, e->near_part};
    }
  }
  return d;
}

void validate_datum(const TropicalCurve& curve, const SectionDatum& d) {
  if (const auto* v = std::get_if<VertexDatum>(&d)) {
    if (v->vertex < 0 || v->vertex >= curve.graph.num_vertices()) {
      throw std::invalid_argument("vertex datum out of range");
    }
  } else if (const auto* l = std::get_if<LegDatum>(&d)) {
    curve.graph.leg_flag(l->label);
    DualElement::make(curve.base, l->distance);
    if (is_zero(l->distance)) throw std::invalid_argument("leg datum with zero distance");
  } else {
    const auto& e = std::get<EdgeDatum>(d);
    int edge = curve.graph.edge_of_flag(e.flag);
    if (edge < 0) throw std::invalid_argument("edge datum on a leg flag");
    DualElement::make(curve.base, e.near_part);
    DualElement::make(curve.base, e.far_part);
    if (is_zero(e.near_part) || is_zero(e.far_part)) {
      throw std::invalid_argument("edge datum with a zero part");
    }
    Vec sum(curve.base.rank, Int(0));
    for (int i = 0; i < curve.base.rank; ++i) sum[i] = e.near_part[i] + e.far_part[i];
    if (sum != curve.lengths[edge]) {
      throw std::invalid_argument("edge datum parts do not sum to the edge length");
    }
  }
}

bool datum_equal(const TropicalCurve& curve, const SectionDatum& a, const SectionDatum& b) {
  SectionDatum x = normalize_datum(curve, a);
  SectionDatum y = normalize_datum(curve, b);
  if (x.index() != y.index()) return false;
  if (const auto* v = std::get_if<VertexDatum>(&x)) return v->vertex == std::get<VertexDatum>(y).vertex;
  if (const auto* l = std::get_if<LegDatum>(&x)) {
    const auto& m = std::get<LegDatum>(y);
    return l->label == m.label && l->distance == m.distance;
  }
  const auto& e = std::get<EdgeDatum>(x);
  const auto& f = std::get<EdgeDatum>(y);
  return e.flag == f.flag && e.near_part == f.near_part && e.far_part == f.far_part;
}

int H(const SectionDatum& d, const TropicalCurve& curve) {
  if (const auto* v = std::get_if<VertexDatum>(&d)) return curve.graph.weights[v->vertex];
  return 0;
}

int h_last(const TropicalCurve& curve) {
  int n = curve.graph.num_legs();
  return curve.graph.weights[curve.graph.flag_vertex[curve.graph.leg_flag(n)]];
}

TropicalCurve attach(const TropicalCurve& curve, const SectionDatum& datum) {
  validate_datum(curve, datum);
  int n = curve.graph.num_legs();
  const MarkedGraph& g = curve.graph;
  auto edges = g.edges();
  GraphBuilder b;
  for (int w : g.weights) b.add_vertex(w);

  if (const auto* vd = std::get_if<VertexDatum>(&datum)) {
    std::vector<Vec> lengths;
    for (int e = 0; e < g.num_edges(); ++e) {
      auto [u, w] = g.edge_endpoints(e);
      b.add_edge(u, w);
      lengths.push_back(curve.lengths[e]);
    }
    for (int f = 0; f < g.num_flags(); ++f) {
      if (g.flag_partner[f] == f) b.add_leg(g.flag_vertex[f], g.flag_label[f]);
    }
    b.add_leg(vd->vertex, n + 1);
    return TropicalCurve::make(curve.base, b.build(), lengths);
  }
  if (const auto* ld = std::get_if<LegDatum>(&datum)) {
    int new_v = b.add_vertex(0);
    std::vector<Vec> lengths;
    for (int e = 0; e < g.num_edges(); ++e) {
      auto [u, w] = g.edge_endpoints(e);
      b.add_edge(u, w);
      lengths.push_back(curve.lengths[e]);
    }
    int old_flag = g.leg_flag(ld->label);
    b.add_edge(g.flag_vertex[old_flag], new_v);
    lengths.push_back(ld->distance);
    for (int f = 0; f < g.num_flags(); ++f) {
      if (g.flag_partner[f] != f) continue;
      if (f == old_flag) {
        b.add_leg(new_v, ld->label);
      } else {
        b.add_leg(g.flag_vertex[f], g.flag_label[f]);
      }
    }
    b.add_leg(new_v, n + 1);
    return TropicalCurve::make(curve.base, b.build(), lengths);
  }
  const auto& ed = std::get<EdgeDatum>(datum);
  int edge = g.edge_of_flag(ed.flag);
  int new_v = b.add_vertex(0);
  std::vector<Vec> lengths;
  for (int e = 0; e < g.num_edges(); ++e) {
    if (e == edge) continue;
    auto [u, w] = g.edge_endpoints(e);
    b.add_edge(u, w);
    lengths.push_back(curve.lengths[e]);
  }
  // Subdivide: near part on the side of ed.flag.
  b.add_edge(g.flag_vertex[ed.flag], new_v);
  lengths.push_back(ed.near_part);
  b.add_edge(new_v, g.flag_vertex[g.flag_partner[ed.flag]]);
  lengths.push_back(ed.far_part);
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] == f) b.add_leg(g.flag_vertex[f], g.flag_label[f]);
  }
  b.add_leg(new_v, n + 1);
  return TropicalCurve::make(curve.base, b.build(), lengths);
}

ForgetResult forget(const TropicalCurve& curve) {
  int n_plus = curve.graph.num_legs();
  int g = curve.genus();
  int n = n_plus - 1;
  if (2 * g - 2 + n <= 0) throw std::invalid_argument("forget: target (g, n) is unstable");
  const MarkedGraph& gr = curve.graph;
  int last_flag = gr.leg_flag(n_plus);
  int v = gr.flag_vertex[last_flag];
  int val_after = gr.valence(v) - 1;
  bool stable_after = 2 * gr.weights[v] - 2 + val_after > 0;

  GraphBuilder b;
  std::vector<Vec> lengths;
  auto edges = gr.edges();

  if (stable_after) {
    // Case (a): just delete the leg.
    for (int w : gr.weights) b.add_vertex(w);
    for (int e = 0; e < gr.num_edges(); ++e) {
      auto [u, w] = gr.edge_endpoints(e);
      b.add_edge(u, w);
      lengths.push_back(curve.lengths[e]);
    }
    for (int f = 0; f < gr.num_flags(); ++f) {
      if (gr.flag_partner[f] == f && f != last_flag) b.add_leg(gr.flag_vertex[f], gr.flag_label[f]);
    }
    TropicalCurve out = TropicalCurve::make(curve.base, b.build(), lengths);
    return ForgetResult{out, VertexDatum{v}};
  }

  // v must be weight 0 with exactly two remaining flags.
  if (gr.weights[v] != 0 || val_after != 2) {
    throw std::logic_error("forget: unstable vertex is not a weight-0 two-flag vertex");
  }
  std::vector<int> rest;
  for (int f = 0; f < gr.num_flags(); ++f) {
    if (gr.flag_vertex[f] == v && f != last_flag) rest.push_back(f);
  }
  int f1 = rest[0], f2 = rest[1];
  bool f1_leg = gr.flag_partner[f1] == f1;
  bool f2_leg = gr.flag_partner[f2] == f2;
  if (f1_leg && f2_leg) throw std::logic_error("forget: two legs at the unstable vertex");
  if (!f1_leg && !f2_leg && gr.edge_of_flag(f1) == gr.edge_of_flag(f2)) {
    throw std::logic_error("forget: loop at the unstable vertex");
  }
  if (f1_leg || f2_leg) {
    // Case (c): one edge and one leg; relabel the far flag of the edge.
    int legf = f1_leg ? f1 : f2;
    int edgef = f1_leg ? f2 : f1;
    int far = gr.flag_partner[edgef];
    int edge = gr.edge_of_flag(edgef);
    int label = gr.flag_label[legf];
    std::vector<int> vmap(gr.num_vertices(), -1);
    int nv = 0;
    for (int w = 0; w < gr.num_vertices(); ++w) {
      if (w != v) {
        vmap[w] = nv++;
        b.add_vertex(gr.weights[w]);
      }
    }
    for (int e = 0; e < gr.num_edges(); ++e) {
      if (e == edge) continue;
      auto [u, w] = gr.edge_endpoints(e);
      b.add_edge(vmap[u], vmap[w]);
      lengths.push_back(curve.lengths[e]);
    }
    for (int f = 0; f < gr.num_flags(); ++f) {
      if (gr.flag_partner[f] != f || f == last_flag || f == legf) continue;
      b.add_leg(vmap[gr.flag_vertex[f]], gr.flag_label[f]);
    }
    b.add_leg(vmap[gr.flag_vertex[far]], label);
    TropicalCurve out = TropicalCurve::make(curve.base, b.build(), lengths);
    // The datum records the distance of the point from the root of the leg.
    return ForgetResult{out, LegDatum{label, curve.lengths[edge]}};
  }
  // Case (b): two distinct edges; merge them into one of summed length.
  int e1 = gr.edge_of_flag(f1), e2 = gr.edge_of_flag(f2);
  int g1 = gr.flag_partner[f1], g2 = gr.flag_partner[f2];
  std::vector<int> vmap(gr.num_vertices(), -1);
  int nv = 0;
  for (int w = 0; w < gr.num_vertices(); ++w) {
    if (w != v) {
      vmap[w] = nv++;
      b.add_vertex(gr.weights[w]);
    }
  }
  std::vector<int> kept_edges;
  for (int e = 0; e < gr.num_edges(); ++e) {
    if (e == e1 || e == e2) continue;
    auto [u, w] = gr.edge_endpoints(e);
    b.add_edge(vmap[u], vmap[w]);
    lengths.push_back(curve.lengths[e]);
    kept_edges.push_back(e);
  }
  // Merged edge carries the flags formerly at g1 and g2.
  int merged_first = b.add_edge(vmap[gr.flag_vertex[g1]], vmap[gr.flag_vertex[g2]]);
  Vec sum(curve.base.rank, Int(0));
  for (int i = 0; i < curve.base.rank; ++i) sum[i] = curve.lengths[e1][i] + curve.lengths[e2][i];
  lengths.push_back(sum);
  for (int f = 0; f < gr.num_flags(); ++f) {
    if (gr.flag_partner[f] != f || f == last_flag) continue;
    b.add_leg(vmap[gr.flag_vertex[f]], gr.flag_label[f]);
  }
  TropicalCurve out = TropicalCurve::make(curve.base, b.build(), lengths);
  // Orient the datum by the g1-side flag of the merged edge.
  SectionDatum datum =
      normalize_datum(out, EdgeDatum{merged_first, curve.lengths[e1], curve.lengths[e2]});
  return ForgetResult{out, datum};
}

SectionDatum pullback_datum(const ConeMorphism& f, const TropicalCurve& curve,
                            const SectionDatum& d, const PullbackResult& pulled) {
  auto pull = [&](const Vec& m) { return pullback_element(f, DualElement{m}).covector; };
  if (const auto* vd = std::get_if<VertexDatum>(&d)) {
    return VertexDatum{pulled.contraction.vertex_image[vd->vertex]};
  }
  if (const auto* ld = std::get_if<LegDatum>(&d)) {
    Vec dist = pull(ld->distance);
    if (is_zero(dist)) {
      int root = curve.graph.flag_vertex[curve.graph.leg_flag(ld->label)];
      return VertexDatum{pulled.contraction.vertex_image[root]};
    }
    return LegDatum{ld->label, dist};
  }
  const auto& ed = std::get<EdgeDatum>(d);
  Vec near = pull(ed.near_part);
  Vec far = pull(ed.far_part);
  auto img = pulled.contraction.flag_image[ed.flag];
  if (img.first) {
    return VertexDatum{img.second};  // the whole edge died
  }
  if (is_zero(near)) {
    return VertexDatum{pulled.contraction.vertex_image[curve.graph.flag_vertex[ed.flag]]};
  }
  if (is_zero(far)) {
    int other = curve.graph.flag_partner[ed.flag];
    return VertexDatum{pulled.contraction.vertex_image[curve.graph.flag_vertex[other]]};
  }
  return normalize_datum(pulled.curve, EdgeDatum{img.second, near, far});
}

// ---------------------------------------------------------------------------

TropicalCurve clutch(const TropicalCurve& left, const TropicalCurve& right, const Vec& d) {
  DualElement::make(left.base, d);
  if (is_zero(d)) throw std::invalid_argument("clutch: zero length");
  if (!(left.base == right.base)) throw std::invalid_argument("clutch: base cones differ");
  int n1 = left.graph.num_legs() - 1;
  int n2 = right.graph.num_legs() - 1;
  if (n1 < 0 || n2 < 0) throw std::invalid_argument("clutch: missing gluing legs");
  int star = left.graph.leg_flag(n1 + 1);
  int bullet = right.graph.leg_flag(n2 + 1);
  GraphBuilder b;
  for (int w : left.graph.weights) b.add_vertex(w);
  int off = left.graph.num_vertices();
  for (int w : right.graph.weights) b.add_vertex(w);
  std::vector<Vec> lengths;
  for (int e = 0; e < left.graph.num_edges(); ++e) {
    auto [u, w] = left.graph.edge_endpoints(e);
    b.add_edge(u, w);
    lengths.push_back(left.lengths[e]);
  }
  for (int e = 0; e < right.graph.num_edges(); ++e) {
    auto [u, w] = right.graph.edge_endpoints(e);
    b.add_edge(off + u, off + w);
    lengths.push_back(right.lengths[e]);
  }
  b.add_edge(left.graph.flag_vertex[star], off + right.graph.flag_vertex[bullet]);
  lengths.push_back(d);
  for (int f = 0; f < left.graph.num_flags(); ++f) {
    if (left.graph.flag_partner[f] == f && f != star) {
      b.add_leg(left.graph.flag_vertex[f], left.graph.flag_label[f]);
    }
  }
  for (int f = 0; f < right.graph.num_flags(); ++f) {
    if (right.graph.flag_partner[f] == f && f != bullet) {
      b.add_leg(off + right.graph.flag_vertex[f], n1 + right.graph.flag_label[f]);
    }
  }
  return TropicalCurve::make(left.base, b.build(), lengths);
}

TropicalCurve self_clutch(const TropicalCurve& curve, const Vec& d) {
  DualElement::make(curve.base, d);
  if (is_zero(d)) throw std::invalid_argument("self_clutch: zero length");
  int n = curve.graph.num_legs() - 2;
  if (n < 0) throw std::invalid_argument("self_clutch: needs two gluing legs");
  int star = curve.graph.leg_flag(n + 1);
  int bullet = curve.graph.leg_flag(n + 2);
  GraphBuilder b;
  for (int w : curve.graph.weights) b.add_vertex(w);
  std::vector<Vec> lengths;
  for (int e = 0; e < curve.graph.num_edges(); ++e) {
    auto [u, w] = curve.graph.edge_endpoints(e);
    b.add_edge(u, w);
    lengths.push_back(curve.lengths[e]);
  }
  b.add_edge(curve.graph.flag_vertex[star], curve.graph.flag_vertex[bullet]);
  lengths.push_back(d);
  for (int f = 0; f < curve.graph.num_flags(); ++f) {
    if (curve.graph.flag_partner[f] == f && f != star && f != bullet) {
      b.add_leg(curve.graph.flag_vertex[f], curve.graph.flag_label[f]);
    }
  }
  return TropicalCurve::make(curve.base, b.build(), lengths);
}

// ---------------------------------------------------------------------------

FiberAtOne fiber_at_one(const UniversalCone& uc) {
  const TropicalCurve& curve = uc.curve;
  if (!(curve.base == Cone::ray())) throw std::invalid_argument("fiber_at_one: base is not a ray");
  FiberAtOne out;
  out.graph = curve.graph;
  out.weights = curve.graph.weights;
  Cone ray = Cone::ray();
  Mat sum(1, 2);
  sum.at(0, 0) = 1;
  sum.at(0, 1) = 1;
  for (int e = 0; e < curve.graph.num_edges(); ++e) {
    Mat de(1, 1);
    de.at(0, 0) = curve.lengths[e][0];
    FiberProduct fp = fiber_product(ConeMorphism::make(ray, ray, de),
                                    ConeMorphism::make(Cone::orthant(2), ray, sum));
    if (fp.cone.rays.size() != 2) throw std::logic_error("edge piece is not two-dimensional");
    // Slice each ray at height one and take the lattice length of the segment.
    QVec p[2];
    for (int i = 0; i < 2; ++i) {
      Vec amb = mat_apply(fp.embedding, fp.cone.rays[i]);
      Rat s(amb[0]);
      if (s <= 0) throw std::logic_error("edge piece ray does not project positively");
      p[i] = QVec{Rat(amb[0]) / s, Rat(amb[1]) / s, Rat(amb[2]) / s};
    }
    QVec diff{p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]};
    Int den = 1;
    for (const Rat& x : diff) den = den / gcd_int(den, denominator(x)) * denominator(x);
    Vec w(3);
    for (int i = 0; i < 3; ++i) w[i] = numerator(diff[i]) * (den / denominator(diff[i]));
    Int g = content(w);
    if (g % den != 0) throw std::logic_error("slice length is not integral");
    Int len = g / den;
    if (len != curve.lengths[e][0]) throw std::logic_error("slice length disagrees with the metric");
    out.lengths.push_back(len);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<Vec, Vec>> edge_splittings(const Cone& base, const Vec& total,
                                                 long long budget) {
  int r = base.rank;
  std::vector<std::pair<Vec, Vec>> out;
  if (r == 0) return out;
  // Polytope {x : <x, ray> in [0, <total, ray>] for all rays}; enumerate the
  // vertices from rank-sized subsets of tight constraints, then scan the
  // integer points of the bounding box.
  struct Constraint {
    Vec normal;
    Int offset;  // x . normal = offset when tight
  };
  std::vector<Constraint> cs;
  for (const Vec& ray : base.rays) {
    cs.push_back({ray, Int(0)});
    cs.push_back({ray, dot(total, ray)});
  }
  int m = static_cast<int>(cs.size());
  std::vector<QVec> vertices;
  std::vector<int> idx(r);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == r) {
      Mat a(r, r);
      QVec b(r);
      for (int i = 0; i < r; ++i) {
        for (int c = 0; c < r; ++c) a.at(i, c) = cs[idx[i]].normal[c];
        b[i] = Rat(cs[idx[i]].offset);
      }
      if (rank(a) != r) return;
      auto x = solve_rational(a, b);
      if (!x) return;
      vertices.push_back(*x);
      return;
    }
    for (int i = start; i < m; ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  if (vertices.empty()) return out;
  QVec lo = vertices[0], hi = vertices[0];
  for (const QVec& v : vertices) {
    for (int i = 0; i < r; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
  }
  // Integer bounding box.
  std::vector<Int> ilo(r), ihi(r);
  long long volume = 1;
  for (int i = 0; i < r; ++i) {
    Int l = numerator(lo[i]) / denominator(lo[i]);
    while (Rat(l) > lo[i]) --l;
    Int h = numerator(hi[i]) / denominator(hi[i]);
    while (Rat(h) < hi[i]) ++h;
    ilo[i] = l;
    ihi[i] = h;
    Int width = h - l + 1;
    if (width > budget) throw BudgetExceeded("edge splitting box too large");
    volume *= static_cast<long long>(width);
    if (volume > budget) throw BudgetExceeded("edge splitting box too large");
  }
  Vec x(r);
  std::function<void(int)> scan = [&](int i) {
    if (i == r) {
      // Membership: x and total - x in the dual monoid, both nonzero.
      if (is_zero(x)) return;
      Vec rest(r);
      for (int j = 0; j < r; ++j) rest[j] = total[j] - x[j];
      if (is_zero(rest)) return;
      for (const Vec& ray : base.rays) {
        if (dot(x, ray) < 0 || dot(rest, ray) < 0) return;
      }
      out.emplace_back(x, rest);
      return;
    }
    for (Int v = ilo[i]; v <= ihi[i]; ++v) {
      x[i] = v;
      scan(i + 1);
    }
  };
  scan(0);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// The forgetful morphism on the finite moduli stacks, and the fiber-product
// presentation of the universal curve.

namespace {

// Traces of the forget surgery: which source vertices/flags survive, and as
// what. Rebuilt here (rather than stored) so ForgetResult stays lean.
struct ForgetTrace {
  std::vector<int> vertex_to;  // -1 when removed
  std::vector<int> flag_to;    // -1 when removed; case (c) maps the far flag to the new leg
};

ForgetTrace trace_forget(const TropicalCurve& before, const ForgetResult& after) {
  const MarkedGraph& g = before.graph;
  const MarkedGraph& h = after.curve.graph;
  ForgetTrace t;
  t.vertex_to.assign(g.num_vertices(), -1);
  t.flag_to.assign(g.num_flags(), -1);
  int n_plus = g.num_legs();
  int last_flag = g.leg_flag(n_plus);
  int v = g.flag_vertex[last_flag];

  if (std::holds_alternative<VertexDatum>(after.datum)) {
    // Case (a): vertices unchanged; the rebuilt graph lists edge flags first
    // (in edge order), then the surviving legs in original flag order.
    for (int w = 0; w < g.num_vertices(); ++w) t.vertex_to[w] = w;
    int nf = 0;
    auto es = g.edges();
    for (int e = 0; e < g.num_edges(); ++e) {
      t.flag_to[es[e].first] = nf++;
      t.flag_to[es[e].second] = nf++;
    }
    for (int f = 0; f < g.num_flags(); ++f) {
      if (g.flag_partner[f] != f || f == last_flag) continue;
      t.flag_to[f] = nf++;
    }
    if (nf != h.num_flags()) throw std::logic_error("trace_forget: case (a) flag count mismatch");
    return t;
  }
  // Cases (b) and (c): v and its flags disappear.
  std::vector<int> vmap(g.num_vertices(), -1);
  int nv = 0;
  for (int w = 0; w < g.num_vertices(); ++w) {
    if (w != v) vmap[w] = nv++;
  }
  t.vertex_to = vmap;
  if (std::holds_alternative<LegDatum>(after.datum)) {
    // Case (c): the far flag of the pivot edge became the relabeled leg.
    const auto& ld = std::get<LegDatum>(after.datum);
    int legf = -1, edgef = -1;
    for (int f = 0; f < g.num_flags(); ++f) {
      if (g.flag_vertex[f] != v || f == last_flag) continue;
      if (g.flag_partner[f] == f) legf = f;
      else edgef = f;
    }
    int far = g.flag_partner[edgef];
    int edge = g.edge_of_flag(edgef);
    int nf = 0;
    auto edges = g.edges();
    // Result build order: edges except the pivot, then legs except the two,
    // then the relabeled leg.
    for (int e = 0; e < g.num_edges(); ++e) {
      if (e == edge) continue;
      t.flag_to[edges[e].first] = nf++;
      t.flag_to[edges[e].second] = nf++;
    }
    for (int f = 0; f < g.num_flags(); ++f) {
      if (g.flag_partner[f] != f || f == last_flag || f == legf) continue;
      t.flag_to[f] = nf++;
    }
    t.flag_to[far] = nf++;
    (void)ld;
    if (nf != h.num_flags()) throw std::logic_error("trace_forget: case (c) flag count mismatch");
    return t;
  }
  // Case (b): the far flags of the two merged edges become the new edge.
  std::vector<int> at_v;
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_vertex[f] == v && f != last_flag) at_v.push_back(f);
  }
  int e1 = g.edge_of_flag(at_v[0]), e2 = g.edge_of_flag(at_v[1]);
  int far1 = g.flag_partner[at_v[0]], far2 = g.flag_partner[at_v[1]];
  int nf = 0;
  auto edges = g.edges();
  for (int e = 0; e < g.num_edges(); ++e) {
    if (e == e1 || e == e2) continue;
    t.flag_to[edges[e].first] = nf++;
    t.flag_to[edges[e].second] = nf++;
  }
  t.flag_to[far1] = nf++;
  t.flag_to[far2] = nf++;
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] != f || f == last_flag) continue;
    t.flag_to[f] = nf++;
  }
  if (nf != h.num_flags()) throw std::logic_error("trace_forget: case (b) flag count mismatch");
  return t;
}

// The morphism between forgotten graphs induced by a morphism pi upstairs.
GraphMorphism forget_on_morphism(const GraphMorphism& pi, const TropicalCurve& src_curve,
                                 const ForgetResult& src_f, const ForgetTrace& src_t,
                                 const ForgetResult& dst_f, const ForgetTrace& dst_t) {
  const MarkedGraph& hs = src_f.curve.graph;
  const MarkedGraph& hd = dst_f.curve.graph;
  GraphMorphism out;
  out.source = hs;
  out.target = hd;
  out.vertex_image.assign(hs.num_vertices(), -1);
  out.flag_image.assign(hs.num_flags(), {true, -1});
  // Vertices: unique surviving preimage, then push through pi and the trace.
  for (int v = 0; v < src_curve.graph.num_vertices(); ++v) {
    if (src_t.vertex_to[v] < 0) continue;
    int pv = pi.vertex_image[v];
    if (dst_t.vertex_to[pv] < 0) throw std::logic_error("forget_on_morphism: vertex image removed");
    out.vertex_image[src_t.vertex_to[v]] = dst_t.vertex_to[pv];
  }
  // Flags: chase where the traces allow, then reconcile each edge. A chase
  // lands on a vertex either because the edge genuinely contracts or because
  // that particular preimage edge of a merged pair was contracted; a flag
  // answer on either side wins and fixes the partner by the involution.
  enum class State { Unknown, OnVertex, OnFlag };
  std::vector<State> state(hs.num_flags(), State::Unknown);
  std::vector<int> where(hs.num_flags(), -1);
  for (int f = 0; f < src_curve.graph.num_flags(); ++f) {
    int h = src_t.flag_to[f];
    if (h < 0) continue;
    auto img = pi.flag_image[f];
    if (img.first) {
      state[h] = State::OnVertex;
    } else if (dst_t.flag_to[img.second] >= 0) {
      state[h] = State::OnFlag;
      where[h] = dst_t.flag_to[img.second];
    }
  }
  for (int h = 0; h < hs.num_flags(); ++h) {
    int partner = hs.flag_partner[h];
    if (partner == h) {
      if (state[h] != State::OnFlag) {
        // Legs survive; resolve by label.
        state[h] = State::OnFlag;
        where[h] = hd.leg_flag(hs.flag_label[h]);
      }
      out.flag_image[h] = {false, where[h]};
      continue;
    }
    if (partner < h) continue;  // handle each edge once
    bool h_flag = state[h] == State::OnFlag;
    bool p_flag = state[partner] == State::OnFlag;
    if (h_flag && p_flag) {
      if (hd.flag_partner[where[h]] != where[partner]) {
        throw std::logic_error("forget_on_morphism: incoherent edge image");
      }
      out.flag_image[h] = {false, where[h]};
      out.flag_image[partner] = {false, where[partner]};
    } else if (h_flag || p_flag) {
      int known = h_flag ? h : partner;
      int other = h_flag ? partner : h;
      out.flag_image[known] = {false, where[known]};
      out.flag_image[other] = {false, hd.flag_partner[where[known]]};
    } else {
      out.flag_image[h] = {true, out.vertex_image[hs.flag_vertex[h]]};
      out.flag_image[partner] = {true, out.vertex_image[hs.flag_vertex[partner]]};
    }
  }
  // Contracted set and final validation.
  auto hedges = hs.edges();
  for (int e = 0; e < hs.num_edges(); ++e) {
    if (out.flag_image[hedges[e].first].first) out.contracted_edges.push_back(e);
  }
  out.validate();
  return out;
}

struct ForgetfulData {
  ModuliStack big;    // (g, n+1)
  ModuliStack small;  // (g, n)
  StackMorphism morphism;  // big.cat -> small.cat
  // Per big object: the forgotten tautological curve and the chosen
  // identification with its class representative.
  std::vector<TropicalCurve> forgotten;       // over sigma_B
  std::vector<GraphMorphism> rep_iso;         // graph(forgotten) -> rep graph
};

TropicalCurve tautological_curve(const MarkedGraph& g) {
  int ne = g.num_edges();
  std::vector<Vec> lengths;
  for (int e = 0; e < ne; ++e) {
    Vec v(ne, Int(0));
    v[e] = 1;
    lengths.push_back(std::move(v));
  }
  return TropicalCurve::make(Cone::orthant(ne), g, lengths);
}

ForgetfulData build_forgetful(int g, int n) {
  ForgetfulData out;
  out.big = build_moduli_stack(g, n + 1);
  out.small = build_moduli_stack(g, n);
  int k = out.big.cat.num_objects();
  std::vector<ForgetResult> fr;
  std::vector<ForgetTrace> traces;
  std::vector<TropicalCurve> tauts;
  out.morphism.obj_map.resize(k);
  out.morphism.cone_map.resize(k);
  for (int B = 0; B < k; ++B) {
    TropicalCurve taut = tautological_curve(out.big.classes[B]);
    ForgetResult f = forget(taut);
    traces.push_back(trace_forget(taut, f));
    tauts.push_back(taut);
    fr.push_back(f);
    out.forgotten.push_back(f.curve);
    int cls = out.small.object_of_class(f.curve.graph);
    out.morphism.obj_map[B] = cls;
    GraphMorphism rho = isomorphisms(f.curve.graph, out.small.classes[cls]).at(0);
    out.rep_iso.push_back(rho);
    // Cone map: row per representative edge.
    auto rep_edges = out.small.classes[cls].edges();
    GraphMorphism rho_inv = invert(rho);
    Mat m(out.small.classes[cls].num_edges(), out.big.classes[B].num_edges());
    for (int e = 0; e < out.small.classes[cls].num_edges(); ++e) {
      int src_edge = f.curve.graph.edge_of_flag(rho_inv.flag_image[rep_edges[e].first].second);
      for (int c = 0; c < out.big.classes[B].num_edges(); ++c) {
        m.at(e, c) = f.curve.lengths[src_edge][c];
      }
    }
    out.morphism.cone_map[B] = std::move(m);
  }
  out.morphism.arrow_map.resize(out.big.cat.num_arrows());
  for (int a = 0; a < out.big.cat.num_arrows(); ++a) {
    int src = out.big.cat.arrows[a].src;
    int dst = out.big.cat.arrows[a].dst;
    // The contraction behind the arrow runs classes[dst] -> classes[src].
    const GraphMorphism& pi = out.big.arrow_contractions[a];
    GraphMorphism induced =
        forget_on_morphism(pi, tauts[dst], fr[dst], traces[dst], fr[src], traces[src]);
    // Conjugate by the representative identifications.
    GraphMorphism conj = compose(out.rep_iso[src], compose(induced, invert(out.rep_iso[dst])));
    int found = -1;
    for (int c = 0; c < out.small.cat.num_arrows(); ++c) {
      if (out.small.cat.arrows[c].src != out.morphism.obj_map[src] ||
          out.small.cat.arrows[c].dst != out.morphism.obj_map[dst]) {
        continue;
      }
      if (same_map(out.small.arrow_contractions[c], conj)) found = c;
    }
    if (found < 0) throw std::logic_error("forgetful arrow image missing");
    out.morphism.arrow_map[a] = found;
  }
  CheckResult ok = out.morphism.validate(out.big.cat, out.small.cat);
  if (!ok.ok) throw std::logic_error("forgetful morphism invalid: " + ok.message);
  return out;
}

// The classifying morphism of a curve from the face complex of its base.
StackMorphism classifying_morphism(const TropicalCurve& curve, const FaceComplex& base,
                                   const ModuliStack& m,
                                   std::vector<PullbackResult>* restrictions,
                                   std::vector<GraphMorphism>* rep_isos) {
  StackMorphism out;
  int k = static_cast<int>(base.faces.size());
  out.obj_map.resize(k);
  out.cone_map.resize(k);
  restrictions->clear();
  rep_isos->clear();
  for (int i = 0; i < k; ++i) {
    restrictions->push_back(restrict_to_face(curve, base.faces[i]));
    const TropicalCurve& r = restrictions->back().curve;
    int cls = m.object_of_class(r.graph);
    out.obj_map[i] = cls;
    GraphMorphism rho = isomorphisms(r.graph, m.classes[cls]).at(0);
    rep_isos->push_back(rho);
    GraphMorphism rho_inv = invert(rho);
    auto rep_edges = m.classes[cls].edges();
    Mat cm(m.classes[cls].num_edges(), base.faces[i].dim());
    for (int e = 0; e < m.classes[cls].num_edges(); ++e) {
      int src_edge = r.graph.edge_of_flag(rho_inv.flag_image[rep_edges[e].first].second);
      for (int c = 0; c < base.faces[i].dim(); ++c) cm.at(e, c) = r.lengths[src_edge][c];
    }
    out.cone_map[i] = std::move(cm);
  }
  out.arrow_map.resize(base.complex.num_arrows());
  for (int a = 0; a < base.complex.num_arrows(); ++a) {
    int fs = base.complex.arrows[a].src;
    int fb = base.complex.arrows[a].dst;
    // Witness contraction graph(curve|fb) -> graph(curve|fs).
    ConeMorphism rel{base.faces[fs].as_cone, base.faces[fb].as_cone, base.complex.arrows[a].matrix};
    PullbackResult step = pullback(rel, (*restrictions)[fb].curve);
    if (!(step.curve.graph == (*restrictions)[fs].curve.graph)) {
      throw std::logic_error("classifying_morphism: restriction mismatch");
    }
    GraphMorphism conj = compose((*rep_isos)[fs], compose(step.contraction, invert((*rep_isos)[fb])));
    int found = -1;
    for (int c = 0; c < m.cat.num_arrows(); ++c) {
      if (m.cat.arrows[c].src != out.obj_map[fs] || m.cat.arrows[c].dst != out.obj_map[fb]) continue;
      if (same_map(m.arrow_contractions[c], conj)) found = c;
    }
    if (found < 0) throw std::logic_error("classifying arrow image missing");
    out.arrow_map[a] = found;
  }
  return out;
}

// Invertible arrows of the moduli stack grouped by (source, target).
std::vector<int> invertible_arrows_between(const ConeCategory& cat, int src, int dst) {
  std::vector<int> out;
  for (int i : cat.hom(src, dst)) {
    for (int j : cat.hom(dst, src)) {
      if (cat.composition.at({j, i}) == cat.identity_arrow[src] &&
          cat.composition.at({i, j}) == cat.identity_arrow[dst]) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

// 2-fiber product of two combinatorial cone stacks over a common target.
ConeStackData stack_fiber_product(const ConeCategory& A, const ConeCategory& B,
                                  const ConeCategory& M, const StackMorphism& F,
                                  const StackMorphism& G) {
  struct Obj {
    int a, b, theta;  // theta: invertible M-arrow F(a) -> G(b)
    Embedded cut;
  };
  std::vector<Obj> objs;
  for (int a = 0; a < A.num_objects(); ++a) {
    for (int b = 0; b < B.num_objects(); ++b) {
      for (int theta : invertible_arrows_between(M, F.obj_map[a], G.obj_map[b])) {
        int na = A.cones[a].rank, nb = B.cones[b].rank;
        int n = na + nb;
        std::vector<Vec> hs;
        for (const Vec& h : A.cones[a].facets) {
          Vec v(n, Int(0));
          for (int i = 0; i < na; ++i) v[i] = h[i];
          hs.push_back(std::move(v));
        }
        for (const Vec& h : B.cones[b].facets) {
          Vec v(n, Int(0));
          for (int i = 0; i < nb; ++i) v[na + i] = h[i];
          hs.push_back(std::move(v));
        }
        Mat lhs = mat_mul(M.arrows[theta].matrix, F.cone_map[a]);
        const Mat& rhs = G.cone_map[b];
        std::vector<Vec> eqs;
        for (int r = 0; r < lhs.rows; ++r) {
          Vec v(n, Int(0));
          for (int i = 0; i < na; ++i) v[i] = lhs.at(r, i);
          for (int i = 0; i < nb; ++i) v[na + i] = -rhs.at(r, i);
          eqs.push_back(std::move(v));
        }
        Embedded cut = cone_from_constraints(n, hs, eqs);
        // Keep only relint-meeting triples.
        Vec sum(cut.cone.rank, Int(0));
        for (const Vec& ray : cut.cone.rays) {
          for (int i = 0; i < cut.cone.rank; ++i) sum[i] += ray[i];
        }
        Vec amb = mat_apply(cut.embedding, sum);
        QVec pa(na), pb(nb);
        for (int i = 0; i < na; ++i) pa[i] = Rat(amb[i]);
        for (int i = 0; i < nb; ++i) pb[i] = Rat(amb[na + i]);
        if (!A.cones[a].interior_contains_q(pa) || !B.cones[b].interior_contains_q(pb)) continue;
        objs.push_back({a, b, theta, std::move(cut)});
      }
    }
  }
  ConeStackData out;
  for (const Obj& o : objs) out.add_object(o.cut.cone);
  // Arrows: pairs (u, v) with the theta square commuting in M.
  std::vector<std::pair<int, int>> arrow_pair;
  for (size_t i = 0; i < objs.size(); ++i) {
    for (size_t j = 0; j < objs.size(); ++j) {
      for (int u : A.hom(objs[i].a, objs[j].a)) {
        for (int v : B.hom(objs[i].b, objs[j].b)) {
          // theta_j . F(u) = G(v) . theta_i
          if (M.composition.at({objs[j].theta, F.arrow_map[u]}) !=
              M.composition.at({G.arrow_map[v], objs[i].theta})) {
            continue;
          }
          // Cut-cone map.
          int na = A.cones[objs[i].a].rank, nb = B.cones[objs[i].b].rank;
          Mat block(A.cones[objs[j].a].rank + B.cones[objs[j].b].rank, objs[i].cut.cone.rank);
          Mat ua = A.arrows[u].matrix, vb = B.arrows[v].matrix;
          for (int r = 0; r < ua.rows; ++r) {
            for (int c = 0; c < objs[i].cut.cone.rank; ++c) {
              Int s = 0;
              for (int kk = 0; kk < na; ++kk) s += ua.at(r, kk) * objs[i].cut.embedding.at(kk, c);
              block.at(r, c) = s;
            }
          }
          for (int r = 0; r < vb.rows; ++r) {
            for (int c = 0; c < objs[i].cut.cone.rank; ++c) {
              Int s = 0;
              for (int kk = 0; kk < nb; ++kk) s += vb.at(r, kk) * objs[i].cut.embedding.at(na + kk, c);
              block.at(ua.rows + r, c) = s;
            }
          }
          auto x = solve_unique_integer_mat(objs[j].cut.embedding, block);
          if (!x) throw std::logic_error("stack_fiber_product: arrow matrix not integral");
          int id = out.add_arrow(static_cast<int>(i), static_cast<int>(j), *x);
          arrow_pair.emplace_back(u, v);
          (void)id;
        }
      }
    }
  }
  // Identities and composition from the component pairs.
  for (size_t i = 0; i < objs.size(); ++i) {
    for (int a = 0; a < out.num_arrows(); ++a) {
      if (out.arrows[a].src != static_cast<int>(i) || out.arrows[a].dst != static_cast<int>(i)) {
        continue;
      }
      if (arrow_pair[a] == std::make_pair(A.identity_arrow[objs[i].a], B.identity_arrow[objs[i].b])) {
        out.identity_arrow[i] = a;
      }
    }
  }
  std::map<std::tuple<int, int, std::pair<int, int>>, int> lookup;
  for (int a = 0; a < out.num_arrows(); ++a) {
    lookup[{out.arrows[a].src, out.arrows[a].dst, arrow_pair[a]}] = a;
  }
  for (int a = 0; a < out.num_arrows(); ++a) {
    for (int b = 0; b < out.num_arrows(); ++b) {
      if (out.arrows[a].dst != out.arrows[b].src) continue;
      std::pair<int, int> comp{A.composition.at({arrow_pair[b].first, arrow_pair[a].first}),
                               B.composition.at({arrow_pair[b].second, arrow_pair[a].second})};
      auto it = lookup.find({out.arrows[a].src, out.arrows[b].dst, comp});
      if (it == lookup.end()) throw std::logic_error("stack_fiber_product: composition not closed");
      out.set_composite(b, a, it->second);
    }
  }
  return out;
}

}  // namespace

ConeStackData universal_curve_via_moduli(const TropicalCurve& curve) {
  int g = curve.genus();
  int n = curve.markings();
  ForgetfulData fd = build_forgetful(g, n);
  FaceComplex base = cone_as_complex(curve.base);
  std::vector<PullbackResult> restrictions;
  std::vector<GraphMorphism> rep_isos;
  StackMorphism u = classifying_morphism(curve, base, fd.small, &restrictions, &rep_isos);
  CheckResult ok = u.validate(base.complex, fd.small.cat);
  if (!ok.ok) throw std::logic_error("classifying morphism invalid: " + ok.message);
  return stack_fiber_product(base.complex, fd.big.cat, fd.small.cat, u, fd.morphism);
}

// ---------------------------------------------------------------------------

namespace {

// Transport a section datum along a curve isomorphism.
SectionDatum datum_transport(const CurveIsomorphism& iso, const TropicalCurve& target,
                             const SectionDatum& d) {
  if (const auto* v = std::get_if<VertexDatum>(&d)) {
    return VertexDatum{iso.map.vertex_image[v->vertex]};
  }
  if (const auto* l = std::get_if<LegDatum>(&d)) return *l;  // labels are preserved
  const auto& e = std::get<EdgeDatum>(d);
  return normalize_datum(target, EdgeDatum{iso.map.flag_image[e.flag].second, e.near_part, e.far_part});
}

// Pairs (curve over sigma, identification of its forgetful image with Gamma).
struct PointedPair {
  TropicalCurve curve;
  GraphMorphism psi;  // graph(forget(curve)) -> graph(Gamma), metric-matching
};

bool pairs_isomorphic(const PointedPair& x, const PointedPair& y, const TropicalCurve& gamma) {
  for (const CurveIsomorphism& chi : isomorphisms(x.curve, y.curve)) {
    ForgetResult fx = forget(x.curve);
    ForgetResult fy = forget(y.curve);
    ForgetTrace tx = trace_forget(x.curve, fx);
    ForgetTrace ty = trace_forget(y.curve, fy);
    GraphMorphism induced = forget_on_morphism(chi.map, x.curve, fx, tx, fy, ty);
    GraphMorphism lhs = compose(y.psi, induced);
    if (same_map(lhs, x.psi)) return true;
  }
  (void)gamma;
  return false;
}

}  // namespace

UniversalCertificate universal_fiber_check(const TropicalCurve& curve, int leg_budget,
                                           bool check_equivalence, long long budget) {
  UniversalCertificate cert;
  int n = curve.markings();

  // Build the datum list.
  std::vector<SectionDatum> data;
  for (int v = 0; v < curve.graph.num_vertices(); ++v) data.push_back(VertexDatum{v});
  bool ray_base = curve.base == Cone::ray();
  std::vector<Vec> leg_sample;
  if (ray_base) {
    for (int k = 1; k <= leg_budget; ++k) leg_sample.push_back(Vec{Int(k)});
  } else {
    for (const Vec& f : curve.base.facets) {
      leg_sample.push_back(f);
      Vec twice(f.size());
      for (size_t i = 0; i < f.size(); ++i) twice[i] = 2 * f[i];
      leg_sample.push_back(twice);
    }
    std::sort(leg_sample.begin(), leg_sample.end(), lex_less);
    leg_sample.erase(std::unique(leg_sample.begin(), leg_sample.end()), leg_sample.end());
  }
  cert.leg_sample = leg_sample;
  for (int l = 1; l <= n; ++l) {
    for (const Vec& d : leg_sample) {
      if (!is_zero(d)) data.push_back(LegDatum{l, d});
    }
  }
  auto edges = curve.graph.edges();
  try {
    for (int e = 0; e < curve.graph.num_edges(); ++e) {
      for (auto& [near, far] : edge_splittings(curve.base, curve.lengths[e], budget)) {
        SectionDatum d = normalize_datum(curve, EdgeDatum{edges[e].first, near, far});
        bool dup = false;
        for (const SectionDatum& prev : data) {
          if (datum_equal(curve, prev, d)) dup = true;
        }
        if (!dup) data.push_back(d);
      }
    }
  } catch (const BudgetExceeded&) {
    cert.exhaustive_edges = false;
  }
  cert.datum_classes = static_cast<int>(data.size());

  // Round trip and the genus weighting.
  std::vector<PointedPair> attach_side;
  for (const SectionDatum& d : data) {
    TropicalCurve up = attach(curve, d);
    if (h_last(up) != H(d, curve)) {
      cert.ok = false;
      cert.message = "H disagrees with the genus at the new leg";
      return cert;
    }
    ForgetResult back = forget(up);
    bool matched = false;
    for (const CurveIsomorphism& psi : isomorphisms(back.curve, curve)) {
      if (datum_equal(curve, datum_transport(psi, curve, back.datum), d)) matched = true;
    }
    if (!matched) {
      cert.ok = false;
      cert.message = "forget(attach(datum)) does not recover the datum";
      return cert;
    }
    // The canonical pointed pair attached to the datum.
    GraphMorphism psi0 = isomorphisms(back.curve, curve).at(0).map;
    attach_side.push_back(PointedPair{up, psi0});
  }
  // Distinct data give non-isomorphic pointed pairs.
  for (size_t i = 0; i < attach_side.size(); ++i) {
    for (size_t j = i + 1; j < attach_side.size(); ++j) {
      if (pairs_isomorphic(attach_side[i], attach_side[j], curve)) {
        cert.ok = false;
        cert.message = "two distinct data give isomorphic pointed curves";
        return cert;
      }
    }
  }

  // Independent candidate sweep (exhaustive for a ray base with exhaustive
  // splittings): every pointed curve forgetting to the curve arises.
  if (ray_base && cert.exhaustive_edges) {
    Int total(0);
    for (const Vec& d : curve.lengths) total += d[0];
    Int maxlen = total;
    if (Int(leg_budget) > maxlen) maxlen = leg_budget;
    std::vector<PointedPair> candidates;
    int g = curve.genus();
    for (const MarkedGraph& H : enumerate_stable(g, n + 1)) {
      int ne = H.num_edges();
      std::vector<Vec> lens(ne, Vec{Int(1)});
      std::function<void(int)> sweep = [&](int e) {
        if (e == ne) {
          TropicalCurve cand = TropicalCurve::make(Cone::ray(), H, lens);
          ForgetResult f = forget(cand);
          for (const CurveIsomorphism& psi : isomorphisms(f.curve, curve)) {
            PointedPair pp{cand, psi.map};
            bool known = false;
            for (const PointedPair& prev : candidates) {
              if (pairs_isomorphic(prev, pp, curve)) known = true;
            }
            if (!known) candidates.push_back(pp);
          }
          return;
        }
        for (Int v = 1; v <= maxlen; ++v) {
          lens[e] = Vec{v};
          sweep(e + 1);
        }
      };
      sweep(0);
    }
    cert.curve_classes = static_cast<int>(candidates.size());
    if (candidates.size() != attach_side.size()) {
      cert.ok = false;
      cert.message = "pointed-curve classes and section data do not biject";
      return cert;
    }
    for (const PointedPair& c : candidates) {
      bool hit = false;
      for (const PointedPair& a : attach_side) {
        if (pairs_isomorphic(a, c, curve)) hit = true;
      }
      if (!hit) {
        cert.ok = false;
        cert.message = "a pointed curve is not in the image of attach";
        return cert;
      }
    }
  } else {
    cert.curve_classes = static_cast<int>(attach_side.size());
  }

  if (check_equivalence) {
    cert.checked_equivalence = true;
    UniversalCone uc = cone_over(curve);
    ConeStackData via_moduli = universal_curve_via_moduli(curve);
    auto witness = equivalent(via_moduli, uc.presentation, budget);
    if (!witness) {
      cert.ok = false;
      cert.message = "fiber-product presentation is not equivalent to the glued cone space";
      return cert;
    }
  }
  return cert;
}

}  // namespace tropmod
