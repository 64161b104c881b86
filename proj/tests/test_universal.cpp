#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tropmod/universal.hpp"

using namespace tropmod;

namespace {

Vec v(std::initializer_list<long> xs) {
  Vec out;
  for (long x : xs) out.push_back(Int(x));
  return out;
}

TropicalCurve marked_loop(long len, int marks) {
  GraphBuilder b;
  int w = b.add_vertex(0);
  b.add_edge(w, w);
  for (int i = 1; i <= marks; ++i) b.add_leg(w, i);
  return TropicalCurve::make(Cone::ray(), b.build(), {v({len})});
}

TropicalCurve weight_one_vertex_curve() {
  GraphBuilder b;
  int w = b.add_vertex(1);
  b.add_leg(w, 1);
  return TropicalCurve::make(Cone::zero(), b.build(), {});
}

}  // namespace

TEST_CASE("cone over the once-marked loop of length 1: the waffle pattern") {
  TropicalCurve gamma = marked_loop(1, 1);
  UniversalCone uc = cone_over(gamma);
  // Pieces: vertex ray, leg quadrant, 2-dim edge cone; plus the leg's outer
  // ray and the origin.
  CHECK(uc.presentation.num_objects() == 5);
  auto fv = uc.presentation.f_vector();
  CHECK(fv[0] == 1);
  CHECK(fv[1] == 2);
  CHECK(fv[2] == 2);
  CHECK(check_cone_space(uc.presentation).ok);
  // The edge piece has rays (1,1,0) and (1,0,1) in (s, a, b) coordinates; in
  // its own lattice it is a 2-dimensional cone receiving two distinct face
  // arrows from the vertex ray.
  int vertex_obj = uc.vertex_piece[0];
  int edge_obj = uc.edge_piece[0];
  CHECK(uc.presentation.cones[edge_obj].rank == 2);
  int arrows_between = 0;
  for (int a = 0; a < uc.presentation.num_arrows(); ++a) {
    if (uc.presentation.arrows[a].src == vertex_obj && uc.presentation.arrows[a].dst == edge_obj) {
      ++arrows_between;
    }
  }
  CHECK(arrows_between == 2);
  // Structure map valid; piece count |V| + |L| + |E| = 3 top pieces.
  CHECK(uc.structure_map.validate(uc.presentation, uc.base.complex).ok);
}

TEST_CASE("cone over a vertex-only curve over the zero cone") {
  TropicalCurve gamma = weight_one_vertex_curve();
  UniversalCone uc = cone_over(gamma);
  // One point piece and one ray piece (the leg).
  CHECK(uc.presentation.num_objects() == 2);
  auto fv = uc.presentation.f_vector();
  CHECK(fv[0] == 1);
  CHECK(fv[1] == 1);
  CHECK(check_cone_space(uc.presentation).ok);
}

TEST_CASE("cone over a non-loop edge of length (0,1): two distinct vertex pieces") {
  GraphBuilder b;
  int p = b.add_vertex(1), q = b.add_vertex(1);
  b.add_edge(p, q);
  TropicalCurve gamma = TropicalCurve::make(Cone::orthant(2), b.build(), {v({0, 1})});
  UniversalCone uc = cone_over(gamma);
  CHECK(uc.presentation.cones[uc.edge_piece[0]].rank == 3);
  CHECK(uc.vertex_piece[0] != uc.vertex_piece[1]);
  CHECK(check_cone_space(uc.presentation).ok);
  // The two base-face arrows from the vertex pieces into the edge piece land
  // on distinct faces.
  std::set<std::string> targets;
  for (int a = 0; a < uc.presentation.num_arrows(); ++a) {
    if (uc.presentation.arrows[a].dst != uc.edge_piece[0]) continue;
    if (uc.presentation.arrows[a].src == uc.vertex_piece[0] ||
        uc.presentation.arrows[a].src == uc.vertex_piece[1]) {
      std::string key;
      for (const Int& x : uc.presentation.arrows[a].matrix.a) key += x.str() + ",";
      targets.insert(key);
    }
  }
  CHECK(targets.size() == 2);
}

TEST_CASE("structure map composed with the leg section is the identity") {
  TropicalCurve gamma = marked_loop(2, 1);
  UniversalCone uc = cone_over(gamma);
  int leg_obj = uc.section_object(1);
  // The leg piece sits over the full base.
  CHECK(uc.base.faces[uc.structure_map.obj_map[leg_obj]].dim() == gamma.base.rank);
  // Its structure matrix is the left projection (restricting to the glued
  // section face gives the identity on the base).
  const Mat& m = uc.structure_map.cone_map[leg_obj];
  CHECK(m.rows == gamma.base.rank);
  CHECK(m.cols == gamma.base.rank + 1);
}

TEST_CASE("fiber at one: loop lengths 2 and 3 give lattice lengths 2 and 3") {
  for (long len : {2L, 3L}) {
    TropicalCurve gamma = marked_loop(len, 1);
    UniversalCone uc = cone_over(gamma);
    FiberAtOne f = fiber_at_one(uc);
    REQUIRE(f.lengths.size() == 1);
    CHECK(f.lengths[0] == Int(len));
    CHECK(f.graph == gamma.graph);
    CHECK(f.weights == gamma.graph.weights);
  }
}

TEST_CASE("H on the three kinds of data") {
  GraphBuilder b;
  int p = b.add_vertex(2);
  b.add_edge(p, p);
  b.add_leg(p, 1);
  TropicalCurve gamma = TropicalCurve::make(Cone::ray(), b.build(), {v({2})});
  CHECK(H(VertexDatum{0}, gamma) == 2);
  CHECK(H(LegDatum{1, v({1})}, gamma) == 0);
  CHECK(H(EdgeDatum{0, v({1}), v({1})}, gamma) == 0);
}

TEST_CASE("the two-vertex witness: H jumps from 0 to g1+g2 under the face pullback") {
  // One edge of length (0,2) between weight-1 vertices over the quadrant.
  GraphBuilder b;
  int p = b.add_vertex(1), q = b.add_vertex(1);
  b.add_edge(p, q);
  TropicalCurve gamma = TropicalCurve::make(Cone::orthant(2), b.build(), {v({0, 2})});
  SectionDatum datum = EdgeDatum{0, v({0, 1}), v({0, 1})};
  validate_datum(gamma, datum);
  CHECK(H(datum, gamma) == 0);
  // Pull back to the x-axis: the edge length dies, the datum becomes the
  // merged vertex of weight 2.
  Face xf = smallest_face_containing(gamma.base, QVec{Rat(1), Rat(0)});
  PullbackResult pulled = pullback(xf.inclusion, gamma);
  SectionDatum moved = pullback_datum(xf.inclusion, gamma, datum, pulled);
  CHECK(H(moved, pulled.curve) == 2);
  CHECK(std::holds_alternative<VertexDatum>(moved));
}

TEST_CASE("attach: vertex, leg, and edge data") {
  TropicalCurve gamma = marked_loop(2, 1);
  // Vertex: same graph plus one leg.
  TropicalCurve at_v = attach(gamma, VertexDatum{0});
  CHECK(at_v.markings() == 2);
  CHECK(at_v.graph.num_edges() == 1);
  // Edge splitting (1,1): the two-vertex 2-cycle.
  TropicalCurve at_e = attach(gamma, EdgeDatum{0, v({1}), v({1})});
  CHECK(at_e.graph.num_vertices() == 2);
  CHECK(at_e.graph.num_edges() == 2);
  CHECK(at_e.lengths[0] == v({1}));
  CHECK(at_e.lengths[1] == v({1}));
  CHECK(at_e.genus() == 1);
  // Leg datum on the tautological-section situation.
  TropicalCurve wt1 = TropicalCurve::make(
      Cone::ray(),
      [] {
        GraphBuilder b;
        int p = b.add_vertex(1);
        b.add_leg(p, 1);
        return b.build();
      }(),
      {});
  TropicalCurve tripod = attach(wt1, LegDatum{1, v({3})});
  CHECK(tripod.graph.num_vertices() == 2);
  CHECK(tripod.graph.num_edges() == 1);
  CHECK(tripod.lengths[0] == v({3}));
  // Legs 1 and 2 on the new trivalent vertex.
  int f1 = tripod.graph.leg_flag(1), f2 = tripod.graph.leg_flag(2);
  CHECK(tripod.graph.flag_vertex[f1] == tripod.graph.flag_vertex[f2]);
  CHECK(tripod.graph.weights[tripod.graph.flag_vertex[f1]] == 0);
}

TEST_CASE("attach rejects invalid data") {
  TropicalCurve gamma = marked_loop(2, 1);
  CHECK_THROWS_AS(attach(gamma, EdgeDatum{0, v({1}), v({2})}), std::invalid_argument);
  CHECK_THROWS_AS(attach(gamma, EdgeDatum{0, v({0}), v({2})}), std::invalid_argument);
  CHECK_THROWS_AS(attach(gamma, LegDatum{1, v({0})}), std::invalid_argument);
}

TEST_CASE("forget: the three cases of the spec examples") {
  // (1,2): weight-1 vertex -- edge -- weight-0 vertex with legs 1,2.
  {
    GraphBuilder b;
    int p = b.add_vertex(1), q = b.add_vertex(0);
    b.add_edge(p, q);
    b.add_leg(q, 1);
    b.add_leg(q, 2);
    TropicalCurve c = TropicalCurve::make(Cone::ray(), b.build(), {v({5})});
    ForgetResult r = forget(c);
    CHECK(r.curve.graph.num_vertices() == 1);
    CHECK(r.curve.graph.weights[0] == 1);
    CHECK(r.curve.graph.num_edges() == 0);
    REQUIRE(std::holds_alternative<LegDatum>(r.datum));
    CHECK(std::get<LegDatum>(r.datum).label == 1);
    CHECK(std::get<LegDatum>(r.datum).distance == v({5}));
  }
  // (1,2): loop(x) at p, edge(y) to q with legs 1,2: forgetting leg 2 keeps
  // the loop and turns the bridge into leg 1.
  {
    GraphBuilder b;
    int p = b.add_vertex(0), q = b.add_vertex(0);
    b.add_edge(p, p);
    b.add_edge(p, q);
    b.add_leg(q, 1);
    b.add_leg(q, 2);
    TropicalCurve c = TropicalCurve::make(Cone::orthant(2), b.build(), {v({1, 0}), v({0, 1})});
    ForgetResult r = forget(c);
    CHECK(r.curve.graph.num_edges() == 1);
    CHECK(r.curve.graph.num_vertices() == 1);
    REQUIRE(std::holds_alternative<LegDatum>(r.datum));
    CHECK(std::get<LegDatum>(r.datum).distance == v({0, 1}));
  }
  // Case (a): the leg-2 vertex stays stable.
  {
    TropicalCurve c = marked_loop(1, 2);
    ForgetResult r = forget(c);
    CHECK(r.curve.graph.num_edges() == 1);
    REQUIRE(std::holds_alternative<VertexDatum>(r.datum));
  }
  // Case (b): 2-cycle with the second leg on its own vertex.
  {
    GraphBuilder b;
    int p = b.add_vertex(0), q = b.add_vertex(0);
    b.add_edge(p, q);
    b.add_edge(p, q);
    b.add_leg(p, 1);
    b.add_leg(q, 2);
    TropicalCurve c = TropicalCurve::make(Cone::orthant(2), b.build(), {v({1, 0}), v({0, 1})});
    ForgetResult r = forget(c);
    CHECK(r.curve.graph.num_edges() == 1);
    CHECK(r.curve.lengths[0] == v({1, 1}));  // lengths add across the merge
    REQUIRE(std::holds_alternative<EdgeDatum>(r.datum));
  }
}

TEST_CASE("attach and forget are mutually inverse on sampled data") {
  TropicalCurve gamma = marked_loop(3, 1);
  std::vector<SectionDatum> data = {VertexDatum{0}, LegDatum{1, v({2})},
                                    EdgeDatum{0, v({1}), v({2})}, EdgeDatum{0, v({2}), v({1})}};
  for (const SectionDatum& d : data) {
    TropicalCurve up = attach(gamma, d);
    ForgetResult back = forget(up);
    bool ok = false;
    for (const CurveIsomorphism& psi : isomorphisms(back.curve, gamma)) {
      SectionDatum moved = back.datum;
      if (const auto* vd = std::get_if<VertexDatum>(&moved)) {
        moved = VertexDatum{psi.map.vertex_image[vd->vertex]};
      } else if (const auto* ed = std::get_if<EdgeDatum>(&moved)) {
        moved = normalize_datum(
            gamma, EdgeDatum{psi.map.flag_image[ed->flag].second, ed->near_part, ed->far_part});
      }
      if (datum_equal(gamma, moved, d)) ok = true;
    }
    CHECK(ok);
  }
}

TEST_CASE("clutch: bookkeeping and the contraction oracle") {
  GraphBuilder b1;
  int p = b1.add_vertex(1);
  b1.add_leg(p, 1);
  b1.add_leg(p, 2);  // the gluing leg
  TropicalCurve left = TropicalCurve::make(Cone::ray(), b1.build(), {});
  GraphBuilder b2;
  int q = b2.add_vertex(1);
  b2.add_leg(q, 1);
  TropicalCurve right = TropicalCurve::make(Cone::ray(), b2.build(), {});
  TropicalCurve glued = clutch(left, right, v({5}));
  CHECK(glued.genus() == 2);
  CHECK(glued.markings() == 1);
  CHECK(glued.graph.num_edges() == 1);
  CHECK(glued.lengths[0] == v({5}));
  // Contracting the new edge gives a single vertex of weight g1+g2.
  auto [gc, m] = contract(glued.graph, {0});
  CHECK(gc.num_vertices() == 1);
  CHECK(gc.weights[0] == 2);
  CHECK_THROWS_AS(clutch(left, right, v({0})), std::invalid_argument);
}

TEST_CASE("self clutch raises genus and can build the marked loop") {
  GraphBuilder b;
  int p = b.add_vertex(0);
  b.add_leg(p, 1);
  b.add_leg(p, 2);
  b.add_leg(p, 3);
  TropicalCurve tri = TropicalCurve::make(Cone::ray(), b.build(), {});
  TropicalCurve glued = self_clutch(tri, v({1}));
  CHECK(glued.genus() == 1);
  CHECK(glued.markings() == 1);
  CHECK_FALSE(isomorphisms(glued, marked_loop(1, 1)).empty());
  // Star and bullet on distinct vertices give a non-loop edge.
  GraphBuilder b2;
  int x = b2.add_vertex(1), y = b2.add_vertex(1);
  b2.add_edge(x, y);
  b2.add_leg(x, 1);
  b2.add_leg(x, 2);
  b2.add_leg(y, 3);
  TropicalCurve two = TropicalCurve::make(Cone::ray(), b2.build(), {v({1})});
  TropicalCurve glued2 = self_clutch(two, v({4}));
  CHECK(glued2.genus() == 3);
  CHECK(glued2.graph.num_edges() == 2);
  CHECK_FALSE(glued2.graph.edge_is_loop(1));
}

TEST_CASE("edge splittings over a ray and over the quadrant") {
  auto ray_splits = edge_splittings(Cone::ray(), v({4}));
  CHECK(ray_splits.size() == 3);  // (1,3),(2,2),(3,1)
  auto quad_splits = edge_splittings(Cone::orthant(2), v({1, 1}));
  // Nonzero pairs (a,b)+(c,d) = (1,1) in N^2: (0,1)+(1,0),(1,0)+(0,1),(1,1)? no:
  // both parts nonzero: (1,0),(0,1): 2 splittings.
  CHECK(quad_splits.size() == 2);
}

TEST_CASE("H is upper semicontinuous across all faces and sampled data") {
  // Tautological curves with doubled lengths over their own orthants.
  for (auto [g, n] : std::vector<std::pair<int, int>>{{1, 2}, {2, 0}}) {
    for (const MarkedGraph& cls : enumerate_stable(g, n)) {
      int ne = cls.num_edges();
      std::vector<Vec> lengths;
      for (int e = 0; e < ne; ++e) {
        Vec d(ne, Int(0));
        d[e] = 2;
        lengths.push_back(std::move(d));
      }
      TropicalCurve c = TropicalCurve::make(Cone::orthant(ne), cls, lengths);
      std::vector<SectionDatum> data;
      for (int vtx = 0; vtx < cls.num_vertices(); ++vtx) data.push_back(VertexDatum{vtx});
      auto es = cls.edges();
      for (int e = 0; e < ne; ++e) {
        for (auto& [a, b] : edge_splittings(c.base, c.lengths[e])) {
          data.push_back(normalize_datum(c, EdgeDatum{es[e].first, a, b}));
        }
      }
      for (int l = 1; l <= n; ++l) {
        Vec d(ne, Int(1));
        if (ne > 0) data.push_back(LegDatum{l, d});
      }
      for (const Face& f : face_lattice(c.base)) {
        PullbackResult pulled = pullback(f.inclusion, c);
        for (const SectionDatum& d : data) {
          SectionDatum moved = pullback_datum(f.inclusion, c, d, pulled);
          CHECK(H(moved, pulled.curve) >= H(d, c));
        }
      }
    }
  }
}

TEST_CASE("h_last is upper semicontinuous across face specializations") {
  for (auto [g, n] : std::vector<std::pair<int, int>>{{1, 2}, {2, 1}}) {
    for (const MarkedGraph& cls : enumerate_stable(g, n)) {
      int ne = cls.num_edges();
      std::vector<Vec> lengths;
      for (int e = 0; e < ne; ++e) {
        Vec d(ne, Int(0));
        d[e] = 1;
        lengths.push_back(std::move(d));
      }
      TropicalCurve c = TropicalCurve::make(Cone::orthant(ne), cls, lengths);
      for (const Face& f : face_lattice(c.base)) {
        PullbackResult pulled = pullback(f.inclusion, c);
        CHECK(h_last(pulled.curve) >= h_last(c));
      }
    }
  }
}

TEST_CASE("universal fiber certificate for the loop of length 2") {
  TropicalCurve gamma = marked_loop(2, 1);
  UniversalCertificate cert = universal_fiber_check(gamma, 3, false);
  CHECK(cert.ok);
  CHECK(cert.exhaustive_edges);
  // Data: 1 vertex, 3 leg distances, and the single splitting 2 = 1+1.
  CHECK(cert.datum_classes == 5);
  CHECK(cert.curve_classes == 5);
}

TEST_CASE("universal fiber certificate for the vertex curve over the zero cone") {
  TropicalCurve gamma = weight_one_vertex_curve();
  UniversalCertificate cert = universal_fiber_check(gamma, 2, false);
  CHECK(cert.ok);
  CHECK(cert.datum_classes == 1);  // only the vertex datum: no legs sampled on rank 0
}

TEST_CASE("the loop example: fiber product presentation matches the glued cone space") {
  TropicalCurve gamma = marked_loop(1, 1);
  ConeStackData via = universal_curve_via_moduli(gamma);
  CHECK(check_cone_space(via).ok);
  UniversalCone uc = cone_over(gamma);
  auto witness = equivalent(via, uc.presentation);
  REQUIRE(witness.has_value());
  CHECK(witness->forward.validate(via, uc.presentation).ok);
  CHECK(witness->backward.validate(uc.presentation, via).ok);
}

TEST_CASE("clutch commutes with forgetting a non-glued leg") {
  // Forget the top leg of the left input after clutching versus clutch of the
  // forgotten input; the glued leg is the highest label so forget targets the
  // result's top label, which comes from the right factor. Use a right factor
  // whose top non-glued label is the overall top.
  GraphBuilder bl;
  int p = bl.add_vertex(1);
  bl.add_leg(p, 1);
  bl.add_leg(p, 2);
  TropicalCurve left = TropicalCurve::make(Cone::ray(), bl.build(), {});
  GraphBuilder br;
  int q = br.add_vertex(1);
  br.add_leg(q, 1);
  br.add_leg(q, 2);
  br.add_leg(q, 3);  // gluing leg
  TropicalCurve right = TropicalCurve::make(Cone::ray(), br.build(), {});
  TropicalCurve glued = clutch(left, right, v({2}));  // legs 1, 2, 3 with 3 = right's 2
  ForgetResult f = forget(glued);
  // Forgetting the right factor's top retained leg commutes with clutching
  // the right factor with that leg forgotten... the right factor with leg 2
  // forgotten is the (1,2)-curve with legs {1, glue}.
  GraphBuilder br2;
  int q2 = br2.add_vertex(1);
  br2.add_leg(q2, 1);
  br2.add_leg(q2, 2);
  TropicalCurve right_small = TropicalCurve::make(Cone::ray(), br2.build(), {});
  TropicalCurve expect = clutch(left, right_small, v({2}));
  CHECK_FALSE(isomorphisms(f.curve, expect).empty());
}
