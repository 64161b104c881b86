#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "tropmod/curve.hpp"
#include "tropmod/stack.hpp"

namespace tropmod {

// The cone over a tropical curve: one copy of the base per vertex, a product
// with a ray per leg, and a fiber product per finite edge, glued along the
// flag faces into a cone space.
struct UniversalCone {
  TropicalCurve curve;

  ConeStackData presentation;
  FaceComplex base;           // face lattice of the curve's base cone
  StackMorphism structure_map;  // presentation -> base.complex

  // Object of the presentation holding each full piece.
  std::vector<int> vertex_piece;  // per vertex (glued class; equals the base copy)
  std::vector<int> leg_piece;     // per leg label position (1..n order)
  std::vector<int> edge_piece;    // per edge index

  // Marking sections: object of the leg piece, one per label 1..n.
  int section_object(int label) const;
};

UniversalCone cone_over(const TropicalCurve& curve);

// A point of the universal curve over the full base: a vertex, a point on a
// leg at a nonzero distance, or an interior point of an oriented edge given
// by a two-part splitting of its length. Edge data are normalized so the
// orienting flag is the smaller one.
struct VertexDatum {
  int vertex;
};
struct LegDatum {
  int label;
  Vec distance;  // nonzero element of the dual monoid
};
struct EdgeDatum {
  int flag;       // orienting flag; the other is the involution partner
  Vec near_part;  // distance from the root of `flag`
  Vec far_part;   // the complementary part; near + far = d(e)
};
using SectionDatum = std::variant<VertexDatum, LegDatum, EdgeDatum>;

SectionDatum normalize_datum(const TropicalCurve& curve, SectionDatum d);
bool datum_equal(const TropicalCurve& curve, const SectionDatum& a, const SectionDatum& b);
void validate_datum(const TropicalCurve& curve, const SectionDatum& d);

// The genus weighting on sections: h(v) on vertex data, 0 otherwise.
int H(const SectionDatum& d, const TropicalCurve& curve);

// The genus of the vertex carrying the last leg.
int h_last(const TropicalCurve& curve);

// Attach the (n+1)-st leg at the point described by the datum.
TropicalCurve attach(const TropicalCurve& curve, const SectionDatum& d);

struct ForgetResult {
  TropicalCurve curve;  // the stabilized (g, n) curve
  SectionDatum datum;   // where the forgotten leg sat
};

// Delete the last leg and stabilize; inverse to attach. Requires the target
// (g, n) to be stable.
ForgetResult forget(const TropicalCurve& curve);

// Transport a section datum along a base cone morphism (sections of the cone
// over the pulled-back curve); lengths that die move the point to a vertex.
SectionDatum pullback_datum(const ConeMorphism& f, const TropicalCurve& curve,
                            const SectionDatum& d, const PullbackResult& pulled);

// Glue the top-labeled legs of two curves over the same base into a new edge
// of length d; the right curve's remaining labels are shifted after the left
// curve's.
TropicalCurve clutch(const TropicalCurve& left, const TropicalCurve& right, const Vec& d);

// Glue the two top-labeled legs of one curve into a new edge of length d,
// raising the genus by one.
TropicalCurve self_clutch(const TropicalCurve& curve, const Vec& d);

// The metric-graph slice of the cone over a curve with base R_{>=0} at height
// one: lattice lengths of the edge pieces, infinite legs, weights from H.
struct FiberAtOne {
  MarkedGraph graph;
  std::vector<Int> lengths;  // lattice length per edge
  std::vector<int> weights;
};
FiberAtOne fiber_at_one(const UniversalCone& uc);

// All splittings d = near + far with both parts nonzero in the dual monoid,
// up to the orientation swap being handled by the caller. Finite because the
// base cone is full-dimensional.
std::vector<std::pair<Vec, Vec>> edge_splittings(const Cone& base, const Vec& total,
                                                 long long budget = 2000000);

struct UniversalCertificate {
  bool ok = true;
  bool exhaustive_edges = true;   // edge splittings enumerated exhaustively
  bool exhaustive_legs = false;   // leg distances are a declared sample
  std::vector<Vec> leg_sample;
  std::string message;
  int datum_classes = 0;
  int curve_classes = 0;
  bool checked_equivalence = false;
};

// Certify that attach/forget are mutually inverse between section data and
// isomorphism classes of pointed curves over the base, that H matches the
// genus of the new vertex, and (when requested) that the fiber-product
// presentation of the universal curve agrees with the glued cone space.
UniversalCertificate universal_fiber_check(const TropicalCurve& curve, int leg_budget = 4,
                                           bool check_equivalence = false,
                                           long long budget = 4000000);

// The fiber-product presentation of sigma x_{M_{g,n}} M_{g,n+1} for a curve
// over sigma, built from the maximal-atlas components of the larger moduli
// stack and glued by the relation complexes.
ConeStackData universal_curve_via_moduli(const TropicalCurve& curve);

}  // namespace tropmod
