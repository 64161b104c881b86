#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tropmod/cone.hpp"
#include "tropmod/curve.hpp"
#include "tropmod/graph.hpp"

namespace tropmod {

// Finite category with a functor to cones and cone morphisms: the shared
// shape behind cone complexes (thin), cone spaces, and cone stacks. Arrows
// are explicit because a stack may carry distinct parallel arrows with equal
// matrices (automorphisms acting trivially on the cone).
struct ConeCategory {
  struct Arrow {
    int src = -1;
    int dst = -1;
    Mat matrix;  // cone(src) -> cone(dst)
  };

  std::vector<Cone> cones;  // per object
  std::vector<Arrow> arrows;
  std::vector<int> identity_arrow;                 // per object
  std::map<std::pair<int, int>, int> composition;  // (second, first) -> composite

  int num_objects() const { return static_cast<int>(cones.size()); }
  int num_arrows() const { return static_cast<int>(arrows.size()); }

  int add_object(Cone c);
  int add_arrow(int src, int dst, Mat m);
  void set_composite(int second, int first, int result);
  int compose_arrows(int second, int first) const;  // throws when undefined

  // Derive identities and composition assuming arrows are determined by
  // (src, dst, matrix); throws on ambiguity.
  void close_thin();

  // Arrows src -> dst.
  std::vector<int> hom(int src, int dst) const;

  // Object counts by cone dimension.
  std::map<int, int> f_vector() const;
};

// Both views share the representation; the distinction is which axiom set
// they are expected to satisfy.
using ConeComplexData = ConeCategory;
using ConeStackData = ConeCategory;

struct CheckResult {
  bool ok = true;
  std::string message;  // names the violated axiom and witnesses on failure

  static CheckResult pass() { return {true, ""}; }
  static CheckResult fail(std::string m) { return {false, std::move(m)}; }
};

// Basic sanity: endpoints, identity laws, total lawful composition on
// composable pairs, associativity, and validity of every cone morphism.
CheckResult verify_category(const ConeCategory& cat);

// Definition of a cone complex: identities, every face of every cone the
// image of exactly one face morphism, at most one arrow between two objects.
CheckResult verify_cone_complex(const ConeComplexData& d);

// Fibered-in-groupoids over cones-with-face-inclusions: every arrow a face
// morphism, every face of every cone lifts, unique fillers.
CheckResult verify_cfg(const ConeStackData& d);

// CFG with no nontrivial automorphisms.
bool is_cone_space(const ConeStackData& d);
CheckResult check_cone_space(const ConeStackData& d);

// Morphism of cone categories over cones: functor plus per-object cone map
// whose image is not contained in any proper face.
struct StackMorphism {
  std::vector<int> obj_map;
  std::vector<int> arrow_map;
  std::vector<Mat> cone_map;  // per source object

  CheckResult validate(const ConeCategory& from, const ConeCategory& to) const;
  bool is_strict(const ConeCategory& from, const ConeCategory& to) const;
};

StackMorphism compose(const StackMorphism& second, const StackMorphism& first,
                      const ConeCategory& a, const ConeCategory& b, const ConeCategory& c);
StackMorphism identity_morphism(const ConeCategory& a);

// The face lattice of a cone packaged as a complex, with the face list kept
// for indexing.
struct FaceComplex {
  ConeComplexData complex;
  std::vector<Face> faces;

  int face_index_of_rayset(const std::vector<int>& ray_indices) const;
};
FaceComplex cone_as_complex(const Cone& c);

// ---------------------------------------------------------------------------
// Moduli stack of stable tropical curves as a finite combinatorial cone stack.

struct ModuliStack {
  ConeStackData cat;
  std::vector<MarkedGraph> classes;  // object i has cone R_{>=0}^{E(classes[i])}
  // The contraction behind arrow a: A -> B is a graph morphism
  // classes[B] -> classes[A]; stored per arrow.
  std::vector<GraphMorphism> arrow_contractions;

  int object_of_class(const MarkedGraph& g) const;  // by canonical form
};

ModuliStack build_moduli_stack(int g, int n);

// ---------------------------------------------------------------------------
// Groupoid presentation over the maximal-graph atlas.

struct GroupoidPresentation {
  int genus = 0;
  int markings = 0;
  std::vector<MarkedGraph> maximal;

  ConeComplexData U;
  struct UCone {
    int cls;
    std::vector<int> surviving;  // sorted edge indices of maximal[cls]
  };
  std::vector<UCone> u_index;

  ConeComplexData R;
  struct RCone {
    int cls1, cls2;
    std::vector<int> s1, s2;  // contracted edge sets
    GraphMorphism iso;        // maximal[cls1]/s1 -> maximal[cls2]/s2
  };
  std::vector<RCone> r_index;

  StackMorphism src_map, tgt_map;  // R -> U, strict
  StackMorphism unit;              // U -> R
  StackMorphism inverse;           // R -> R

  // Cached contractions maximal[cls]/S with witnesses, keyed by (cls, S).
  std::map<std::pair<int, std::vector<int>>, std::pair<MarkedGraph, GraphMorphism>> contractions;

  int u_cone_of(int cls, const std::vector<int>& surviving) const;
  int r_cone_of(int cls1, int cls2, const std::vector<int>& s1, const std::vector<int>& s2,
                const GraphMorphism& iso) const;
};

GroupoidPresentation groupoid_presentation(int g, int n);

// A point of R: a cone index with rational coordinates in that cone.
struct GroupoidPoint {
  int r_cone;
  QVec coords;
};

// Composition of groupoid points (t(p) = s(q) required), plus the axioms
// checker used by tests and the CLI.
GroupoidPoint compose_points(const GroupoidPresentation& p, const GroupoidPoint& x,
                             const GroupoidPoint& y);
CheckResult check_groupoid(const GroupoidPresentation& p, unsigned seed = 1, int samples = 50);

// ---------------------------------------------------------------------------
// Fiber complexes.

struct AtlasFiber {
  ConeComplexData complex;
  FaceComplex base;  // face lattice of the curve's base cone
  struct AFCone {
    int face;            // index into base.faces
    GraphMorphism phi;   // G -> graph of the curve restricted to that face
  };
  std::vector<AFCone> index;
  StackMorphism projection;  // complex -> base.complex, strict
};

// The fiber of the atlas cone of G over the classifying map of the curve.
AtlasFiber atlas_fiber(const TropicalCurve& curve, const MarkedGraph& G);

struct CurvePairFiber {
  ConeComplexData complex;
  FaceComplex base1, base2;
  struct CPCone {
    int face1, face2;
    GraphMorphism iso;  // graph(c1|face1) -> graph(c2|face2)
    Mat embedding;      // (dim face1 + dim face2) x dim, into the face product
  };
  std::vector<CPCone> index;
  StackMorphism proj1, proj2;
};

// Cones indexed by (face1, face2, iso) realized inside face1 x face2 by the
// exact equations <d1(e), t1> = <d2(iso e), t2>; triples whose cut cone
// misses the relative interior of the face product are dropped.
CurvePairFiber curve_pair_fiber(const TropicalCurve& c1, const TropicalCurve& c2);

// Restriction of a curve to a face of its base, cached-by-caller variant.
PullbackResult restrict_to_face(const TropicalCurve& c, const Face& f);

// ---------------------------------------------------------------------------
// Initial strict factorization and equivalence.

struct InitialFactorization {
  int object;             // source of the face arrow realizing the minimal face
  int face_arrow;         // arrow object -> obj
  ConeMorphism factored;  // sigma -> cone(object)
};

InitialFactorization initial_strict_factorization(const ConeStackData& target, int obj,
                                                  const ConeMorphism& f);

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EquivalenceWitness {
  StackMorphism forward;   // a -> b
  StackMorphism backward;  // b -> a
};

// Brute-force equivalence search (essentially surjective, fully faithful,
// cone maps isomorphisms). Returns nullopt when provably not equivalent;
// throws BudgetExceeded when the search budget runs out.
std::optional<EquivalenceWitness> equivalent(const ConeStackData& a, const ConeStackData& b,
                                             long long budget = 2000000);

// ---------------------------------------------------------------------------
// Quotients of complexes by compatible partial isomorphisms (setoid data).

struct ConeRelation {
  int a, b;    // cones of the complex
  Mat matrix;  // cone(a) -> cone(b), an isomorphism
};

struct QuotientResult {
  ConeStackData stack;
  std::vector<int> object_class;  // complex cone -> quotient object
  std::vector<Mat> transport;     // cone(i) -> cone(object_class[i])
};

// Quotient of a cone complex by the equivalence generated by the relations,
// propagated to faces. Throws if the relations generate a nontrivial
// stabilizer (the quotient would not be a cone space).
QuotientResult quotient_cone_space(const ConeComplexData& complex,
                                   const std::vector<ConeRelation>& relations);

ConeCategory disjoint_union(const std::vector<ConeCategory>& parts, std::vector<int>* offsets);

}  // namespace tropmod
