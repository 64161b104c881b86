#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tropmod/linalg.hpp"
#include "tropmod/numeric.hpp"

namespace tropmod {

// Thrown when a construction exceeds the configured lattice-rank bound.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Default 8; configurable (the CLI honors TROPMOD_DIM_CAP).
int dimension_cap();
void set_dimension_cap(int cap);

// Strictly convex, full-dimensional rational polyhedral cone in Z^rank.
// Rays are primitive, extremal, and sorted lexicographically; facet normals
// are primitive, irredundant, and sorted (cached at construction).
struct Cone {
  int rank = 0;
  std::vector<Vec> rays;
  std::vector<Vec> facets;

  static Cone zero();  // the rank-0 cone
  static Cone from_rays(int rank, std::vector<Vec> generators);
  static Cone orthant(int n);
  static Cone ray();  // R_{>=0} in Z^1

  int dim() const { return rank; }  // full-dimensional by invariant
  bool is_zero() const { return rank == 0; }
  bool contains(const Vec& point) const;
  bool contains_q(const QVec& point) const;
  bool interior_contains_q(const QVec& point) const;

  bool operator==(const Cone& o) const { return rank == o.rank && rays == o.rays; }
  bool operator!=(const Cone& o) const { return !(*this == o); }
};

// Z-linear map of lattices carrying the source cone into the target cone.
struct ConeMorphism {
  Cone source;
  Cone target;
  Mat matrix;  // target.rank x source.rank

  static ConeMorphism make(const Cone& src, const Cone& dst, Mat m);
  static ConeMorphism identity(const Cone& c);
  Vec apply(const Vec& v) const { return mat_apply(matrix, v); }
};

ConeMorphism compose(const ConeMorphism& g, const ConeMorphism& f);  // g after f

// Integral linear functional nonnegative on a cone: an element of the dual
// monoid S_sigma.
struct DualElement {
  Vec covector;

  static DualElement make(const Cone& on, Vec covector);
  bool is_zero() const { return tropmod::is_zero(covector); }
};

// A face of a parent cone, re-embedded as a full-dimensional cone in its own
// span lattice, with the witnessing inclusion.
struct Face {
  Cone parent;
  std::vector<int> selector;     // all parent facet indices vanishing on the face
  std::vector<int> ray_indices;  // parent rays lying on the face
  Cone as_cone;
  ConeMorphism inclusion;  // as_cone -> parent

  int dim() const { return as_cone.rank; }
  bool operator==(const Face& o) const {
    return parent == o.parent && ray_indices == o.ray_indices;
  }
};

// Irredundant facet-normal list of the cone generated by `generators` inside
// Z^rank; the generators may span a lower-dimensional cone, in which case the
// normals are computed in the span lattice of the re-embedded cone.
std::vector<Vec> facets(int rank, const std::vector<Vec>& generators);

// All faces (including the zero face and the cone itself), each exactly once,
// ordered by (dimension, ray index set).
std::vector<Face> face_lattice(const Cone& c);

// Containment as faces of a common parent.
bool face_leq(const Face& a, const Face& b);

bool is_face_morphism(const ConeMorphism& f);

struct FiberProduct {
  Cone cone;
  ConeMorphism proj1;      // cone -> source of f
  ConeMorphism proj2;      // cone -> source of g
  Mat embedding;           // (n1+n2) x dim: into the product lattice
};

// {(s1,s2) : f(s1) = g(s2)} for f, g with a common target, re-embedded into
// its span lattice.
FiberProduct fiber_product(const ConeMorphism& f, const ConeMorphism& g);

DualElement pullback_element(const ConeMorphism& f, const DualElement& m);

Face smallest_face_containing(const Cone& c, const QVec& point);
Face smallest_face_containing(const Cone& c, const std::vector<Vec>& points);
Face face_from_selector(const Cone& c, const std::vector<int>& facet_subset);
Face top_face(const Cone& c);

bool is_zero_on_face(const DualElement& m, const Face& fa);

// Re-embed a possibly lower-dimensional cone spanned by `generators` in
// Z^rank: returns the full-dimensional cone in its saturated span lattice and
// the embedding matrix (rank x dim).
struct Embedded {
  Cone cone;
  Mat embedding;
};
Embedded embed_in_span(int rank, const std::vector<Vec>& generators);

// Cut a cone out of Z^n by halfspaces and equations, re-embedded in its span.
Embedded cone_from_constraints(int n, const std::vector<Vec>& halfspaces,
                               const std::vector<Vec>& equations);

}  // namespace tropmod
