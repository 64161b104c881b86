#pragma once

#include <map>
#include <string>
#include <vector>

#include "tropmod/universal.hpp"

namespace tropmod {

// The combinatorial shadow of a one- or multi-parameter nodal degeneration:
// components with geometric genera, nodes carrying smoothing parameters from
// the dual monoid of the base cone, and marked points on components.
struct NodalDegeneration {
  Cone base;
  std::vector<int> component_genus;              // per component id 0..k-1
  struct Node {
    int a, b;   // component ids (a == b for a self-node)
    Vec delta;  // nonzero smoothing parameter
  };
  std::vector<Node> nodes;
  std::map<int, int> markings;  // label -> component id

  void validate() const;
};

// The dual tropical curve: one weighted vertex per component, one edge of
// length delta per node, one labeled leg per marking. Rejects unstable input
// naming the offending vertex.
TropicalCurve tropicalize(const NodalDegeneration& x);

struct SquareCertificate {
  bool ok = true;
  std::string message;
};

// Specialize the degeneration along a face inclusion: nodes whose parameter
// dies on the face are smoothed, merging components.
NodalDegeneration specialize_degeneration(const NodalDegeneration& x, const ConeMorphism& f);

// tropicalize-then-pullback equals specialize-then-tropicalize.
SquareCertificate check_specialization_square(const NodalDegeneration& x, const ConeMorphism& f);

// Glue at a new node with parameter d; the star marking is the left input's
// top label, the bullet the right input's; right labels shift.
NodalDegeneration glue_at_node(const NodalDegeneration& x1, const NodalDegeneration& x2,
                               const Vec& d);
NodalDegeneration glue_self_node(const NodalDegeneration& x, const Vec& d);

SquareCertificate check_clutch_square(const NodalDegeneration& x1, const NodalDegeneration& x2,
                                      const Vec& d);
SquareCertificate check_self_clutch_square(const NodalDegeneration& x, const Vec& d);

// Remove the top marking and absorb a destabilized genus-0 component the way
// the forgetful morphism does (merging nodes or relocating a marking).
NodalDegeneration forget_marking(const NodalDegeneration& x);

SquareCertificate check_forget_square(const NodalDegeneration& x);

}  // namespace tropmod
