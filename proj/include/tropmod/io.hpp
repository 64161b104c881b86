#pragma once

#include <string>

#include "json.hpp"
#include "tropmod/degeneration.hpp"
#include "tropmod/stack.hpp"
#include "tropmod/universal.hpp"

namespace tropmod {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaTag = "tropmod/1";

Json cone_to_json(const Cone& c);
Cone cone_from_json(const Json& j);

Json graph_to_json(const MarkedGraph& g);
MarkedGraph graph_from_json(const Json& j);

Json curve_to_json(const TropicalCurve& c);
TropicalCurve curve_from_json(const Json& j);

Json degeneration_to_json(const NodalDegeneration& x);
NodalDegeneration degeneration_from_json(const Json& j);

Json category_to_json(const ConeCategory& cat);
ConeCategory category_from_json(const Json& j);

Json morphism_to_json(const StackMorphism& m);

std::string graph_to_dot(const MarkedGraph& g);
std::string category_to_dot(const ConeCategory& cat);
std::string universal_cone_to_dot(const UniversalCone& uc);

// Restrict a category to an object subset (which must be closed under the
// arrows used, e.g. a disjoint-union component of a complex).
ConeCategory full_subcategory(const ConeCategory& cat, const std::vector<int>& objects);

// Canonical byte encoding of a complex of smooth cones: invariant under
// object reordering and coordinate permutations of the cones. Throws on
// non-smooth cones.
std::string canonical_complex_bytes(const ConeCategory& cat);

}  // namespace tropmod
