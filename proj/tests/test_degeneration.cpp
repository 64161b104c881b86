#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "tropmod/degeneration.hpp"

using namespace tropmod;

namespace {

Vec v(std::initializer_list<long> xs) {
  Vec out;
  for (long x : xs) out.push_back(Int(x));
  return out;
}

Vec unit(int n, int i) {
  Vec out(n, Int(0));
  out[i] = 1;
  return out;
}

// Four genus-0 components in a cycle, four nodes with independent smoothing
// parameters, one marking per component.
NodalDegeneration four_cycle() {
  NodalDegeneration x;
  x.base = Cone::orthant(4);
  x.component_genus = {0, 0, 0, 0};
  x.nodes = {{0, 1, unit(4, 0)}, {1, 2, unit(4, 1)}, {2, 3, unit(4, 2)}, {3, 0, unit(4, 3)}};
  for (int i = 1; i <= 4; ++i) x.markings[i] = i - 1;
  return x;
}

// A random connected stable degeneration over a small orthant.
NodalDegeneration random_degeneration(std::mt19937_64& rng, int max_rank = 3) {
  while (true) {
    int rank = 1 + static_cast<int>(rng() % max_rank);
    int k = 1 + static_cast<int>(rng() % 3);
    NodalDegeneration x;
    x.base = Cone::orthant(rank);
    for (int i = 0; i < k; ++i) x.component_genus.push_back(static_cast<int>(rng() % 3));
    // Spanning connections plus extras.
    for (int i = 1; i < k; ++i) {
      Vec d(rank, Int(0));
      d[rng() % rank] = 1 + static_cast<int>(rng() % 2);
      x.nodes.push_back({static_cast<int>(rng() % i), i, d});
    }
    int extra = static_cast<int>(rng() % 3);
    for (int i = 0; i < extra; ++i) {
      Vec d(rank, Int(0));
      d[rng() % rank] = 1 + static_cast<int>(rng() % 2);
      x.nodes.push_back({static_cast<int>(rng() % k), static_cast<int>(rng() % k), d});
    }
    int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 1; i <= n; ++i) x.markings[i] = static_cast<int>(rng() % k);
    try {
      tropicalize(x);
      return x;
    } catch (const std::invalid_argument&) {
      continue;
    }
  }
}

}  // namespace

TEST_CASE("the four-component cycle tropicalizes to the 4-cycle with legs") {
  TropicalCurve c = tropicalize(four_cycle());
  CHECK(c.graph.num_vertices() == 4);
  CHECK(c.graph.num_edges() == 4);
  CHECK(c.graph.num_legs() == 4);
  CHECK(c.genus() == 1);
  for (int e = 0; e < 4; ++e) CHECK_FALSE(c.graph.edge_is_loop(e));
  for (int i = 0; i < 4; ++i) CHECK(c.graph.valence(i) == 3);
  // Edge lengths are the four independent smoothing parameters.
  std::set<Vec> lens(c.lengths.begin(), c.lengths.end());
  CHECK(lens.size() == 4);
}

TEST_CASE("smooth curve data gives a single weighted vertex with legs") {
  NodalDegeneration x;
  x.base = Cone::ray();
  x.component_genus = {2};
  x.markings[1] = 0;
  TropicalCurve c = tropicalize(x);
  CHECK(c.graph.num_vertices() == 1);
  CHECK(c.graph.weights[0] == 2);
  CHECK(c.graph.num_edges() == 0);
  CHECK(c.markings() == 1);
}

TEST_CASE("a self-node becomes a loop") {
  NodalDegeneration x;
  x.base = Cone::ray();
  x.component_genus = {1};
  x.nodes = {{0, 0, v({3})}};
  TropicalCurve c = tropicalize(x);
  CHECK(c.graph.num_edges() == 1);
  CHECK(c.graph.edge_is_loop(0));
  CHECK(c.genus() == 2);
  CHECK(c.lengths[0] == v({3}));
}

TEST_CASE("unstable input is rejected with the offending component") {
  NodalDegeneration x;
  x.base = Cone::ray();
  x.component_genus = {0, 1};
  x.nodes = {{0, 1, v({1})}};
  // Component 0 has genus 0 and valence 1.
  try {
    tropicalize(x);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("component 0") != std::string::npos);
  }
}

TEST_CASE("genus equals component genera plus the first Betti number") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 30; ++i) {
    NodalDegeneration x = random_degeneration(rng);
    TropicalCurve c = tropicalize(x);
    int sum = 0;
    for (int g : x.component_genus) sum += g;
    int b1 = static_cast<int>(x.nodes.size()) - static_cast<int>(x.component_genus.size()) + 1;
    CHECK(c.genus() == sum + b1);
  }
}

TEST_CASE("specialization squares over every face of the Figure-2 data") {
  NodalDegeneration x = four_cycle();
  for (const Face& f : face_lattice(x.base)) {
    SquareCertificate cert = check_specialization_square(x, f.inclusion);
    CHECK(cert.ok);
  }
  // Killing parameters 1 and 3 collapses the cycle to a 2-cycle.
  QVec pt{Rat(0), Rat(1), Rat(0), Rat(1)};
  Face f = smallest_face_containing(x.base, pt);
  NodalDegeneration y = specialize_degeneration(x, f.inclusion);
  CHECK(y.component_genus.size() == 2);
  CHECK(y.nodes.size() == 2);
  TropicalCurve c = tropicalize(y);
  CHECK(c.genus() == 1);
}

TEST_CASE("identity specialization is the identity") {
  NodalDegeneration x = four_cycle();
  SquareCertificate cert = check_specialization_square(x, ConeMorphism::identity(x.base));
  CHECK(cert.ok);
  NodalDegeneration y = specialize_degeneration(x, ConeMorphism::identity(x.base));
  CHECK(y.component_genus == x.component_genus);
  CHECK(y.nodes.size() == x.nodes.size());
}

TEST_CASE("clutch square: two one-component degenerations") {
  NodalDegeneration a, b;
  a.base = Cone::ray();
  a.component_genus = {1};
  a.markings[1] = 0;
  a.markings[2] = 0;  // gluing marking
  b.base = Cone::ray();
  b.component_genus = {1};
  b.markings[1] = 0;  // gluing marking
  CHECK(check_clutch_square(a, b, v({7})).ok);
  NodalDegeneration glued = glue_at_node(a, b, v({7}));
  CHECK(glued.component_genus.size() == 2);
  CHECK(glued.nodes.size() == 1);
  TropicalCurve c = tropicalize(glued);
  CHECK(c.genus() == 2);
}

TEST_CASE("self-gluing square against the self clutch") {
  NodalDegeneration x;
  x.base = Cone::ray();
  x.component_genus = {0};
  x.markings[1] = 0;
  x.markings[2] = 0;
  x.markings[3] = 0;
  CHECK(check_self_clutch_square(x, v({1})).ok);
  NodalDegeneration glued = glue_self_node(x, v({1}));
  TropicalCurve c = tropicalize(glued);
  CHECK(c.genus() == 1);
  CHECK(c.markings() == 1);
}

TEST_CASE("clutching the Figure-2 data with a smooth elliptic component") {
  NodalDegeneration left = four_cycle();
  left.markings[5] = 0;  // the gluing marking
  NodalDegeneration right;
  right.base = Cone::orthant(4);
  right.component_genus = {1};
  right.markings[1] = 0;
  CHECK(check_clutch_square(left, right, unit(4, 0)).ok);
  NodalDegeneration glued = glue_at_node(left, right, unit(4, 0));
  CHECK(tropicalize(glued).genus() == 1 + 1);  // cycle genus + elliptic genus
}

TEST_CASE("forget square: the three absorption cases") {
  // Case (a): marking on a component that stays stable.
  {
    NodalDegeneration x;
    x.base = Cone::ray();
    x.component_genus = {1};
    x.markings[1] = 0;
    x.markings[2] = 0;
    CHECK(check_forget_square(x).ok);
  }
  // Case (b): genus-0 component carrying only the last marking and two
  // nodes; the parameters add.
  {
    NodalDegeneration x;
    x.base = Cone::orthant(2);
    x.component_genus = {1, 0, 1};
    x.nodes = {{0, 1, v({1, 0})}, {1, 2, v({0, 1})}};
    x.markings[1] = 0;
    x.markings[2] = 1;
    CHECK(check_forget_square(x).ok);
    NodalDegeneration y = forget_marking(x);
    CHECK(y.component_genus.size() == 2);
    REQUIRE(y.nodes.size() == 1);
    CHECK(y.nodes[0].delta == v({1, 1}));
  }
  // Case (c): genus-0 component with the last marking, one node, one other
  // marking; the marking relocates.
  {
    NodalDegeneration x;
    x.base = Cone::ray();
    x.component_genus = {1, 0};
    x.nodes = {{0, 1, v({4})}};
    x.markings[1] = 1;
    x.markings[2] = 1;
    CHECK(check_forget_square(x).ok);
    NodalDegeneration y = forget_marking(x);
    CHECK(y.component_genus.size() == 1);
    CHECK(y.markings.at(1) == 0);
  }
}

TEST_CASE("random corpus: specialization, clutch, and forget squares certify") {
  std::mt19937_64 rng(777);
  int spec = 0, clutch_count = 0, forg = 0;
  while (spec < 50 || clutch_count < 50 || forg < 50) {
    NodalDegeneration x = random_degeneration(rng);
    if (spec < 50) {
      auto faces = face_lattice(x.base);
      const Face& f = faces[rng() % faces.size()];
      CHECK(check_specialization_square(x, f.inclusion).ok);
      ++spec;
    }
    if (clutch_count < 50) {
      NodalDegeneration a = x;
      int na = static_cast<int>(a.markings.size());
      a.markings[na + 1] = static_cast<int>(rng() % a.component_genus.size());
      NodalDegeneration b;
      b.base = a.base;
      b.component_genus = {1 + static_cast<int>(rng() % 2)};
      b.markings[1] = 0;
      Vec d(a.base.rank, Int(0));
      d[rng() % a.base.rank] = 1 + static_cast<int>(rng() % 3);
      CHECK(check_clutch_square(a, b, d).ok);
      ++clutch_count;
    }
    if (forg < 50) {
      // Ensure the forgotten pair is stable.
      TropicalCurve c = tropicalize(x);
      int g = c.genus();
      int n = c.markings();
      if (2 * g - 2 + (n - 1) > 0 && n >= 1) {
        CHECK(check_forget_square(x).ok);
        ++forg;
      }
    }
  }
}
