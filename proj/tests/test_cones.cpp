#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "tropmod/cone.hpp"

using namespace tropmod;

namespace {

Vec v(std::initializer_list<long> xs) {
  Vec out;
  for (long x : xs) out.push_back(Int(x));
  return out;
}

QVec qv(std::initializer_list<long> xs) {
  QVec out;
  for (long x : xs) out.push_back(Rat(x));
  return out;
}

}  // namespace

TEST_CASE("orthant facets are the dual basis") {
  Cone c = Cone::orthant(2);
  REQUIRE(c.facets.size() == 2);
  CHECK(c.facets[0] == v({0, 1}));
  CHECK(c.facets[1] == v({1, 0}));
  CHECK(c.rays.size() == 2);
}

TEST_CASE("ray in Z^1 has normal (1)") {
  Cone c = Cone::ray();
  REQUIRE(c.facets.size() == 1);
  CHECK(c.facets[0] == v({1}));
}

TEST_CASE("sub-dimensional generators: facets computed in the span") {
  // Each normal's zero set contains exactly one ray (brute-force oracle).
  std::vector<Vec> gens = {v({1, 2, 0}), v({1, 0, 2})};
  std::vector<Vec> fs = facets(3, gens);
  REQUIRE(fs.size() == 2);
  Embedded e = embed_in_span(3, gens);
  REQUIRE(e.cone.rank == 2);
  for (const Vec& f : fs) {
    int zero_count = 0;
    for (const Vec& r : e.cone.rays) {
      Int p = dot(f, r);
      CHECK(p >= 0);
      if (p == 0) ++zero_count;
    }
    CHECK(zero_count == 1);
  }
}

TEST_CASE("rays -> facets -> rays round trip, dimensions up to 6") {
  std::mt19937_64 rng(12345);
  for (int n = 1; n <= 6; ++n) {
    // Orthant and a few random unimodular images of it.
    Cone orth = Cone::orthant(n);
    Cone back = Cone::from_rays(n, orth.facets);  // self-dual
    CHECK(back == orth);
    for (int trial = 0; trial < 5; ++trial) {
      // Random shear of the orthant stays strictly convex and full-dim.
      Mat u = Mat::identity(n);
      int i = static_cast<int>(rng() % n), j = static_cast<int>(rng() % n);
      if (i != j) u.at(i, j) = Int(1 + static_cast<int>(rng() % 2));
      std::vector<Vec> gens;
      for (const Vec& r : orth.rays) gens.push_back(mat_apply(u, r));
      Cone c = Cone::from_rays(n, gens);
      Cone c2 = Cone::from_rays(n, c.rays);
      CHECK(c == c2);
      // Facet normals nonnegative on every ray.
      for (const Vec& f : c.facets)
        for (const Vec& r : c.rays) CHECK(dot(f, r) >= 0);
    }
  }
}

TEST_CASE("dimension cap is enforced") {
  int old = dimension_cap();
  set_dimension_cap(3);
  CHECK_THROWS_AS(Cone::orthant(4), DimensionError);
  set_dimension_cap(old);
}

TEST_CASE("non-pointed input is rejected") {
  CHECK_THROWS_AS(Cone::from_rays(1, {v({1}), v({-1})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Cone::from_rays(2, {v({1, 0}), v({-1, 0}), v({0, 1})}),
                  std::invalid_argument);
}

TEST_CASE("face lattice of orthants has 2^n faces") {
  for (int n = 0; n <= 6; ++n) {
    Cone c = Cone::orthant(n);
    std::vector<Face> faces = face_lattice(c);
    CHECK(faces.size() == (size_t{1} << n));
  }
}

TEST_CASE("face lattice of a ray has 2 faces") {
  std::vector<Face> faces = face_lattice(Cone::ray());
  REQUIRE(faces.size() == 2);
  CHECK(faces[0].dim() == 0);
  CHECK(faces[1].dim() == 1);
}

TEST_CASE("face lattice of the d=2 edge cone has 4 faces") {
  // Fiber product of 1 |-> 2 against the sum map: rays (1,2,0),(1,0,2).
  Cone ray = Cone::ray();
  Cone quad = Cone::orthant(2);
  Mat two(1, 1);
  two.at(0, 0) = 2;
  Mat sum(1, 2);
  sum.at(0, 0) = 1;
  sum.at(0, 1) = 1;
  FiberProduct fp = fiber_product(ConeMorphism::make(ray, ray, two),
                                  ConeMorphism::make(quad, ray, sum));
  CHECK(fp.cone.rank == 2);
  std::vector<Face> faces = face_lattice(fp.cone);
  CHECK(faces.size() == 4);
  // Embedded rays are (1,2,0) and (1,0,2) in the product lattice (s,a,b).
  std::vector<Vec> embedded;
  for (const Vec& r : fp.cone.rays) embedded.push_back(primitive(mat_apply(fp.embedding, r)));
  std::sort(embedded.begin(), embedded.end(), lex_less);
  CHECK(embedded[0] == v({1, 0, 2}));
  CHECK(embedded[1] == v({1, 2, 0}));
}

TEST_CASE("face containment is a graded partial order") {
  Cone c = Cone::orthant(3);
  std::vector<Face> faces = face_lattice(c);
  REQUIRE(faces.size() == 8);
  for (const Face& a : faces) {
    for (const Face& b : faces) {
      if (face_leq(a, b) && face_leq(b, a)) CHECK(a == b);  // antisymmetry
      for (const Face& d : faces) {
        if (face_leq(a, b) && face_leq(b, d)) CHECK(face_leq(a, d));  // transitivity
      }
    }
  }
}

TEST_CASE("is_face_morphism: coordinate inclusion, diagonal, doubling") {
  Cone ray = Cone::ray();
  Cone quad = Cone::orthant(2);
  Mat inc(2, 1);
  inc.at(0, 0) = 1;
  CHECK(is_face_morphism(ConeMorphism::make(ray, quad, inc)));
  Mat diag(2, 1);
  diag.at(0, 0) = 1;
  diag.at(1, 0) = 1;
  CHECK_FALSE(is_face_morphism(ConeMorphism::make(ray, quad, diag)));
  Mat dbl(1, 1);
  dbl.at(0, 0) = 2;
  // Index-2 sublattice: determinant oracle sees 2, not a unit.
  CHECK_FALSE(is_face_morphism(ConeMorphism::make(ray, ray, dbl)));
  CHECK(is_face_morphism(ConeMorphism::identity(quad)));
}

TEST_CASE("fiber product of 1 |-> d against the sum map (d = 2, 3)") {
  Cone ray = Cone::ray();
  Cone quad = Cone::orthant(2);
  Mat sum(1, 2);
  sum.at(0, 0) = 1;
  sum.at(0, 1) = 1;
  for (long d : {2L, 3L}) {
    Mat md(1, 1);
    md.at(0, 0) = d;
    FiberProduct fp = fiber_product(ConeMorphism::make(ray, ray, md),
                                    ConeMorphism::make(quad, ray, sum));
    std::vector<Vec> embedded;
    for (const Vec& r : fp.cone.rays) embedded.push_back(primitive(mat_apply(fp.embedding, r)));
    std::sort(embedded.begin(), embedded.end(), lex_less);
    REQUIRE(embedded.size() == 2);
    CHECK(embedded[0] == v({1, 0, d}));
    CHECK(embedded[1] == v({1, d, 0}));
  }
}

TEST_CASE("fiber product along identities is the diagonal") {
  Cone quad = Cone::orthant(2);
  FiberProduct fp = fiber_product(ConeMorphism::identity(quad), ConeMorphism::identity(quad));
  CHECK(fp.cone.rank == 2);
  CHECK(fp.cone == Cone::orthant(2));
  CHECK(fp.proj1.matrix == fp.proj2.matrix);
}

TEST_CASE("fiber product can be the zero cone") {
  // 2t = s and t = 2s inside the ray force t = s = 0.
  Cone ray = Cone::ray();
  Mat two(1, 1), one(1, 1);
  two.at(0, 0) = 2;
  one.at(0, 0) = 1;
  // f: ray -> ray, 1 |-> 2; g: ray -> ray, 1 |-> 1; equalize under swap trick:
  // use sources with maps t |-> 2t and s |-> s composed so only 0 matches both
  // inside a *shared* target after an extra doubling on the other side.
  FiberProduct fp = fiber_product(ConeMorphism::make(ray, ray, two),
                                  ConeMorphism::make(ray, ray, two));
  CHECK(fp.cone.rank == 1);  // diagonal is fine
  // Genuinely incompatible: 2a = 3b has solutions, but 2a = -... use facets:
  // {a >= 0} against {b <= 0} is not expressible; instead check zero cone via
  // a map landing outside the positive span: 1 |-> 2 vs 1 |-> 3 meets in the
  // ray a = 3t, b = 2t -- still a ray. A genuine zero fiber needs opposite
  // signs, which pointed cones cannot provide; check the zero-source case.
  Cone zero = Cone::zero();
  Mat z(1, 0);
  FiberProduct fpz = fiber_product(ConeMorphism::make(zero, ray, z),
                                   ConeMorphism::make(ray, ray, one));
  CHECK(fpz.cone.is_zero());
}

TEST_CASE("fiber product universal property on 200 randomized triples") {
  std::mt19937_64 rng(987654);
  Cone ray = Cone::ray();
  Cone quad = Cone::orthant(2);
  Cone tri = Cone::orthant(3);
  int done = 0;
  while (done < 200) {
    // sigma1 -> tau and sigma2 -> tau with random small nonnegative matrices.
    const Cone& s1 = (rng() % 2) ? quad : ray;
    const Cone& s2 = (rng() % 2) ? quad : tri;
    const Cone& tau = ray;
    Mat mf(1, s1.rank), mg(1, s2.rank);
    for (int c = 0; c < s1.rank; ++c) mf.at(0, c) = Int(rng() % 3);
    for (int c = 0; c < s2.rank; ++c) mg.at(0, c) = Int(rng() % 3);
    ConeMorphism f = ConeMorphism::make(s1, tau, mf);
    ConeMorphism g = ConeMorphism::make(s2, tau, mg);
    FiberProduct fp = fiber_product(f, g);

    // Random omega with compatible h1, h2: build h = (h1, h2) by picking an
    // integral point of the fiber product and scaling columns.
    if (fp.cone.rank == 0) continue;
    Cone omega = Cone::ray();
    Vec pt(fp.cone.rank, Int(0));
    for (const Vec& r : fp.cone.rays) {
      Int coeff = Int(rng() % 3);
      for (int i = 0; i < fp.cone.rank; ++i) pt[i] += coeff * r[i];
    }
    Vec amb = mat_apply(fp.embedding, pt);
    Vec h1v(amb.begin(), amb.begin() + s1.rank);
    Vec h2v(amb.begin() + s1.rank, amb.end());
    ConeMorphism h1 = ConeMorphism::make(omega, s1, Mat::from_columns(s1.rank, {h1v}));
    ConeMorphism h2 = ConeMorphism::make(omega, s2, Mat::from_columns(s2.rank, {h2v}));
    // f h1 = g h2 by construction.
    REQUIRE(mat_mul(f.matrix, h1.matrix) == mat_mul(g.matrix, h2.matrix));

    // Exactly one factorization through the fiber product, by exact solve.
    Mat stacked(s1.rank + s2.rank, 1);
    for (int r = 0; r < s1.rank; ++r) stacked.at(r, 0) = h1.matrix.at(r, 0);
    for (int r = 0; r < s2.rank; ++r) stacked.at(s1.rank + r, 0) = h2.matrix.at(r, 0);
    auto u = solve_unique_integer_mat(fp.embedding, stacked);
    REQUIRE(u.has_value());
    CHECK(mat_mul(fp.proj1.matrix, *u) == h1.matrix);
    CHECK(mat_mul(fp.proj2.matrix, *u) == h2.matrix);
    CHECK(fp.cone.contains(u->column(0)));
    ++done;
  }
}

TEST_CASE("pullback_element: identity, face inclusion, doubling") {
  Cone ray = Cone::ray();
  Cone quad = Cone::orthant(2);
  DualElement m01 = DualElement::make(quad, v({0, 1}));
  CHECK(pullback_element(ConeMorphism::identity(quad), m01).covector == v({0, 1}));
  Mat inc(2, 1);
  inc.at(0, 0) = 1;
  ConeMorphism xaxis = ConeMorphism::make(ray, quad, inc);
  CHECK(pullback_element(xaxis, m01).covector == v({0}));
  Mat dbl(1, 1);
  dbl.at(0, 0) = 2;
  ConeMorphism two = ConeMorphism::make(ray, ray, dbl);
  CHECK(pullback_element(two, DualElement::make(ray, v({1}))).covector == v({2}));
}

TEST_CASE("pullback_element is functorial (matrix transpose oracle)") {
  Cone ray = Cone::ray();
  Cone quad = Cone::orthant(2);
  Mat inc(2, 1);
  inc.at(0, 0) = 1;
  Mat shear = Mat::identity(2);
  shear.at(0, 1) = 1;
  ConeMorphism f = ConeMorphism::make(ray, quad, inc);
  ConeMorphism g = ConeMorphism::make(quad, quad, shear);
  DualElement m = DualElement::make(quad, v({1, 2}));
  DualElement lhs = pullback_element(f, pullback_element(g, m));
  DualElement rhs = pullback_element(compose(g, f), m);
  CHECK(lhs.covector == rhs.covector);
}

TEST_CASE("smallest_face_containing: interior, facet point, origin") {
  Cone quad = Cone::orthant(2);
  CHECK(smallest_face_containing(quad, qv({1, 1})).dim() == 2);
  Face xf = smallest_face_containing(quad, qv({1, 0}));
  CHECK(xf.dim() == 1);
  CHECK(xf.ray_indices == std::vector<int>{1});  // ray (1,0) sorts second
  CHECK(smallest_face_containing(quad, qv({0, 0})).dim() == 0);
  CHECK_THROWS_AS(smallest_face_containing(quad, qv({-1, 1})), std::invalid_argument);
}

TEST_CASE("smallest_face_containing equals the intersection of containing faces") {
  Cone c = Cone::orthant(3);
  std::vector<Face> faces = face_lattice(c);
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 30; ++trial) {
    QVec p(3);
    for (int i = 0; i < 3; ++i) p[i] = Rat(static_cast<long>(rng() % 3));
    Face small = smallest_face_containing(c, p);
    // Brute force: intersect the ray sets of all faces containing p.
    std::vector<int> meet;
    bool first = true;
    for (const Face& f : faces) {
      // p in f iff p in span(f) and p in c: test p as combination of f's rays
      // via the selector: all selector facets vanish at p.
      bool contains = true;
      for (int s : f.selector) {
        if (dot_q(c.facets[s], p) != 0) contains = false;
      }
      if (!contains) continue;
      if (first) {
        meet = f.ray_indices;
        first = false;
      } else {
        std::vector<int> out;
        std::set_intersection(meet.begin(), meet.end(), f.ray_indices.begin(),
                              f.ray_indices.end(), std::back_inserter(out));
        meet = out;
      }
    }
    CHECK(small.ray_indices == meet);
  }
}

TEST_CASE("is_zero_on_face") {
  Cone quad = Cone::orthant(2);
  Face xf = smallest_face_containing(quad, qv({1, 0}));
  Face zero = smallest_face_containing(quad, qv({0, 0}));
  CHECK(is_zero_on_face(DualElement::make(quad, v({0, 1})), xf));
  CHECK_FALSE(is_zero_on_face(DualElement::make(quad, v({1, 1})), xf));
  CHECK(is_zero_on_face(DualElement::make(quad, v({1, 1})), zero));
}
