#include "tropmod/cone.hpp"

#include <algorithm>
#include <set>

namespace tropmod {

namespace {

int g_dimension_cap = 8;

void check_cap(int rank) {
  if (rank > g_dimension_cap) {
    throw DimensionError("lattice rank " + std::to_string(rank) +
                         " exceeds the dimension cap " + std::to_string(g_dimension_cap));
  }
  if (rank < 0) throw std::invalid_argument("negative lattice rank");
}

// Extreme rays of the pointed cone {x in R^n : c.x >= 0 for all c}. The
// constraint list must have rank n (pointedness); callers check.
std::vector<Vec> extreme_rays_from_halfspaces(int n, const std::vector<Vec>& cs) {
  std::vector<Vec> result;
  if (n == 0) return result;
  std::vector<Vec> constraints = cs;
  std::sort(constraints.begin(), constraints.end(), lex_less);
  constraints.erase(std::unique(constraints.begin(), constraints.end()), constraints.end());
  int m = static_cast<int>(constraints.size());
  if (m < n - 1) return result;

  std::set<Vec> seen;
  auto try_subset = [&](const std::vector<int>& sel) {
    Mat sub(static_cast<int>(sel.size()), n);
    for (size_t i = 0; i < sel.size(); ++i)
      for (int c = 0; c < n; ++c) sub.at(static_cast<int>(i), c) = constraints[sel[i]][c];
    std::vector<Vec> k = kernel_basis(sub);
    if (k.size() != 1) return;
    Vec v = primitive(k[0]);
    bool ok_pos = true, ok_neg = true;
    for (const Vec& c : constraints) {
      Int p = dot(c, v);
      if (p < 0) ok_pos = false;
      if (p > 0) ok_neg = false;
      if (!ok_pos && !ok_neg) return;
    }
    if (ok_pos && ok_neg) return;  // lineality; cone not pointed along v
    if (ok_neg) {
      for (Int& x : v) x = -x;
    }
    seen.insert(v);
  };

  // Candidate rays are kernels of (n-1)-subsets of the constraints.
  std::vector<int> idx(n - 1);
  for (int i = 0; i < n - 1; ++i) idx[i] = i;
  while (true) {
    try_subset(idx);
    int pos = n - 2;
    while (pos >= 0 && idx[pos] == m - (n - 1 - pos)) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < n - 1; ++j) idx[j] = idx[j - 1] + 1;
  }
  result.assign(seen.begin(), seen.end());
  return result;
}

}  // namespace

int dimension_cap() { return g_dimension_cap; }
void set_dimension_cap(int cap) {
  if (cap < 0) throw std::invalid_argument("dimension cap must be nonnegative");
  g_dimension_cap = cap;
}

Cone Cone::zero() {
  Cone c;
  c.rank = 0;
  return c;
}

Cone Cone::from_rays(int n, std::vector<Vec> generators) {
  check_cap(n);
  Cone c;
  c.rank = n;
  for (Vec& g : generators) {
    if (static_cast<int>(g.size()) != n) throw std::invalid_argument("ray dimension mismatch");
    g = primitive(g);
  }
  generators.erase(std::remove_if(generators.begin(), generators.end(),
                                  [](const Vec& v) { return tropmod::is_zero(v); }),
                   generators.end());
  std::sort(generators.begin(), generators.end(), lex_less);
  generators.erase(std::unique(generators.begin(), generators.end()), generators.end());

  if (n == 0) {
    if (!generators.empty()) throw std::invalid_argument("rank-0 cone with rays");
    return c;
  }
  if (tropmod::rank(Mat::from_rows(generators, n)) != n) {
    throw std::invalid_argument("rays do not span the lattice; re-embed into the span first");
  }
  // Facet normals = extreme rays of the dual cone.
  c.facets = extreme_rays_from_halfspaces(n, generators);
  if (tropmod::rank(Mat::from_rows(c.facets, n)) != n) {
    throw std::invalid_argument("cone is not strictly convex");
  }
  // Canonical extremal ray list = extreme rays of the primal constraint system.
  c.rays = extreme_rays_from_halfspaces(n, c.facets);
  for (const Vec& g : generators) {
    if (!c.contains(g)) throw std::logic_error("dual description lost a generator");
  }
  return c;
}

Cone Cone::orthant(int n) {
  std::vector<Vec> rays;
  for (int i = 0; i < n; ++i) {
    Vec e(n, Int(0));
    e[i] = 1;
    rays.push_back(e);
  }
  return from_rays(n, rays);
}

Cone Cone::ray() { return orthant(1); }

bool Cone::contains(const Vec& point) const {
  if (static_cast<int>(point.size()) != rank) throw std::invalid_argument("point dimension mismatch");
  for (const Vec& f : facets) {
    if (dot(f, point) < 0) return false;
  }
  return true;
}

bool Cone::contains_q(const QVec& point) const {
  if (static_cast<int>(point.size()) != rank) throw std::invalid_argument("point dimension mismatch");
  for (const Vec& f : facets) {
    if (dot_q(f, point) < 0) return false;
  }
  return true;
}

bool Cone::interior_contains_q(const QVec& point) const {
  if (static_cast<int>(point.size()) != rank) throw std::invalid_argument("point dimension mismatch");
  for (const Vec& f : facets) {
    if (dot_q(f, point) <= 0) return false;
  }
  return true;
}

ConeMorphism ConeMorphism::make(const Cone& src, const Cone& dst, Mat m) {
  if (m.rows != dst.rank || m.cols != src.rank) throw std::invalid_argument("morphism matrix shape");
  ConeMorphism f{src, dst, std::move(m)};
  for (const Vec& r : src.rays) {
    if (!dst.contains(f.apply(r))) {
      throw std::invalid_argument("matrix does not map the source cone into the target cone");
    }
  }
  return f;
}

ConeMorphism ConeMorphism::identity(const Cone& c) {
  return ConeMorphism{c, c, Mat::identity(c.rank)};
}

ConeMorphism compose(const ConeMorphism& g, const ConeMorphism& f) {
  if (f.target != g.source) throw std::invalid_argument("compose: target/source mismatch");
  return ConeMorphism{f.source, g.target, mat_mul(g.matrix, f.matrix)};
}

DualElement DualElement::make(const Cone& on, Vec covector) {
  if (static_cast<int>(covector.size()) != on.rank) throw std::invalid_argument("covector dimension mismatch");
  for (const Vec& r : on.rays) {
    if (dot(covector, r) < 0) throw std::invalid_argument("covector negative on a ray");
  }
  return DualElement{std::move(covector)};
}

std::vector<Vec> facets(int rank, const std::vector<Vec>& generators) {
  check_cap(rank);
  Embedded e = embed_in_span(rank, generators);
  return e.cone.facets;
}

Embedded embed_in_span(int rank, const std::vector<Vec>& generators) {
  check_cap(rank);
  std::vector<Vec> prim;
  for (const Vec& g : generators) {
    Vec p = primitive(g);
    if (!is_zero(p)) prim.push_back(p);
  }
  std::vector<Vec> basis = saturation_basis(prim, rank);
  int d = static_cast<int>(basis.size());
  if (d == rank) {
    // Full span: keep the ambient coordinates.
    basis.clear();
    for (int i = 0; i < rank; ++i) {
      Vec e(rank, Int(0));
      e[i] = 1;
      basis.push_back(std::move(e));
    }
  }
  Mat embed = Mat::from_columns(rank, basis);
  std::vector<Vec> coords;
  for (const Vec& g : prim) {
    auto x = solve_unique_integer(embed, g);
    if (!x) throw std::logic_error("embed_in_span: generator outside saturated span");
    coords.push_back(*x);
  }
  Embedded out;
  out.cone = Cone::from_rays(d, coords);
  out.embedding = embed;
  return out;
}

Face face_from_selector(const Cone& c, const std::vector<int>& facet_subset) {
  Face f;
  f.parent = c;
  std::vector<int> on_rays;
  for (int i = 0; i < static_cast<int>(c.rays.size()); ++i) {
    bool on = true;
    for (int s : facet_subset) {
      if (dot(c.facets[s], c.rays[i]) != 0) {
        on = false;
        break;
      }
    }
    if (on) on_rays.push_back(i);
  }
  f.ray_indices = on_rays;
  // Canonical selector: every facet vanishing on all of the face's rays.
  for (int i = 0; i < static_cast<int>(c.facets.size()); ++i) {
    bool vanishes = true;
    for (int r : on_rays) {
      if (dot(c.facets[i], c.rays[r]) != 0) {
        vanishes = false;
        break;
      }
    }
    if (vanishes) f.selector.push_back(i);
  }
  std::vector<Vec> face_rays;
  for (int r : on_rays) face_rays.push_back(c.rays[r]);
  Embedded e = embed_in_span(c.rank, face_rays);
  f.as_cone = e.cone;
  f.inclusion = ConeMorphism::make(f.as_cone, c, e.embedding);
  return f;
}

Face top_face(const Cone& c) { return face_from_selector(c, {}); }

std::vector<Face> face_lattice(const Cone& c) {
  int nf = static_cast<int>(c.facets.size());
  int nr = static_cast<int>(c.rays.size());
  if (nf > 20) throw std::runtime_error("face_lattice: facet count exceeds the enumeration budget");
  // Incidence: which rays lie on which facet.
  std::vector<unsigned long> facet_rays(nf, 0);
  for (int i = 0; i < nf; ++i) {
    for (int r = 0; r < nr; ++r) {
      if (dot(c.facets[i], c.rays[r]) == 0) facet_rays[i] |= (1ul << r);
    }
  }
  if (nr >= 64) throw std::runtime_error("face_lattice: ray count exceeds the enumeration budget");
  unsigned long all = nr == 0 ? 0 : ((1ul << nr) - 1);
  std::set<unsigned long> seen;
  for (unsigned long mask = 0; mask < (1ul << nf); ++mask) {
    unsigned long rayset = all;
    for (int i = 0; i < nf; ++i) {
      if (mask & (1ul << i)) rayset &= facet_rays[i];
    }
    seen.insert(rayset);
  }
  std::vector<Face> faces;
  for (unsigned long rayset : seen) {
    std::vector<int> sel;
    for (int i = 0; i < nf; ++i) {
      if ((facet_rays[i] & rayset) == rayset) sel.push_back(i);
    }
    faces.push_back(face_from_selector(c, sel));
  }
  // The zero face is the common zero set of all facets for pointed cones, and
  // is produced by the full selector; the cone itself by the empty one.
  std::sort(faces.begin(), faces.end(), [](const Face& a, const Face& b) {
    if (a.dim() != b.dim()) return a.dim() < b.dim();
    return a.ray_indices < b.ray_indices;
  });
  return faces;
}

bool face_leq(const Face& a, const Face& b) {
  if (!(a.parent == b.parent)) throw std::invalid_argument("face_leq: different parents");
  return std::includes(b.ray_indices.begin(), b.ray_indices.end(), a.ray_indices.begin(),
                       a.ray_indices.end());
}

Face smallest_face_containing(const Cone& c, const QVec& point) {
  if (!c.contains_q(point)) throw std::invalid_argument("point outside cone");
  std::vector<int> sel;
  for (int i = 0; i < static_cast<int>(c.facets.size()); ++i) {
    if (dot_q(c.facets[i], point) == 0) sel.push_back(i);
  }
  return face_from_selector(c, sel);
}

Face smallest_face_containing(const Cone& c, const std::vector<Vec>& points) {
  std::vector<int> sel;
  for (int i = 0; i < static_cast<int>(c.facets.size()); ++i) {
    bool vanishes = true;
    for (const Vec& p : points) {
      if (static_cast<int>(p.size()) != c.rank) throw std::invalid_argument("point dimension mismatch");
      Int v = dot(c.facets[i], p);
      if (v < 0) throw std::invalid_argument("point outside cone");
      if (v != 0) vanishes = false;
    }
    if (vanishes) sel.push_back(i);
  }
  return face_from_selector(c, sel);
}

bool is_face_morphism(const ConeMorphism& f) {
  // Injective on lattices.
  if (!kernel_basis(f.matrix).empty()) return false;
  std::vector<Vec> images;
  for (const Vec& r : f.source.rays) images.push_back(f.apply(r));
  Face face = smallest_face_containing(f.target, images);
  if (face.dim() != f.source.rank) return false;
  // The cone maps onto the face: primitive ray images coincide with its rays.
  std::vector<Vec> prim_images;
  for (const Vec& v : images) prim_images.push_back(primitive(v));
  std::sort(prim_images.begin(), prim_images.end(), lex_less);
  prim_images.erase(std::unique(prim_images.begin(), prim_images.end()), prim_images.end());
  std::vector<Vec> face_rays;
  for (int r : face.ray_indices) face_rays.push_back(f.target.rays[r]);
  std::sort(face_rays.begin(), face_rays.end(), lex_less);
  if (prim_images != face_rays) return false;
  // Lattice isomorphism onto the face's span lattice.
  auto y = solve_unique_integer_mat(face.inclusion.matrix, f.matrix);
  if (!y) return false;
  return is_unimodular(*y);
}

Embedded cone_from_constraints(int n, const std::vector<Vec>& halfspaces,
                               const std::vector<Vec>& equations) {
  check_cap(n);
  Mat eq = Mat::from_rows(equations, n);
  std::vector<Vec> kb = kernel_basis(eq);
  int k = static_cast<int>(kb.size());
  Mat K = Mat::from_columns(n, kb);
  std::vector<Vec> restricted;
  for (const Vec& h : halfspaces) {
    Vec r(k, Int(0));
    for (int j = 0; j < k; ++j) r[j] = dot(h, K.column(j));
    restricted.push_back(std::move(r));
  }
  if (k > 0 && rank(Mat::from_rows(restricted, k)) != k) {
    throw std::invalid_argument("cone_from_constraints: cone is not strictly convex");
  }
  std::vector<Vec> rays_k = extreme_rays_from_halfspaces(k, restricted);
  Embedded inner = embed_in_span(k, rays_k);
  Embedded out;
  out.cone = inner.cone;
  out.embedding = mat_mul(K, inner.embedding);
  return out;
}

FiberProduct fiber_product(const ConeMorphism& f, const ConeMorphism& g) {
  if (f.target != g.target) throw std::invalid_argument("fiber_product: distinct targets");
  int n1 = f.source.rank, n2 = g.source.rank, nt = f.target.rank;
  int n = n1 + n2;
  check_cap(n);
  std::vector<Vec> eqs;
  for (int r = 0; r < nt; ++r) {
    Vec e(n, Int(0));
    for (int c = 0; c < n1; ++c) e[c] = f.matrix.at(r, c);
    for (int c = 0; c < n2; ++c) e[n1 + c] = -g.matrix.at(r, c);
    eqs.push_back(std::move(e));
  }
  std::vector<Vec> hs;
  for (const Vec& h : f.source.facets) {
    Vec v(n, Int(0));
    for (int c = 0; c < n1; ++c) v[c] = h[c];
    hs.push_back(std::move(v));
  }
  for (const Vec& h : g.source.facets) {
    Vec v(n, Int(0));
    for (int c = 0; c < n2; ++c) v[n1 + c] = h[c];
    hs.push_back(std::move(v));
  }
  Embedded e = cone_from_constraints(n, hs, eqs);
  FiberProduct fp;
  fp.cone = e.cone;
  fp.embedding = e.embedding;
  Mat p1(n1, e.cone.rank), p2(n2, e.cone.rank);
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < e.cone.rank; ++c) p1.at(r, c) = e.embedding.at(r, c);
  for (int r = 0; r < n2; ++r)
    for (int c = 0; c < e.cone.rank; ++c) p2.at(r, c) = e.embedding.at(n1 + r, c);
  fp.proj1 = ConeMorphism::make(fp.cone, f.source, p1);
  fp.proj2 = ConeMorphism::make(fp.cone, g.source, p2);
  return fp;
}

DualElement pullback_element(const ConeMorphism& f, const DualElement& m) {
  if (static_cast<int>(m.covector.size()) != f.target.rank) {
    throw std::invalid_argument("pullback_element: covector dimension mismatch");
  }
  Vec out(f.source.rank, Int(0));
  for (int c = 0; c < f.source.rank; ++c) {
    for (int r = 0; r < f.target.rank; ++r) out[c] += m.covector[r] * f.matrix.at(r, c);
  }
  return DualElement::make(f.source, out);
}

bool is_zero_on_face(const DualElement& m, const Face& fa) {
  for (int r : fa.ray_indices) {
    if (dot(m.covector, fa.parent.rays[r]) != 0) return false;
  }
  return true;
}

}  // namespace tropmod
