#include "tropmod/stack.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <tuple>

namespace tropmod {

namespace {

std::string mat_key(const Mat& m) {
  std::string s = std::to_string(m.rows) + "x" + std::to_string(m.cols) + ":";
  for (const Int& x : m.a) s += x.str() + ",";
  return s;
}

Mat inverse_unimodular(const Mat& m) {
  auto inv = solve_unique_integer_mat(m, Mat::identity(m.rows));
  if (!inv) throw std::logic_error("inverse_unimodular: matrix is not invertible over Z");
  return *inv;
}

std::vector<int> image_rayset(const ConeCategory& cat, const ConeCategory::Arrow& a) {
  std::vector<Vec> images;
  for (const Vec& r : cat.cones[a.src].rays) images.push_back(mat_apply(a.matrix, r));
  return smallest_face_containing(cat.cones[a.dst], images).ray_indices;
}

}  // namespace

int ConeCategory::add_object(Cone c) {
  cones.push_back(std::move(c));
  identity_arrow.push_back(-1);
  return num_objects() - 1;
}

int ConeCategory::add_arrow(int src, int dst, Mat m) {
  arrows.push_back({src, dst, std::move(m)});
  return num_arrows() - 1;
}

void ConeCategory::set_composite(int second, int first, int result) {
  composition[{second, first}] = result;
}

int ConeCategory::compose_arrows(int second, int first) const {
  if (arrows[first].dst != arrows[second].src) {
    throw std::invalid_argument("compose_arrows: not composable");
  }
  auto it = composition.find({second, first});
  if (it == composition.end()) throw std::logic_error("compose_arrows: composite not recorded");
  return it->second;
}

void ConeCategory::close_thin() {
  std::map<std::tuple<int, int, std::string>, int> by_key;
  for (int i = 0; i < num_arrows(); ++i) {
    auto key = std::make_tuple(arrows[i].src, arrows[i].dst, mat_key(arrows[i].matrix));
    if (by_key.count(key)) {
      throw std::invalid_argument("close_thin: parallel arrows with equal matrices");
    }
    by_key[key] = i;
  }
  for (int o = 0; o < num_objects(); ++o) {
    auto key = std::make_tuple(o, o, mat_key(Mat::identity(cones[o].rank)));
    auto it = by_key.find(key);
    if (it == by_key.end()) throw std::invalid_argument("close_thin: missing identity arrow");
    identity_arrow[o] = it->second;
  }
  for (int i = 0; i < num_arrows(); ++i) {
    for (int j = 0; j < num_arrows(); ++j) {
      if (arrows[i].dst != arrows[j].src) continue;
      Mat prod = mat_mul(arrows[j].matrix, arrows[i].matrix);
      auto key = std::make_tuple(arrows[i].src, arrows[j].dst, mat_key(prod));
      auto it = by_key.find(key);
      if (it == by_key.end()) throw std::invalid_argument("close_thin: composition not closed");
      composition[{j, i}] = it->second;
    }
  }
}

std::vector<int> ConeCategory::hom(int src, int dst) const {
  std::vector<int> out;
  for (int i = 0; i < num_arrows(); ++i) {
    if (arrows[i].src == src && arrows[i].dst == dst) out.push_back(i);
  }
  return out;
}

std::map<int, int> ConeCategory::f_vector() const {
  std::map<int, int> out;
  for (const Cone& c : cones) out[c.rank]++;
  return out;
}

CheckResult verify_category(const ConeCategory& cat) {
  for (int i = 0; i < cat.num_arrows(); ++i) {
    const auto& a = cat.arrows[i];
    if (a.src < 0 || a.src >= cat.num_objects() || a.dst < 0 || a.dst >= cat.num_objects()) {
      return CheckResult::fail("arrow " + std::to_string(i) + " has bad endpoints");
    }
    try {
      ConeMorphism::make(cat.cones[a.src], cat.cones[a.dst], a.matrix);
    } catch (const std::exception& e) {
      return CheckResult::fail("arrow " + std::to_string(i) + ": " + e.what());
    }
  }
  for (int o = 0; o < cat.num_objects(); ++o) {
    int id = cat.identity_arrow[o];
    if (id < 0 || cat.arrows[id].src != o || cat.arrows[id].dst != o ||
        cat.arrows[id].matrix != Mat::identity(cat.cones[o].rank)) {
      return CheckResult::fail("object " + std::to_string(o) + " lacks an identity arrow");
    }
  }
  long long checked = 0;
  for (int i = 0; i < cat.num_arrows(); ++i) {
    for (int j = 0; j < cat.num_arrows(); ++j) {
      if (cat.arrows[i].dst != cat.arrows[j].src) continue;
      auto it = cat.composition.find({j, i});
      if (it == cat.composition.end()) {
        return CheckResult::fail("composition undefined for arrows " + std::to_string(j) + " after " +
                                 std::to_string(i));
      }
      int c = it->second;
      if (cat.arrows[c].src != cat.arrows[i].src || cat.arrows[c].dst != cat.arrows[j].dst) {
        return CheckResult::fail("composite endpoints wrong");
      }
      if (cat.arrows[c].matrix != mat_mul(cat.arrows[j].matrix, cat.arrows[i].matrix)) {
        return CheckResult::fail("composite matrix wrong for " + std::to_string(j) + " after " +
                                 std::to_string(i));
      }
    }
  }
  // Identity laws and associativity (budgeted, deterministic order).
  for (int i = 0; i < cat.num_arrows(); ++i) {
    if (cat.composition.at({i, cat.identity_arrow[cat.arrows[i].src]}) != i) {
      return CheckResult::fail("right identity law fails at arrow " + std::to_string(i));
    }
    if (cat.composition.at({cat.identity_arrow[cat.arrows[i].dst], i}) != i) {
      return CheckResult::fail("left identity law fails at arrow " + std::to_string(i));
    }
  }
  for (int i = 0; i < cat.num_arrows() && checked < 200000; ++i) {
    for (int j = 0; j < cat.num_arrows() && checked < 200000; ++j) {
      if (cat.arrows[i].dst != cat.arrows[j].src) continue;
      int ji = cat.composition.at({j, i});
      for (int k = 0; k < cat.num_arrows() && checked < 200000; ++k) {
        if (cat.arrows[j].dst != cat.arrows[k].src) continue;
        ++checked;
        int kj = cat.composition.at({k, j});
        if (cat.composition.at({k, ji}) != cat.composition.at({kj, i})) {
          return CheckResult::fail("associativity fails");
        }
      }
    }
  }
  return CheckResult::pass();
}

namespace {

// Face-morphism test plus cached image rayset.
struct ArrowFaceInfo {
  bool face = false;
  std::vector<int> rayset;
};

std::vector<ArrowFaceInfo> arrow_face_infos(const ConeCategory& cat) {
  std::vector<ArrowFaceInfo> out(cat.num_arrows());
  for (int i = 0; i < cat.num_arrows(); ++i) {
    const auto& a = cat.arrows[i];
    ConeMorphism m{cat.cones[a.src], cat.cones[a.dst], a.matrix};
    out[i].face = is_face_morphism(m);
    if (out[i].face) out[i].rayset = image_rayset(cat, a);
  }
  return out;
}

}  // namespace

CheckResult verify_cone_complex(const ConeComplexData& d) {
  CheckResult base = verify_category(d);
  if (!base.ok) return base;
  auto infos = arrow_face_infos(d);
  for (int i = 0; i < d.num_arrows(); ++i) {
    if (!infos[i].face) {
      return CheckResult::fail("arrow " + std::to_string(i) + " is not a face morphism");
    }
  }
  // (iii) at most one morphism between two cones.
  std::set<std::pair<int, int>> pairs;
  for (int i = 0; i < d.num_arrows(); ++i) {
    auto key = std::make_pair(d.arrows[i].src, d.arrows[i].dst);
    if (!pairs.insert(key).second) {
      return CheckResult::fail("axiom (iii): two morphisms from cone " + std::to_string(key.first) +
                               " to cone " + std::to_string(key.second));
    }
  }
  // (ii) every face of every cone is the image of exactly one face morphism.
  for (int o = 0; o < d.num_objects(); ++o) {
    for (const Face& f : face_lattice(d.cones[o])) {
      int count = 0;
      for (int i = 0; i < d.num_arrows(); ++i) {
        if (d.arrows[i].dst == o && infos[i].rayset == f.ray_indices) ++count;
      }
      if (count != 1) {
        return CheckResult::fail("axiom (ii): face of cone " + std::to_string(o) + " with " +
                                 std::to_string(count) + " realizations");
      }
    }
  }
  return CheckResult::pass();
}

CheckResult verify_cfg(const ConeStackData& d) {
  CheckResult base = verify_category(d);
  if (!base.ok) return base;
  auto infos = arrow_face_infos(d);
  for (int i = 0; i < d.num_arrows(); ++i) {
    if (!infos[i].face) {
      return CheckResult::fail("arrow " + std::to_string(i) + " is not a face morphism");
    }
  }
  // (i) every face of every cone lifts to an arrow.
  for (int o = 0; o < d.num_objects(); ++o) {
    for (const Face& f : face_lattice(d.cones[o])) {
      bool found = false;
      for (int i = 0; i < d.num_arrows() && !found; ++i) {
        if (d.arrows[i].dst == o && infos[i].rayset == f.ray_indices) found = true;
      }
      if (!found) {
        return CheckResult::fail("cfg (i): face of cone " + std::to_string(o) + " has no lift");
      }
    }
  }
  // (ii) unique fillers.
  for (int u = 0; u < d.num_arrows(); ++u) {
    for (int v = 0; v < d.num_arrows(); ++v) {
      if (d.arrows[u].dst != d.arrows[v].dst) continue;
      // Does image(u) lie inside image(v)?
      if (!std::includes(infos[v].rayset.begin(), infos[v].rayset.end(), infos[u].rayset.begin(),
                         infos[u].rayset.end())) {
        continue;
      }
      auto factored = solve_unique_integer_mat(d.arrows[v].matrix, d.arrows[u].matrix);
      if (!factored) {
        return CheckResult::fail("cfg (ii): no integral factorization of arrow " +
                                 std::to_string(u) + " through arrow " + std::to_string(v));
      }
      int count = 0;
      for (int w = 0; w < d.num_arrows(); ++w) {
        if (d.arrows[w].src != d.arrows[u].src || d.arrows[w].dst != d.arrows[v].src) continue;
        if (d.arrows[w].matrix != *factored) continue;
        if (d.composition.at({v, w}) == u) ++count;
      }
      if (count != 1) {
        return CheckResult::fail("cfg (ii): arrow " + std::to_string(u) + " has " +
                                 std::to_string(count) + " fillers through arrow " +
                                 std::to_string(v));
      }
    }
  }
  return CheckResult::pass();
}

CheckResult check_cone_space(const ConeStackData& d) {
  CheckResult cfg = verify_cfg(d);
  if (!cfg.ok) return cfg;
  for (int o = 0; o < d.num_objects(); ++o) {
    for (int i : d.hom(o, o)) {
      if (i != d.identity_arrow[o]) {
        return CheckResult::fail("object " + std::to_string(o) + " has a nontrivial automorphism");
      }
    }
  }
  return CheckResult::pass();
}

bool is_cone_space(const ConeStackData& d) {
  CheckResult cfg = verify_cfg(d);
  if (!cfg.ok) throw std::invalid_argument("is_cone_space: not fibered in groupoids: " + cfg.message);
  return check_cone_space(d).ok;
}

CheckResult StackMorphism::validate(const ConeCategory& from, const ConeCategory& to) const {
  if (static_cast<int>(obj_map.size()) != from.num_objects() ||
      static_cast<int>(arrow_map.size()) != from.num_arrows() ||
      static_cast<int>(cone_map.size()) != from.num_objects()) {
    return CheckResult::fail("morphism map sizes wrong");
  }
  for (int o = 0; o < from.num_objects(); ++o) {
    int to_obj = obj_map[o];
    if (to_obj < 0 || to_obj >= to.num_objects()) return CheckResult::fail("object image out of range");
    const Mat& m = cone_map[o];
    try {
      ConeMorphism::make(from.cones[o], to.cones[to_obj], m);
    } catch (const std::exception& e) {
      return CheckResult::fail(std::string("cone map invalid: ") + e.what());
    }
    // Image not contained in any proper face.
    std::vector<Vec> images;
    for (const Vec& r : from.cones[o].rays) images.push_back(mat_apply(m, r));
    Face f = smallest_face_containing(to.cones[to_obj], images);
    if (f.dim() != to.cones[to_obj].rank) {
      return CheckResult::fail("cone map image of object " + std::to_string(o) +
                               " lands in a proper face");
    }
  }
  for (int a = 0; a < from.num_arrows(); ++a) {
    int img = arrow_map[a];
    if (img < 0 || img >= to.num_arrows()) return CheckResult::fail("arrow image out of range");
    if (to.arrows[img].src != obj_map[from.arrows[a].src] ||
        to.arrows[img].dst != obj_map[from.arrows[a].dst]) {
      return CheckResult::fail("arrow image endpoints wrong");
    }
    Mat lhs = mat_mul(cone_map[from.arrows[a].dst], from.arrows[a].matrix);
    Mat rhs = mat_mul(to.arrows[img].matrix, cone_map[from.arrows[a].src]);
    if (lhs != rhs) return CheckResult::fail("square does not commute at arrow " + std::to_string(a));
  }
  for (int o = 0; o < from.num_objects(); ++o) {
    if (arrow_map[from.identity_arrow[o]] != to.identity_arrow[obj_map[o]]) {
      return CheckResult::fail("identities not preserved");
    }
  }
  for (const auto& [pair, comp] : from.composition) {
    auto [second, first] = pair;
    int img = to.composition.at({arrow_map[second], arrow_map[first]});
    if (img != arrow_map[comp]) return CheckResult::fail("composition not preserved");
  }
  return CheckResult::pass();
}

bool StackMorphism::is_strict(const ConeCategory& from, const ConeCategory& to) const {
  for (int o = 0; o < from.num_objects(); ++o) {
    const Cone& src = from.cones[o];
    const Cone& dst = to.cones[obj_map[o]];
    if (src.rank != dst.rank) return false;
    ConeMorphism m{src, dst, cone_map[o]};
    if (!is_face_morphism(m)) return false;
  }
  return true;
}

StackMorphism compose(const StackMorphism& second, const StackMorphism& first,
                      const ConeCategory& a, const ConeCategory&, const ConeCategory&) {
  StackMorphism out;
  out.obj_map.resize(a.num_objects());
  out.cone_map.resize(a.num_objects());
  out.arrow_map.resize(a.num_arrows());
  for (int o = 0; o < a.num_objects(); ++o) {
    out.obj_map[o] = second.obj_map[first.obj_map[o]];
    out.cone_map[o] = mat_mul(second.cone_map[first.obj_map[o]], first.cone_map[o]);
  }
  for (int i = 0; i < a.num_arrows(); ++i) out.arrow_map[i] = second.arrow_map[first.arrow_map[i]];
  return out;
}

StackMorphism identity_morphism(const ConeCategory& a) {
  StackMorphism out;
  out.obj_map.resize(a.num_objects());
  std::iota(out.obj_map.begin(), out.obj_map.end(), 0);
  out.arrow_map.resize(a.num_arrows());
  std::iota(out.arrow_map.begin(), out.arrow_map.end(), 0);
  for (const Cone& c : a.cones) out.cone_map.push_back(Mat::identity(c.rank));
  return out;
}

FaceComplex cone_as_complex(const Cone& c) {
  FaceComplex out;
  out.faces = face_lattice(c);
  for (const Face& f : out.faces) out.complex.add_object(f.as_cone);
  for (size_t i = 0; i < out.faces.size(); ++i) {
    for (size_t j = 0; j < out.faces.size(); ++j) {
      if (!face_leq(out.faces[i], out.faces[j])) continue;
      auto m = solve_unique_integer_mat(out.faces[j].inclusion.matrix, out.faces[i].inclusion.matrix);
      if (!m) throw std::logic_error("cone_as_complex: face inclusion not integral");
      out.complex.add_arrow(static_cast<int>(i), static_cast<int>(j), *m);
    }
  }
  out.complex.close_thin();
  return out;
}

int FaceComplex::face_index_of_rayset(const std::vector<int>& ray_indices) const {
  for (size_t i = 0; i < faces.size(); ++i) {
    if (faces[i].ray_indices == ray_indices) return static_cast<int>(i);
  }
  throw std::invalid_argument("face_index_of_rayset: no such face");
}

// ---------------------------------------------------------------------------

namespace {

// Unique preimage edge in the source of a contraction-free position: for a
// J-morphism pi: B -> A, each edge of A has a unique preimage edge in B.
int preimage_edge(const GraphMorphism& pi, int target_edge) {
  auto tedges = pi.target.edges();
  int tf = tedges[target_edge].first;
  for (int f = 0; f < pi.source.num_flags(); ++f) {
    if (!pi.flag_image[f].first && pi.flag_image[f].second == tf) {
      return pi.source.edge_of_flag(f);
    }
  }
  throw std::logic_error("preimage_edge: flag with no preimage");
}

}  // namespace

ModuliStack build_moduli_stack(int g, int n) {
  ModuliStack out;
  out.classes = enumerate_stable(g, n);
  int k = static_cast<int>(out.classes.size());
  for (const MarkedGraph& cls : out.classes) out.cat.add_object(Cone::orthant(cls.num_edges()));
  // Arrow A -> B for each J-morphism classes[B] -> classes[A].
  for (int A = 0; A < k; ++A) {
    for (int B = 0; B < k; ++B) {
      for (GraphMorphism& pi : morphisms(out.classes[B], out.classes[A])) {
        Mat m(out.classes[B].num_edges(), out.classes[A].num_edges());
        for (int e = 0; e < out.classes[A].num_edges(); ++e) {
          m.at(preimage_edge(pi, e), e) = 1;
        }
        out.cat.add_arrow(A, B, std::move(m));
        out.arrow_contractions.push_back(std::move(pi));
      }
    }
  }
  // Identities: the arrow whose contraction is the identity morphism.
  for (int o = 0; o < k; ++o) {
    auto [gc, idm] = contract(out.classes[o], {});
    for (int i = 0; i < out.cat.num_arrows(); ++i) {
      if (out.cat.arrows[i].src == o && out.cat.arrows[i].dst == o &&
          same_map(out.arrow_contractions[i], idm)) {
        out.cat.identity_arrow[o] = i;
      }
    }
  }
  // Composition: b after a corresponds to contracting along b then a.
  for (int a = 0; a < out.cat.num_arrows(); ++a) {
    for (int b = 0; b < out.cat.num_arrows(); ++b) {
      if (out.cat.arrows[a].dst != out.cat.arrows[b].src) continue;
      GraphMorphism pi = compose(out.arrow_contractions[a], out.arrow_contractions[b]);
      int found = -1;
      for (int c = 0; c < out.cat.num_arrows(); ++c) {
        if (out.cat.arrows[c].src == out.cat.arrows[a].src &&
            out.cat.arrows[c].dst == out.cat.arrows[b].dst &&
            same_map(out.arrow_contractions[c], pi)) {
          found = c;
        }
      }
      if (found < 0) throw std::logic_error("moduli stack composition not closed");
      out.cat.set_composite(b, a, found);
    }
  }
  return out;
}

int ModuliStack::object_of_class(const MarkedGraph& g) const {
  std::string key = canonical_form(g);
  for (size_t i = 0; i < classes.size(); ++i) {
    if (canonical_form(classes[i]) == key) return static_cast<int>(i);
  }
  throw std::invalid_argument("object_of_class: class not in this moduli stack");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> complement(int n, const std::vector<int>& s) {
  std::vector<int> out;
  std::set<int> in(s.begin(), s.end());
  for (int i = 0; i < n; ++i) {
    if (!in.count(i)) out.push_back(i);
  }
  return out;
}

std::vector<std::vector<int>> subsets_of(int n) {
  std::vector<std::vector<int>> out;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) s.push_back(i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Local edge index in a contraction target of an original surviving edge.
int local_edge(const GraphMorphism& witness, int original_edge) {
  auto es = witness.source.edges();
  auto [tv, nf] = witness.flag_image[es[original_edge].first];
  if (tv) throw std::logic_error("local_edge: edge was contracted");
  return witness.target.edge_of_flag(nf);
}

int original_edge(const GraphMorphism& witness, int local) {
  auto tes = witness.target.edges();
  int tf = tes[local].first;
  for (int f = 0; f < witness.source.num_flags(); ++f) {
    if (!witness.flag_image[f].first && witness.flag_image[f].second == tf) {
      return witness.source.edge_of_flag(f);
    }
  }
  throw std::logic_error("original_edge: no preimage");
}

// Transport an isomorphism phi: A -> B along contractions wA: A -> A' and
// wB: B -> B'; requires the contracted edge sets to correspond under phi.
std::optional<GraphMorphism> induced_iso(const GraphMorphism& phi, const GraphMorphism& wA,
                                         const GraphMorphism& wB) {
  // Dying sets must correspond.
  std::set<int> dyingB(wB.contracted_edges.begin(), wB.contracted_edges.end());
  std::set<int> mappedA;
  auto a_edges = wA.source.edges();
  for (int e : wA.contracted_edges) {
    int bf = phi.flag_image[a_edges[e].first].second;
    mappedA.insert(phi.target.edge_of_flag(bf));
  }
  if (mappedA != dyingB) return std::nullopt;
  GraphMorphism out;
  out.source = wA.target;
  out.target = wB.target;
  out.vertex_image.assign(out.source.num_vertices(), -1);
  out.flag_image.assign(out.source.num_flags(), {true, -1});
  for (int v = 0; v < wA.source.num_vertices(); ++v) {
    out.vertex_image[wA.vertex_image[v]] = wB.vertex_image[phi.vertex_image[v]];
  }
  for (int f = 0; f < wA.source.num_flags(); ++f) {
    if (wA.flag_image[f].first) continue;
    int f_in_Aprime = wA.flag_image[f].second;
    auto img = wB.flag_image[phi.flag_image[f].second];
    if (img.first) return std::nullopt;
    out.flag_image[f_in_Aprime] = img;
  }
  return out;
}

}  // namespace

GroupoidPresentation groupoid_presentation(int g, int n) {
  GroupoidPresentation p;
  p.genus = g;
  p.markings = n;
  p.maximal = enumerate_maximal(g, n);
  int k = static_cast<int>(p.maximal.size());

  for (int cls = 0; cls < k; ++cls) {
    int ne = p.maximal[cls].num_edges();
    for (const std::vector<int>& s : subsets_of(ne)) {
      p.contractions[{cls, s}] = contract(p.maximal[cls], s);
    }
  }

  // U: one component per maximal class, cones indexed by surviving subsets.
  for (int cls = 0; cls < k; ++cls) {
    int ne = p.maximal[cls].num_edges();
    for (const std::vector<int>& t : subsets_of(ne)) {
      p.u_index.push_back({cls, t});
      p.U.add_object(Cone::orthant(static_cast<int>(t.size())));
    }
  }
  auto u_pos = [&](const std::vector<int>& sorted_set, int e) {
    return static_cast<int>(std::lower_bound(sorted_set.begin(), sorted_set.end(), e) -
                            sorted_set.begin());
  };
  for (size_t i = 0; i < p.u_index.size(); ++i) {
    for (size_t j = 0; j < p.u_index.size(); ++j) {
      if (p.u_index[i].cls != p.u_index[j].cls) continue;
      const auto& ti = p.u_index[i].surviving;
      const auto& tj = p.u_index[j].surviving;
      if (!std::includes(tj.begin(), tj.end(), ti.begin(), ti.end())) continue;
      Mat m(static_cast<int>(tj.size()), static_cast<int>(ti.size()));
      for (size_t c = 0; c < ti.size(); ++c) m.at(u_pos(tj, ti[c]), static_cast<int>(c)) = 1;
      p.U.add_arrow(static_cast<int>(i), static_cast<int>(j), std::move(m));
    }
  }
  p.U.close_thin();

  // R: triples (S1, S2, phi).
  for (int c1 = 0; c1 < k; ++c1) {
    int ne1 = p.maximal[c1].num_edges();
    for (int c2 = 0; c2 < k; ++c2) {
      int ne2 = p.maximal[c2].num_edges();
      for (const std::vector<int>& s1 : subsets_of(ne1)) {
        const MarkedGraph& q1 = p.contractions.at({c1, s1}).first;
        for (const std::vector<int>& s2 : subsets_of(ne2)) {
          const MarkedGraph& q2 = p.contractions.at({c2, s2}).first;
          if (q1.num_edges() != q2.num_edges()) continue;
          for (GraphMorphism& iso : isomorphisms(q1, q2)) {
            p.r_index.push_back({c1, c2, s1, s2, std::move(iso)});
            p.R.add_object(Cone::orthant(ne1 - static_cast<int>(s1.size())));
          }
        }
      }
    }
  }
  // Face arrows of R: enlarging both contracted sets compatibly.
  for (size_t i = 0; i < p.r_index.size(); ++i) {
    const auto& big = p.r_index[i];  // cone of dimension ne1 - |s1|... the face
    for (size_t j = 0; j < p.r_index.size(); ++j) {
      const auto& small = p.r_index[j];
      if (big.cls1 != small.cls1 || big.cls2 != small.cls2) continue;
      // big is a face of small iff small's contracted sets are subsets.
      if (!std::includes(big.s1.begin(), big.s1.end(), small.s1.begin(), small.s1.end())) continue;
      if (!std::includes(big.s2.begin(), big.s2.end(), small.s2.begin(), small.s2.end())) continue;
      const auto& ps1 = p.contractions.at({small.cls1, small.s1});
      const auto& pb1 = p.contractions.at({big.cls1, big.s1});
      const auto& ps2 = p.contractions.at({small.cls2, small.s2});
      const auto& pb2 = p.contractions.at({big.cls2, big.s2});
      // Contract the extra edges inside the small triple's graphs.
      std::vector<int> extra1, extra2;
      for (int e : big.s1) {
        if (!std::binary_search(small.s1.begin(), small.s1.end(), e)) {
          extra1.push_back(local_edge(ps1.second, e));
        }
      }
      for (int e : big.s2) {
        if (!std::binary_search(small.s2.begin(), small.s2.end(), e)) {
          extra2.push_back(local_edge(ps2.second, e));
        }
      }
      std::sort(extra1.begin(), extra1.end());
      std::sort(extra2.begin(), extra2.end());
      auto [r1, v1] = contract(ps1.first, extra1);
      auto [r2, v2] = contract(ps2.first, extra2);
      if (!(r1 == pb1.first) || !(r2 == pb2.first)) {
        throw std::logic_error("contraction cache mismatch");
      }
      auto ind = induced_iso(small.iso, v1, v2);
      if (!ind || !same_map(*ind, big.iso)) continue;
      // Inclusion matrix on surviving edge coordinates of class cls1.
      std::vector<int> tb = complement(p.maximal[big.cls1].num_edges(), big.s1);
      std::vector<int> ts = complement(p.maximal[small.cls1].num_edges(), small.s1);
      Mat m(static_cast<int>(ts.size()), static_cast<int>(tb.size()));
      for (size_t c = 0; c < tb.size(); ++c) m.at(u_pos(ts, tb[c]), static_cast<int>(c)) = 1;
      p.R.add_arrow(static_cast<int>(i), static_cast<int>(j), std::move(m));
    }
  }
  // Identities for R; the complex is thin.
  p.R.close_thin();

  // Source and target maps.
  auto find_u = [&](int cls, const std::vector<int>& surviving) {
    for (size_t i = 0; i < p.u_index.size(); ++i) {
      if (p.u_index[i].cls == cls && p.u_index[i].surviving == surviving) return static_cast<int>(i);
    }
    throw std::logic_error("missing U cone");
  };
  p.src_map.obj_map.resize(p.r_index.size());
  p.src_map.cone_map.resize(p.r_index.size());
  p.tgt_map.obj_map.resize(p.r_index.size());
  p.tgt_map.cone_map.resize(p.r_index.size());
  for (size_t i = 0; i < p.r_index.size(); ++i) {
    const auto& rc = p.r_index[i];
    std::vector<int> t1 = complement(p.maximal[rc.cls1].num_edges(), rc.s1);
    std::vector<int> t2 = complement(p.maximal[rc.cls2].num_edges(), rc.s2);
    p.src_map.obj_map[i] = find_u(rc.cls1, t1);
    p.src_map.cone_map[i] = Mat::identity(static_cast<int>(t1.size()));
    p.tgt_map.obj_map[i] = find_u(rc.cls2, t2);
    // Coordinate permutation through the iso.
    const auto& w1 = p.contractions.at({rc.cls1, rc.s1}).second;
    const auto& w2 = p.contractions.at({rc.cls2, rc.s2}).second;
    Mat m(static_cast<int>(t2.size()), static_cast<int>(t1.size()));
    for (size_t c = 0; c < t1.size(); ++c) {
      int le = local_edge(w1, t1[c]);
      auto les = rc.iso.source.edges();
      int image_flag = rc.iso.flag_image[les[le].first].second;
      int le2 = rc.iso.target.edge_of_flag(image_flag);
      int e2 = original_edge(w2, le2);
      m.at(u_pos(t2, e2), static_cast<int>(c)) = 1;
    }
    p.tgt_map.cone_map[i] = std::move(m);
  }
  // Arrow maps for s and t: the target complexes are thin.
  auto fill_arrow_map = [&](StackMorphism& sm, const ConeCategory& from, const ConeCategory& to) {
    sm.arrow_map.resize(from.num_arrows());
    for (int a = 0; a < from.num_arrows(); ++a) {
      int so = sm.obj_map[from.arrows[a].src];
      int de = sm.obj_map[from.arrows[a].dst];
      Mat want = mat_mul(sm.cone_map[from.arrows[a].dst], from.arrows[a].matrix);
      int found = -1;
      for (int b : to.hom(so, de)) {
        if (mat_mul(to.arrows[b].matrix, sm.cone_map[from.arrows[a].src]) == want) found = b;
      }
      if (found < 0) throw std::logic_error("no arrow image in the target complex");
      sm.arrow_map[a] = found;
    }
  };
  fill_arrow_map(p.src_map, p.R, p.U);
  fill_arrow_map(p.tgt_map, p.R, p.U);

  // Unit: diagonal triples with the identity isomorphism.
  p.unit.obj_map.resize(p.u_index.size());
  p.unit.cone_map.resize(p.u_index.size());
  for (size_t i = 0; i < p.u_index.size(); ++i) {
    int cls = p.u_index[i].cls;
    std::vector<int> s = complement(p.maximal[cls].num_edges(), p.u_index[i].surviving);
    auto [q2, idm] = contract(p.contractions.at({cls, s}).first, {});
    p.unit.obj_map[i] = p.r_cone_of(cls, cls, s, s, idm);
    p.unit.cone_map[i] = Mat::identity(static_cast<int>(p.u_index[i].surviving.size()));
  }
  fill_arrow_map(p.unit, p.U, p.R);

  // Inverse: swap the triple and invert the isomorphism.
  p.inverse.obj_map.resize(p.r_index.size());
  p.inverse.cone_map.resize(p.r_index.size());
  for (size_t i = 0; i < p.r_index.size(); ++i) {
    const auto& rc = p.r_index[i];
    p.inverse.obj_map[i] = p.r_cone_of(rc.cls2, rc.cls1, rc.s2, rc.s1, invert(rc.iso));
    p.inverse.cone_map[i] = p.tgt_map.cone_map[i];
  }
  fill_arrow_map(p.inverse, p.R, p.R);

  return p;
}

int GroupoidPresentation::u_cone_of(int cls, const std::vector<int>& surviving) const {
  for (size_t i = 0; i < u_index.size(); ++i) {
    if (u_index[i].cls == cls && u_index[i].surviving == surviving) return static_cast<int>(i);
  }
  throw std::invalid_argument("u_cone_of: no such cone");
}

int GroupoidPresentation::r_cone_of(int cls1, int cls2, const std::vector<int>& s1,
                                    const std::vector<int>& s2, const GraphMorphism& iso) const {
  for (size_t i = 0; i < r_index.size(); ++i) {
    const auto& rc = r_index[i];
    if (rc.cls1 == cls1 && rc.cls2 == cls2 && rc.s1 == s1 && rc.s2 == s2 && same_map(rc.iso, iso)) {
      return static_cast<int>(i);
    }
  }
  throw std::invalid_argument("r_cone_of: no such cone");
}

namespace {

// Normalize a groupoid point to the triple whose cone's relative interior
// contains it (drop zero coordinates into the contracted sets).
GroupoidPoint normalize_point(const GroupoidPresentation& p, const GroupoidPoint& x) {
  const auto& rc = p.r_index[x.r_cone];
  std::vector<int> t1 = complement(p.maximal[rc.cls1].num_edges(), rc.s1);
  if (static_cast<int>(x.coords.size()) != static_cast<int>(t1.size())) {
    throw std::invalid_argument("groupoid point has wrong coordinate count");
  }
  std::vector<int> s1 = rc.s1, s2 = rc.s2;
  std::vector<int> keep_pos;
  const auto& w1 = p.contractions.at({rc.cls1, rc.s1}).second;
  const auto& w2 = p.contractions.at({rc.cls2, rc.s2}).second;
  std::vector<int> extra1, extra2;
  for (size_t i = 0; i < t1.size(); ++i) {
    if (x.coords[i] < 0) throw std::invalid_argument("negative coordinate");
    if (x.coords[i] == 0) {
      s1.push_back(t1[i]);
      int le = local_edge(w1, t1[i]);
      auto les = rc.iso.source.edges();
      int le2 = rc.iso.target.edge_of_flag(rc.iso.flag_image[les[le].first].second);
      s2.push_back(original_edge(w2, le2));
      extra1.push_back(le);
      extra2.push_back(le2);
    } else {
      keep_pos.push_back(static_cast<int>(i));
    }
  }
  if (extra1.empty()) return x;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  std::sort(extra1.begin(), extra1.end());
  std::sort(extra2.begin(), extra2.end());
  auto [r1, v1] = contract(rc.iso.source, extra1);
  auto [r2, v2] = contract(rc.iso.target, extra2);
  auto ind = induced_iso(rc.iso, v1, v2);
  if (!ind) throw std::logic_error("normalize_point: induced isomorphism missing");
  GroupoidPoint out;
  out.r_cone = p.r_cone_of(rc.cls1, rc.cls2, s1, s2, *ind);
  for (int i : keep_pos) out.coords.push_back(x.coords[i]);
  return out;
}

}  // namespace

GroupoidPoint compose_points(const GroupoidPresentation& p, const GroupoidPoint& x,
                             const GroupoidPoint& y) {
  GroupoidPoint a = normalize_point(p, x);
  GroupoidPoint b = normalize_point(p, y);
  const auto& ra = p.r_index[a.r_cone];
  const auto& rb = p.r_index[b.r_cone];
  if (ra.cls2 != rb.cls1 || ra.s2 != rb.s1) {
    throw std::invalid_argument("compose_points: middle cones differ");
  }
  // t-coordinates of a must equal the coordinates of b.
  std::vector<int> t1 = complement(p.maximal[ra.cls1].num_edges(), ra.s1);
  std::vector<int> t2 = complement(p.maximal[ra.cls2].num_edges(), ra.s2);
  const auto& w1 = p.contractions.at({ra.cls1, ra.s1}).second;
  const auto& w2 = p.contractions.at({ra.cls2, ra.s2}).second;
  QVec tcoords(t2.size(), Rat(0));
  for (size_t i = 0; i < t1.size(); ++i) {
    int le = local_edge(w1, t1[i]);
    auto les = ra.iso.source.edges();
    int le2 = ra.iso.target.edge_of_flag(ra.iso.flag_image[les[le].first].second);
    int e2 = original_edge(w2, le2);
    size_t pos = std::lower_bound(t2.begin(), t2.end(), e2) - t2.begin();
    tcoords[pos] = a.coords[i];
  }
  if (tcoords != b.coords) throw std::invalid_argument("compose_points: points do not match");
  GraphMorphism composite = compose(rb.iso, ra.iso);
  GroupoidPoint out;
  out.r_cone = p.r_cone_of(ra.cls1, rb.cls2, ra.s1, rb.s2, composite);
  out.coords = a.coords;
  return out;
}

CheckResult check_groupoid(const GroupoidPresentation& p, unsigned seed, int samples) {
  CheckResult r;
  r = verify_cone_complex(p.U);
  if (!r.ok) return CheckResult::fail("U: " + r.message);
  r = verify_cone_complex(p.R);
  if (!r.ok) return CheckResult::fail("R: " + r.message);
  r = p.src_map.validate(p.R, p.U);
  if (!r.ok) return CheckResult::fail("s: " + r.message);
  r = p.tgt_map.validate(p.R, p.U);
  if (!r.ok) return CheckResult::fail("t: " + r.message);
  r = p.unit.validate(p.U, p.R);
  if (!r.ok) return CheckResult::fail("unit: " + r.message);
  r = p.inverse.validate(p.R, p.R);
  if (!r.ok) return CheckResult::fail("inverse: " + r.message);
  if (!p.src_map.is_strict(p.R, p.U)) return CheckResult::fail("s is not strict");
  if (!p.tgt_map.is_strict(p.R, p.U)) return CheckResult::fail("t is not strict");
  // Surjectivity cone by cone: unit provides a section.
  for (size_t i = 0; i < p.u_index.size(); ++i) {
    if (p.src_map.obj_map[p.unit.obj_map[i]] != static_cast<int>(i)) {
      return CheckResult::fail("s . unit is not the identity on cones");
    }
    if (p.tgt_map.obj_map[p.unit.obj_map[i]] != static_cast<int>(i)) {
      return CheckResult::fail("t . unit is not the identity on cones");
    }
  }
  // Inverse swaps s and t.
  for (size_t i = 0; i < p.r_index.size(); ++i) {
    int inv = p.inverse.obj_map[i];
    if (p.src_map.obj_map[inv] != p.tgt_map.obj_map[i] ||
        p.tgt_map.obj_map[inv] != p.src_map.obj_map[i]) {
      return CheckResult::fail("inverse does not swap source and target");
    }
    if (p.inverse.obj_map[inv] != static_cast<int>(i)) {
      return CheckResult::fail("inverse is not an involution on cones");
    }
  }

  // Point-level axioms on a deterministic sample.
  std::mt19937_64 rng(seed);
  auto random_point = [&](int r_cone) {
    const auto& rc = p.r_index[r_cone];
    int dim = p.maximal[rc.cls1].num_edges() - static_cast<int>(rc.s1.size());
    GroupoidPoint x{r_cone, QVec(dim)};
    for (int i = 0; i < dim; ++i) x.coords[i] = Rat(static_cast<long>(rng() % 4));
    return x;
  };
  auto unit_point_for = [&](const GroupoidPoint& x, bool source_side) {
    GroupoidPoint nx = normalize_point(p, x);
    const auto& rc = p.r_index[nx.r_cone];
    if (source_side) {
      auto [q1, idm1] = contract(p.contractions.at({rc.cls1, rc.s1}).first, {});
      return GroupoidPoint{p.r_cone_of(rc.cls1, rc.cls1, rc.s1, rc.s1, idm1), nx.coords};
    }
    auto [q2, idm] = contract(p.contractions.at({rc.cls2, rc.s2}).first, {});
    // Coordinates on the target side.
    std::vector<int> t1 = complement(p.maximal[rc.cls1].num_edges(), rc.s1);
    std::vector<int> t2 = complement(p.maximal[rc.cls2].num_edges(), rc.s2);
    const auto& w1 = p.contractions.at({rc.cls1, rc.s1}).second;
    const auto& w2 = p.contractions.at({rc.cls2, rc.s2}).second;
    QVec tcoords(t2.size(), Rat(0));
    for (size_t i = 0; i < t1.size(); ++i) {
      int le = local_edge(w1, t1[i]);
      auto les = rc.iso.source.edges();
      int le2 = rc.iso.target.edge_of_flag(rc.iso.flag_image[les[le].first].second);
      int e2 = original_edge(w2, le2);
      size_t pos = std::lower_bound(t2.begin(), t2.end(), e2) - t2.begin();
      tcoords[pos] = nx.coords[i];
    }
    return GroupoidPoint{p.r_cone_of(rc.cls2, rc.cls2, rc.s2, rc.s2, idm), tcoords};
  };

  int done = 0;
  for (int trial = 0; trial < samples * 10 && done < samples; ++trial) {
    int i = static_cast<int>(rng() % p.r_index.size());
    GroupoidPoint x = random_point(i);
    GroupoidPoint ux = unit_point_for(x, true);
    GroupoidPoint xu = unit_point_for(x, false);
    GroupoidPoint nx = normalize_point(p, x);
    // Unit laws.
    GroupoidPoint left = compose_points(p, ux, x);
    GroupoidPoint right = compose_points(p, x, xu);
    if (!(left.r_cone == nx.r_cone && left.coords == nx.coords)) {
      return CheckResult::fail("left unit law fails on a sampled point");
    }
    if (!(right.r_cone == nx.r_cone && right.coords == nx.coords)) {
      return CheckResult::fail("right unit law fails on a sampled point");
    }
    // Inverse law: x . x^{-1} = unit at s(x).
    GroupoidPoint xinv{p.inverse.obj_map[nx.r_cone], QVec{}};
    xinv.coords = mat_apply_q(p.inverse.cone_map[nx.r_cone], nx.coords);
    GroupoidPoint prod = compose_points(p, x, xinv);
    GroupoidPoint us = unit_point_for(x, true);
    if (!(prod.r_cone == us.r_cone && prod.coords == us.coords)) {
      return CheckResult::fail("inverse law fails on a sampled point");
    }
    // Associativity on (x, x^{-1}, x).
    GroupoidPoint a1 = compose_points(p, compose_points(p, x, xinv), x);
    GroupoidPoint a2 = compose_points(p, x, compose_points(p, xinv, x));
    if (!(a1.r_cone == a2.r_cone && a1.coords == a2.coords)) {
      return CheckResult::fail("associativity fails on a sampled triple");
    }
    ++done;
  }
  if (done < samples) return CheckResult::fail("could not draw enough sample points");
  return CheckResult::pass();
}

// ---------------------------------------------------------------------------

PullbackResult restrict_to_face(const TropicalCurve& c, const Face& f) {
  return pullback(f.inclusion, c);
}

AtlasFiber atlas_fiber(const TropicalCurve& curve, const MarkedGraph& G) {
  AtlasFiber out;
  out.base = cone_as_complex(curve.base);
  int nf = static_cast<int>(out.base.faces.size());
  std::vector<PullbackResult> restricted;
  for (const Face& f : out.base.faces) restricted.push_back(restrict_to_face(curve, f));

  for (int fi = 0; fi < nf; ++fi) {
    for (GraphMorphism& phi : morphisms(G, restricted[fi].curve.graph)) {
      out.index.push_back({fi, std::move(phi)});
      out.complex.add_object(out.base.faces[fi].as_cone);
    }
  }
  // Face arrows: (fi', phi') <= (fi, phi) iff fi' <= fi and phi' is phi
  // followed by the contraction between the restrictions.
  for (size_t i = 0; i < out.index.size(); ++i) {
    for (size_t j = 0; j < out.index.size(); ++j) {
      int fs = out.index[i].face, fb = out.index[j].face;
      if (!face_leq(out.base.faces[fs], out.base.faces[fb])) continue;
      // Witness contraction graph(curve|fb) -> graph(curve|fs).
      auto incl = solve_unique_integer_mat(out.base.faces[fb].inclusion.matrix,
                                           out.base.faces[fs].inclusion.matrix);
      if (!incl) throw std::logic_error("atlas_fiber: face inclusion not integral");
      ConeMorphism rel{out.base.faces[fs].as_cone, out.base.faces[fb].as_cone, *incl};
      PullbackResult step = pullback(rel, restricted[fb].curve);
      if (!(step.curve.graph == restricted[fs].curve.graph)) {
        throw std::logic_error("atlas_fiber: restriction mismatch");
      }
      GraphMorphism composed = compose(step.contraction, out.index[j].phi);
      if (!same_map(composed, out.index[i].phi)) continue;
      out.complex.add_arrow(static_cast<int>(i), static_cast<int>(j), *incl);
    }
  }
  out.complex.close_thin();

  out.projection.obj_map.resize(out.index.size());
  out.projection.cone_map.resize(out.index.size());
  for (size_t i = 0; i < out.index.size(); ++i) {
    out.projection.obj_map[i] = out.index[i].face;
    out.projection.cone_map[i] = Mat::identity(out.base.faces[out.index[i].face].dim());
  }
  out.projection.arrow_map.resize(out.complex.num_arrows());
  for (int a = 0; a < out.complex.num_arrows(); ++a) {
    int so = out.projection.obj_map[out.complex.arrows[a].src];
    int de = out.projection.obj_map[out.complex.arrows[a].dst];
    int found = -1;
    for (int b : out.base.complex.hom(so, de)) {
      if (out.base.complex.arrows[b].matrix == out.complex.arrows[a].matrix) found = b;
    }
    if (found < 0) throw std::logic_error("atlas_fiber: projection arrow missing");
    out.projection.arrow_map[a] = found;
  }
  return out;
}

CurvePairFiber curve_pair_fiber(const TropicalCurve& c1, const TropicalCurve& c2) {
  CurvePairFiber out;
  out.base1 = cone_as_complex(c1.base);
  out.base2 = cone_as_complex(c2.base);
  std::vector<PullbackResult> r1, r2;
  for (const Face& f : out.base1.faces) r1.push_back(restrict_to_face(c1, f));
  for (const Face& f : out.base2.faces) r2.push_back(restrict_to_face(c2, f));

  for (size_t a = 0; a < out.base1.faces.size(); ++a) {
    const Cone& ca = out.base1.faces[a].as_cone;
    for (size_t b = 0; b < out.base2.faces.size(); ++b) {
      const Cone& cb = out.base2.faces[b].as_cone;
      for (GraphMorphism& iso : isomorphisms(r1[a].curve.graph, r2[b].curve.graph)) {
        // Cut cone in the face product.
        int n = ca.rank + cb.rank;
        std::vector<Vec> hs;
        for (const Vec& h : ca.facets) {
          Vec v(n, Int(0));
          for (int i = 0; i < ca.rank; ++i) v[i] = h[i];
          hs.push_back(std::move(v));
        }
        for (const Vec& h : cb.facets) {
          Vec v(n, Int(0));
          for (int i = 0; i < cb.rank; ++i) v[ca.rank + i] = h[i];
          hs.push_back(std::move(v));
        }
        std::vector<Vec> eqs;
        auto a_edges = r1[a].curve.graph.edges();
        for (int e = 0; e < r1[a].curve.graph.num_edges(); ++e) {
          int img_flag = iso.flag_image[a_edges[e].first].second;
          int e2 = r2[b].curve.graph.edge_of_flag(img_flag);
          Vec v(n, Int(0));
          for (int i = 0; i < ca.rank; ++i) v[i] = r1[a].curve.lengths[e][i];
          for (int i = 0; i < cb.rank; ++i) v[ca.rank + i] = -r2[b].curve.lengths[e2][i];
          eqs.push_back(std::move(v));
        }
        Embedded cut = cone_from_constraints(n, hs, eqs);
        // Keep only cones meeting relint(face1) x relint(face2).
        Vec sum(cut.cone.rank, Int(0));
        for (const Vec& ray : cut.cone.rays) {
          for (int i = 0; i < cut.cone.rank; ++i) sum[i] += ray[i];
        }
        Vec amb = mat_apply(cut.embedding, sum);
        QVec pa(ca.rank), pb(cb.rank);
        for (int i = 0; i < ca.rank; ++i) pa[i] = Rat(amb[i]);
        for (int i = 0; i < cb.rank; ++i) pb[i] = Rat(amb[ca.rank + i]);
        if (!ca.interior_contains_q(pa) || !cb.interior_contains_q(pb)) continue;
        out.index.push_back({static_cast<int>(a), static_cast<int>(b), std::move(iso),
                             cut.embedding});
        out.complex.add_object(cut.cone);
      }
    }
  }

  // Face arrows between compatible triples.
  for (size_t i = 0; i < out.index.size(); ++i) {
    for (size_t j = 0; j < out.index.size(); ++j) {
      const auto& small = out.index[i];
      const auto& big = out.index[j];
      if (!face_leq(out.base1.faces[small.face1], out.base1.faces[big.face1])) continue;
      if (!face_leq(out.base2.faces[small.face2], out.base2.faces[big.face2])) continue;
      // Witness contractions from the big restriction to the small one.
      auto i1 = solve_unique_integer_mat(out.base1.faces[big.face1].inclusion.matrix,
                                         out.base1.faces[small.face1].inclusion.matrix);
      auto i2 = solve_unique_integer_mat(out.base2.faces[big.face2].inclusion.matrix,
                                         out.base2.faces[small.face2].inclusion.matrix);
      if (!i1 || !i2) throw std::logic_error("curve_pair_fiber: face inclusion not integral");
      ConeMorphism rel1{out.base1.faces[small.face1].as_cone, out.base1.faces[big.face1].as_cone, *i1};
      ConeMorphism rel2{out.base2.faces[small.face2].as_cone, out.base2.faces[big.face2].as_cone, *i2};
      PullbackResult s1 = pullback(rel1, r1[big.face1].curve);
      PullbackResult s2 = pullback(rel2, r2[big.face2].curve);
      if (!(s1.curve.graph == r1[small.face1].curve.graph) ||
          !(s2.curve.graph == r2[small.face2].curve.graph)) {
        throw std::logic_error("curve_pair_fiber: restriction mismatch");
      }
      auto ind = induced_iso(big.iso, s1.contraction, s2.contraction);
      if (!ind || !same_map(*ind, small.iso)) continue;
      // Matrix: solve big.embedding * X = blockdiag(i1, i2) * small.embedding.
      int nbig = out.base1.faces[big.face1].dim() + out.base2.faces[big.face2].dim();
      Mat block(nbig, small.embedding.cols);
      Mat top = mat_mul(*i1, [&] {
        Mat m(out.base1.faces[small.face1].dim(), small.embedding.cols);
        for (int r = 0; r < m.rows; ++r)
          for (int c = 0; c < m.cols; ++c) m.at(r, c) = small.embedding.at(r, c);
        return m;
      }());
      Mat bot = mat_mul(*i2, [&] {
        Mat m(out.base2.faces[small.face2].dim(), small.embedding.cols);
        for (int r = 0; r < m.rows; ++r)
          for (int c = 0; c < m.cols; ++c)
            m.at(r, c) = small.embedding.at(out.base1.faces[small.face1].dim() + r, c);
        return m;
      }());
      for (int r = 0; r < top.rows; ++r)
        for (int c = 0; c < top.cols; ++c) block.at(r, c) = top.at(r, c);
      for (int r = 0; r < bot.rows; ++r)
        for (int c = 0; c < bot.cols; ++c) block.at(top.rows + r, c) = bot.at(r, c);
      auto x = solve_unique_integer_mat(big.embedding, block);
      if (!x) throw std::logic_error("curve_pair_fiber: face matrix not integral");
      out.complex.add_arrow(static_cast<int>(i), static_cast<int>(j), *x);
    }
  }
  out.complex.close_thin();

  auto build_proj = [&](StackMorphism& sm, const FaceComplex& base, bool first_block) {
    sm.obj_map.resize(out.index.size());
    sm.cone_map.resize(out.index.size());
    for (size_t i = 0; i < out.index.size(); ++i) {
      const auto& t = out.index[i];
      int face = first_block ? t.face1 : t.face2;
      sm.obj_map[i] = face;
      int a1 = out.base1.faces[t.face1].dim();
      int off = first_block ? 0 : a1;
      int rows = first_block ? a1 : out.base2.faces[t.face2].dim();
      Mat m(rows, t.embedding.cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < m.cols; ++c) m.at(r, c) = t.embedding.at(off + r, c);
      sm.cone_map[i] = std::move(m);
    }
    sm.arrow_map.resize(out.complex.num_arrows());
    for (int a = 0; a < out.complex.num_arrows(); ++a) {
      int so = sm.obj_map[out.complex.arrows[a].src];
      int de = sm.obj_map[out.complex.arrows[a].dst];
      Mat want = mat_mul(sm.cone_map[out.complex.arrows[a].dst], out.complex.arrows[a].matrix);
      int found = -1;
      for (int b : base.complex.hom(so, de)) {
        if (mat_mul(base.complex.arrows[b].matrix, sm.cone_map[out.complex.arrows[a].src]) == want) {
          found = b;
        }
      }
      if (found < 0) throw std::logic_error("curve_pair_fiber: projection arrow missing");
      sm.arrow_map[a] = found;
    }
  };
  build_proj(out.proj1, out.base1, true);
  build_proj(out.proj2, out.base2, false);
  return out;
}

// ---------------------------------------------------------------------------

InitialFactorization initial_strict_factorization(const ConeStackData& target, int obj,
                                                  const ConeMorphism& f) {
  if (!(f.target == target.cones[obj])) {
    throw std::invalid_argument("initial_strict_factorization: target cone mismatch");
  }
  std::vector<Vec> images;
  for (const Vec& r : f.source.rays) images.push_back(f.apply(r));
  Face minimal = smallest_face_containing(target.cones[obj], images);
  for (int a = 0; a < target.num_arrows(); ++a) {
    if (target.arrows[a].dst != obj) continue;
    ConeMorphism am{target.cones[target.arrows[a].src], target.cones[obj], target.arrows[a].matrix};
    if (!is_face_morphism(am)) continue;
    if (image_rayset(target, target.arrows[a]) != minimal.ray_indices) continue;
    auto x = solve_unique_integer_mat(target.arrows[a].matrix, f.matrix);
    if (!x) throw std::logic_error("initial factorization not integral");
    return InitialFactorization{target.arrows[a].src, a,
                                ConeMorphism::make(f.source, target.cones[target.arrows[a].src], *x)};
  }
  throw std::logic_error("initial_strict_factorization: no face arrow realizes the minimal face");
}

// ---------------------------------------------------------------------------

namespace {

// All lattice isomorphisms carrying one cone onto another.
std::vector<Mat> cone_isos(const Cone& a, const Cone& b) {
  std::vector<Mat> out;
  if (a.rank != b.rank || a.rays.size() != b.rays.size() || a.facets.size() != b.facets.size()) {
    return out;
  }
  if (a.rank == 0) {
    out.push_back(Mat(0, 0));
    return out;
  }
  int k = static_cast<int>(a.rays.size());
  std::vector<int> perm(k, -1);
  std::vector<bool> used(k, false);
  Mat ra = Mat::from_columns(a.rank, a.rays);
  std::function<void(int)> rec = [&](int i) {
    if (i == k) {
      Mat rb(b.rank, k);
      for (int c = 0; c < k; ++c)
        for (int r = 0; r < b.rank; ++r) rb.at(r, c) = b.rays[perm[c]][r];
      // Solve M * ra = rb.
      auto mt = solve_unique_integer_mat(ra.transpose(), rb.transpose());
      if (!mt) return;
      Mat m = mt->transpose();
      if (!is_unimodular(m)) return;
      // The map must carry the cone onto the cone (rays onto rays suffices).
      out.push_back(std::move(m));
      return;
    }
    for (int j = 0; j < k; ++j) {
      if (used[j]) continue;
      perm[i] = j;
      used[j] = true;
      rec(i + 1);
      used[j] = false;
      perm[i] = -1;
    }
  };
  rec(0);
  // Deduplicate (distinct permutations give distinct matrices, but be safe).
  std::sort(out.begin(), out.end(), [](const Mat& x, const Mat& y) { return mat_key(x) < mat_key(y); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct EquivSearch {
  const ConeStackData& a;
  const ConeStackData& b;
  long long budget;
  std::vector<std::vector<std::pair<int, Mat>>> candidates;  // per a-object
  std::vector<int> obj_map;
  std::vector<Mat> cone_map;
  std::vector<int> arrow_map;
  std::vector<std::vector<int>> hom_a, hom_b;  // cached hom sets as counts

  EquivSearch(const ConeStackData& a_, const ConeStackData& b_, long long budget_)
      : a(a_), b(b_), budget(budget_) {}

  void spend() {
    if (--budget < 0) throw BudgetExceeded("equivalence search budget exhausted");
  }

  bool hom_counts_ok(int upto) {
    for (int x = 0; x <= upto; ++x) {
      for (int y = 0; y <= upto; ++y) {
        if (a.hom(x, y).size() != b.hom(obj_map[x], obj_map[y]).size()) return false;
      }
    }
    return true;
  }

  bool assign_arrows() {
    arrow_map.assign(a.num_arrows(), -1);
    std::vector<Mat> inv_cone(a.num_objects());
    for (int o = 0; o < a.num_objects(); ++o) inv_cone[o] = inverse_unimodular(cone_map[o]);
    // Required matrix per arrow; collect candidates.
    std::vector<std::vector<int>> cands(a.num_arrows());
    for (int i = 0; i < a.num_arrows(); ++i) {
      spend();
      const auto& ar = a.arrows[i];
      Mat want = mat_mul(cone_map[ar.dst], mat_mul(ar.matrix, inv_cone[ar.src]));
      for (int j : b.hom(obj_map[ar.src], obj_map[ar.dst])) {
        if (b.arrows[j].matrix == want) cands[i].push_back(j);
      }
      if (cands[i].empty()) return false;
    }
    // Backtrack with injectivity inside hom sets and functor laws.
    std::function<bool(int)> rec = [&](int i) -> bool {
      if (i == a.num_arrows()) return check_functor();
      spend();
      for (int j : cands[i]) {
        bool clash = false;
        for (int x = 0; x < i; ++x) {
          if (a.arrows[x].src == a.arrows[i].src && a.arrows[x].dst == a.arrows[i].dst &&
              arrow_map[x] == j) {
            clash = true;
            break;
          }
        }
        if (clash) continue;
        arrow_map[i] = j;
        if (rec(i + 1)) return true;
        arrow_map[i] = -1;
      }
      return false;
    };
    return rec(0);
  }

  bool check_functor() {
    for (int o = 0; o < a.num_objects(); ++o) {
      if (arrow_map[a.identity_arrow[o]] != b.identity_arrow[obj_map[o]]) return false;
    }
    for (const auto& [pair, comp] : a.composition) {
      auto [second, first] = pair;
      if (b.composition.at({arrow_map[second], arrow_map[first]}) != arrow_map[comp]) return false;
    }
    return true;
  }
};

// Invertible arrows of a category.
std::vector<std::pair<int, int>> invertible_pairs(const ConeCategory& cat) {
  std::vector<std::pair<int, int>> out;  // (arrow, inverse arrow)
  for (int i = 0; i < cat.num_arrows(); ++i) {
    int s = cat.arrows[i].src, d = cat.arrows[i].dst;
    for (int j : cat.hom(d, s)) {
      if (cat.composition.at({j, i}) == cat.identity_arrow[s] &&
          cat.composition.at({i, j}) == cat.identity_arrow[d]) {
        out.emplace_back(i, j);
      }
    }
  }
  return out;
}

}  // namespace

std::optional<EquivalenceWitness> equivalent(const ConeStackData& a, const ConeStackData& b,
                                             long long budget) {
  EquivSearch search(a, b, budget);
  search.candidates.resize(a.num_objects());
  for (int o = 0; o < a.num_objects(); ++o) {
    for (int p = 0; p < b.num_objects(); ++p) {
      if (a.hom(o, o).size() != b.hom(p, p).size()) continue;
      for (Mat& m : cone_isos(a.cones[o], b.cones[p])) {
        search.candidates[o].emplace_back(p, std::move(m));
      }
    }
    if (search.candidates[o].empty()) return std::nullopt;
  }
  search.obj_map.assign(a.num_objects(), -1);
  search.cone_map.assign(a.num_objects(), Mat());

  auto inv_pairs = invertible_pairs(b);

  std::optional<EquivalenceWitness> result;
  std::function<bool(int)> rec = [&](int o) -> bool {
    if (o == a.num_objects()) {
      // Essential surjectivity.
      std::vector<bool> covered(b.num_objects(), false);
      for (int x = 0; x < a.num_objects(); ++x) covered[search.obj_map[x]] = true;
      bool grew = true;
      while (grew) {
        grew = false;
        for (auto [i, j] : inv_pairs) {
          if (covered[b.arrows[i].src] && !covered[b.arrows[i].dst]) {
            covered[b.arrows[i].dst] = true;
            grew = true;
          }
        }
      }
      for (int y = 0; y < b.num_objects(); ++y) {
        if (!covered[y]) return false;
      }
      if (!search.assign_arrows()) return false;

      EquivalenceWitness w;
      w.forward.obj_map = search.obj_map;
      w.forward.cone_map = search.cone_map;
      w.forward.arrow_map = search.arrow_map;

      // Quasi-inverse: pick, per b-object, an a-preimage and a transporting
      // invertible arrow h : F(x) -> y.
      std::vector<int> pre(b.num_objects(), -1);
      std::vector<int> transport(b.num_objects(), -1);  // arrow F(pre[y]) -> y
      for (int x = 0; x < a.num_objects(); ++x) {
        int y = search.obj_map[x];
        if (pre[y] < 0) {
          pre[y] = x;
          transport[y] = b.identity_arrow[y];
        }
      }
      bool grew2 = true;
      while (grew2) {
        grew2 = false;
        for (auto [i, j] : inv_pairs) {
          int s = b.arrows[i].src, d = b.arrows[i].dst;
          if (pre[s] >= 0 && pre[d] < 0) {
            pre[d] = pre[s];
            transport[d] = b.composition.at({i, transport[s]});
            grew2 = true;
          }
        }
      }
      w.backward.obj_map.resize(b.num_objects());
      w.backward.cone_map.resize(b.num_objects());
      w.backward.arrow_map.resize(b.num_arrows());
      std::vector<int> transport_inv(b.num_objects(), -1);
      for (int y = 0; y < b.num_objects(); ++y) {
        w.backward.obj_map[y] = pre[y];
        // cone map: cone(y) -> cone(pre[y]) = cone_map[pre]^{-1} . mat(h)^{-1}
        Mat h = b.arrows[transport[y]].matrix;
        Mat m = mat_mul(inverse_unimodular(search.cone_map[pre[y]]), inverse_unimodular(h));
        w.backward.cone_map[y] = std::move(m);
        for (auto [i, j] : inv_pairs) {
          if (i == transport[y]) transport_inv[y] = j;
        }
      }
      for (int v = 0; v < b.num_arrows(); ++v) {
        int y = b.arrows[v].src, y2 = b.arrows[v].dst;
        // c = h2^{-1} . v . h1 : F(pre[y]) -> F(pre[y2]); G(v) = F^{-1}(c).
        int c = b.composition.at({transport_inv[y2], b.composition.at({v, transport[y]})});
        int found = -1;
        for (int u = 0; u < a.num_arrows(); ++u) {
          if (a.arrows[u].src == pre[y] && a.arrows[u].dst == pre[y2] && search.arrow_map[u] == c) {
            found = u;
          }
        }
        if (found < 0) return false;  // not full after all
        w.backward.arrow_map[v] = found;
      }
      result = std::move(w);
      return true;
    }
    search.spend();
    for (const auto& [p, m] : search.candidates[o]) {
      search.obj_map[o] = p;
      search.cone_map[o] = m;
      if (search.hom_counts_ok(o)) {
        if (rec(o + 1)) return true;
      }
    }
    search.obj_map[o] = -1;
    return false;
  };
  if (rec(0)) return result;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

ConeCategory disjoint_union(const std::vector<ConeCategory>& parts, std::vector<int>* offsets) {
  ConeCategory out;
  std::vector<int> arrow_offset;
  if (offsets) offsets->clear();
  for (const ConeCategory& p : parts) {
    int obj_off = out.num_objects();
    int arr_off = out.num_arrows();
    if (offsets) offsets->push_back(obj_off);
    for (const Cone& c : p.cones) out.cones.push_back(c);
    for (const auto& a : p.arrows) out.arrows.push_back({a.src + obj_off, a.dst + obj_off, a.matrix});
    for (int id : p.identity_arrow) out.identity_arrow.push_back(id + arr_off);
    for (const auto& [pair, comp] : p.composition) {
      out.composition[{pair.first + arr_off, pair.second + arr_off}] = comp + arr_off;
    }
  }
  return out;
}

QuotientResult quotient_cone_space(const ConeComplexData& complex,
                                   const std::vector<ConeRelation>& relations) {
  int n = complex.num_objects();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Mat> to_root(n);
  for (int i = 0; i < n; ++i) to_root[i] = Mat::identity(complex.cones[i].rank);

  std::function<int(int)> find = [&](int x) -> int {
    if (parent[x] == x) return x;
    int r = find(parent[x]);
    if (parent[x] != r) {
      to_root[x] = mat_mul(to_root[parent[x]], to_root[x]);
      parent[x] = r;
    }
    return r;
  };
  // find() with full transport composition:
  std::function<std::pair<int, Mat>(int)> find_t = [&](int x) -> std::pair<int, Mat> {
    int r = find(x);
    // After path compression parent[x] == r and to_root[x] maps into r,
    // except when x == r.
    if (x == r) return {r, Mat::identity(complex.cones[x].rank)};
    return {r, to_root[x]};
  };

  // Cached image raysets of face arrows, used to propagate relations.
  auto infos = arrow_face_infos(complex);

  std::set<std::string> seen;
  std::queue<ConeRelation> todo;
  auto push = [&](const ConeRelation& rel) {
    std::string key = std::to_string(rel.a) + ">" + std::to_string(rel.b) + ":" + mat_key(rel.matrix);
    if (seen.insert(key).second) todo.push(rel);
  };
  for (const ConeRelation& rel : relations) {
    push(rel);
    push({rel.b, rel.a, inverse_unimodular(rel.matrix)});
  }

  while (!todo.empty()) {
    ConeRelation rel = todo.front();
    todo.pop();
    // Unite rel.a and rel.b.
    auto [ra, ta] = find_t(rel.a);
    auto [rb, tb] = find_t(rel.b);
    Mat via = mat_mul(tb, rel.matrix);  // a -> rb
    if (ra == rb) {
      if (via != ta) {
        throw std::invalid_argument(
            "quotient_cone_space: relations generate a nontrivial stabilizer");
      }
    } else {
      parent[ra] = rb;
      to_root[ra] = mat_mul(via, inverse_unimodular(ta));
    }
    // Propagate to faces: for each face arrow into rel.a, transport it.
    for (int u = 0; u < complex.num_arrows(); ++u) {
      if (complex.arrows[u].dst != rel.a) continue;
      Mat img = mat_mul(rel.matrix, complex.arrows[u].matrix);
      std::vector<Vec> pts;
      for (const Vec& r : complex.cones[complex.arrows[u].src].rays) pts.push_back(mat_apply(img, r));
      Face f = smallest_face_containing(complex.cones[rel.b], pts);
      int target_arrow = -1;
      for (int v = 0; v < complex.num_arrows(); ++v) {
        if (complex.arrows[v].dst == rel.b && infos[v].face && infos[v].rayset == f.ray_indices) {
          target_arrow = v;
          break;
        }
      }
      if (target_arrow < 0) throw std::logic_error("quotient: no arrow realizes the image face");
      auto m = solve_unique_integer_mat(complex.arrows[target_arrow].matrix, img);
      if (!m) throw std::logic_error("quotient: face transport not integral");
      push({complex.arrows[u].src, complex.arrows[target_arrow].src, *m});
      push({complex.arrows[target_arrow].src, complex.arrows[u].src, inverse_unimodular(*m)});
    }
  }

  QuotientResult out;
  out.object_class.resize(n);
  out.transport.resize(n);
  std::map<int, int> root_to_obj;
  for (int i = 0; i < n; ++i) {
    auto [r, t] = find_t(i);
    if (!root_to_obj.count(r)) {
      root_to_obj[r] = out.stack.add_object(complex.cones[r]);
    }
    out.object_class[i] = root_to_obj[r];
    out.transport[i] = t;
  }
  // Arrows: transported, deduplicated by (src, dst, matrix) which is faithful
  // for cone spaces.
  std::map<std::tuple<int, int, std::string>, int> arrow_ids;
  for (int u = 0; u < complex.num_arrows(); ++u) {
    int s = complex.arrows[u].src, d = complex.arrows[u].dst;
    Mat m = mat_mul(out.transport[d], mat_mul(complex.arrows[u].matrix,
                                              inverse_unimodular(out.transport[s])));
    auto key = std::make_tuple(out.object_class[s], out.object_class[d], mat_key(m));
    if (!arrow_ids.count(key)) {
      arrow_ids[key] = out.stack.add_arrow(out.object_class[s], out.object_class[d], m);
    }
  }
  for (int o = 0; o < out.stack.num_objects(); ++o) {
    auto key = std::make_tuple(o, o, mat_key(Mat::identity(out.stack.cones[o].rank)));
    auto it = arrow_ids.find(key);
    if (it == arrow_ids.end()) throw std::logic_error("quotient: missing identity");
    out.stack.identity_arrow[o] = it->second;
  }
  for (int i = 0; i < out.stack.num_arrows(); ++i) {
    for (int j = 0; j < out.stack.num_arrows(); ++j) {
      if (out.stack.arrows[i].dst != out.stack.arrows[j].src) continue;
      Mat prod = mat_mul(out.stack.arrows[j].matrix, out.stack.arrows[i].matrix);
      auto key = std::make_tuple(out.stack.arrows[i].src, out.stack.arrows[j].dst, mat_key(prod));
      auto it = arrow_ids.find(key);
      if (it == arrow_ids.end()) throw std::logic_error("quotient: composition not closed");
      out.stack.set_composite(j, i, it->second);
    }
  }
  return out;
}

}  // namespace tropmod
