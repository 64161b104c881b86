#include "tropmod/io.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace tropmod {

namespace {

long long to_ll(const Int& x) {
  if (x > Int(std::numeric_limits<long long>::max()) ||
      x < Int(std::numeric_limits<long long>::min())) {
    throw std::invalid_argument("integer too large for serialization");
  }
  return static_cast<long long>(x);
}

Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (const Int& x : v) out.push_back(to_ll(x));
  return out;
}

Vec vec_from_json(const Json& j) {
  Vec out;
  for (const auto& x : j) out.push_back(Int(x.get<long long>()));
  return out;
}

Json mat_to_json(const Mat& m) {
  Json out;
  out["rows"] = m.rows;
  out["cols"] = m.cols;
  Json rows = Json::array();
  for (int r = 0; r < m.rows; ++r) rows.push_back(vec_to_json(m.row(r)));
  out["entries"] = rows;
  return out;
}

Mat mat_from_json(const Json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const Json& rows = j.at("entries");
  for (int r = 0; r < m.rows; ++r) {
    Vec row = vec_from_json(rows.at(r));
    for (int c = 0; c < m.cols; ++c) m.at(r, c) = row[c];
  }
  return m;
}

}  // namespace

Json cone_to_json(const Cone& c) {
  Json out;
  out["lattice_rank"] = c.rank;
  Json rays = Json::array();
  for (const Vec& r : c.rays) rays.push_back(vec_to_json(r));
  out["rays"] = rays;
  return out;
}

Cone cone_from_json(const Json& j) {
  int rank = j.at("lattice_rank").get<int>();
  std::vector<Vec> rays;
  for (const auto& r : j.at("rays")) rays.push_back(vec_from_json(r));
  return Cone::from_rays(rank, rays);
}

Json graph_to_json(const MarkedGraph& g) {
  Json out;
  Json vs = Json::array();
  for (int v = 0; v < g.num_vertices(); ++v) {
    vs.push_back(Json{{"id", v}, {"weight", g.weights[v]}});
  }
  out["vertices"] = vs;
  Json es = Json::array();
  for (int e = 0; e < g.num_edges(); ++e) {
    auto [u, w] = g.edge_endpoints(e);
    es.push_back(Json::array({u, w}));
  }
  out["edges"] = es;
  Json legs = Json::array();
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] == f) {
      legs.push_back(Json{{"label", g.flag_label[f]}, {"vertex", g.flag_vertex[f]}});
    }
  }
  out["legs"] = legs;
  return out;
}

MarkedGraph graph_from_json(const Json& j) {
  GraphBuilder b;
  std::map<int, int> id_map;
  for (const auto& v : j.at("vertices")) {
    id_map[v.at("id").get<int>()] = b.add_vertex(v.at("weight").get<int>());
  }
  for (const auto& e : j.at("edges")) {
    b.add_edge(id_map.at(e.at(0).get<int>()), id_map.at(e.at(1).get<int>()));
  }
  std::vector<std::pair<int, int>> legs;
  for (const auto& l : j.at("legs")) {
    legs.emplace_back(l.at("label").get<int>(), id_map.at(l.at("vertex").get<int>()));
  }
  std::sort(legs.begin(), legs.end());
  for (auto [label, v] : legs) b.add_leg(v, label);
  return b.build();
}

Json curve_to_json(const TropicalCurve& c) {
  Json out;
  out["cone"] = cone_to_json(c.base);
  out["graph"] = graph_to_json(c.graph);
  Json lengths = Json::object();
  for (int e = 0; e < c.graph.num_edges(); ++e) {
    lengths[std::to_string(e)] = vec_to_json(c.lengths[e]);
  }
  out["lengths"] = lengths;
  return out;
}

TropicalCurve curve_from_json(const Json& j) {
  Cone base = cone_from_json(j.at("cone"));
  MarkedGraph g = graph_from_json(j.at("graph"));
  std::vector<Vec> lengths(g.num_edges());
  for (const auto& [key, value] : j.at("lengths").items()) {
    int e = std::stoi(key);
    if (e < 0 || e >= g.num_edges()) throw std::invalid_argument("length for a missing edge");
    lengths[e] = vec_from_json(value);
  }
  return TropicalCurve::make(base, g, lengths);
}

Json degeneration_to_json(const NodalDegeneration& x) {
  Json out;
  out["cone"] = cone_to_json(x.base);
  Json comps = Json::array();
  for (size_t i = 0; i < x.component_genus.size(); ++i) {
    comps.push_back(Json{{"id", i}, {"genus", x.component_genus[i]}});
  }
  out["components"] = comps;
  Json nodes = Json::array();
  for (const auto& nd : x.nodes) {
    nodes.push_back(Json{{"a", nd.a}, {"b", nd.b}, {"delta", vec_to_json(nd.delta)}});
  }
  out["nodes"] = nodes;
  Json marks = Json::object();
  for (const auto& [label, c] : x.markings) marks[std::to_string(label)] = c;
  out["markings"] = marks;
  return out;
}

NodalDegeneration degeneration_from_json(const Json& j) {
  NodalDegeneration x;
  x.base = cone_from_json(j.at("cone"));
  std::map<int, int> id_map;
  for (const auto& c : j.at("components")) {
    id_map[c.at("id").get<int>()] = static_cast<int>(x.component_genus.size());
    x.component_genus.push_back(c.at("genus").get<int>());
  }
  for (const auto& nd : j.at("nodes")) {
    x.nodes.push_back({id_map.at(nd.at("a").get<int>()), id_map.at(nd.at("b").get<int>()),
                       vec_from_json(nd.at("delta"))});
  }
  for (const auto& [key, value] : j.at("markings").items()) {
    x.markings[std::stoi(key)] = id_map.at(value.get<int>());
  }
  x.validate();
  return x;
}

Json category_to_json(const ConeCategory& cat) {
  Json out;
  Json objs = Json::array();
  for (int o = 0; o < cat.num_objects(); ++o) {
    objs.push_back(Json{{"id", o}, {"cone", cone_to_json(cat.cones[o])}});
  }
  out["objects"] = objs;
  Json arrows = Json::array();
  for (int a = 0; a < cat.num_arrows(); ++a) {
    arrows.push_back(Json{{"id", a},
                          {"src", cat.arrows[a].src},
                          {"dst", cat.arrows[a].dst},
                          {"matrix", mat_to_json(cat.arrows[a].matrix)}});
  }
  out["arrows"] = arrows;
  out["identities"] = cat.identity_arrow;
  Json comp = Json::array();
  for (const auto& [pair, result] : cat.composition) {
    comp.push_back(Json::array({pair.first, pair.second, result}));
  }
  out["compose"] = comp;
  return out;
}

ConeCategory category_from_json(const Json& j) {
  ConeCategory cat;
  for (const auto& o : j.at("objects")) cat.add_object(cone_from_json(o.at("cone")));
  for (const auto& a : j.at("arrows")) {
    cat.add_arrow(a.at("src").get<int>(), a.at("dst").get<int>(), mat_from_json(a.at("matrix")));
  }
  if (j.contains("identities") && j.contains("compose")) {
    cat.identity_arrow = j.at("identities").get<std::vector<int>>();
    for (const auto& c : j.at("compose")) {
      cat.set_composite(c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>());
    }
  } else {
    // Arrows determined by (src, dst, matrix): derive the structure.
    cat.close_thin();
  }
  return cat;
}

Json morphism_to_json(const StackMorphism& m) {
  Json out;
  out["objects"] = m.obj_map;
  out["arrows"] = m.arrow_map;
  Json cones = Json::array();
  for (const Mat& cm : m.cone_map) cones.push_back(mat_to_json(cm));
  out["cone_maps"] = cones;
  return out;
}

std::string graph_to_dot(const MarkedGraph& g) {
  std::ostringstream out;
  out << "graph marked_graph {\n";
  for (int v = 0; v < g.num_vertices(); ++v) {
    out << "  v" << v << " [label=\"w=" << g.weights[v] << "\"];\n";
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    auto [u, w] = g.edge_endpoints(e);
    out << "  v" << u << " -- v" << w << " [label=\"e" << e << "\"];\n";
  }
  for (int f = 0; f < g.num_flags(); ++f) {
    if (g.flag_partner[f] != f) continue;
    out << "  leg" << g.flag_label[f] << " [shape=none, label=\"" << g.flag_label[f] << "\"];\n";
    out << "  v" << g.flag_vertex[f] << " -- leg" << g.flag_label[f] << " [style=dashed];\n";
  }
  out << "}\n";
  return out.str();
}

std::string category_to_dot(const ConeCategory& cat) {
  std::ostringstream out;
  out << "digraph cone_category {\n";
  for (int o = 0; o < cat.num_objects(); ++o) {
    out << "  c" << o << " [label=\"dim " << cat.cones[o].rank << "\"];\n";
  }
  for (int a = 0; a < cat.num_arrows(); ++a) {
    if (a == cat.identity_arrow[cat.arrows[a].src] && cat.arrows[a].src == cat.arrows[a].dst) {
      continue;  // suppress identities
    }
    out << "  c" << cat.arrows[a].src << " -> c" << cat.arrows[a].dst << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string universal_cone_to_dot(const UniversalCone& uc) {
  std::ostringstream out;
  out << "digraph universal_cone {\n";
  for (int o = 0; o < uc.presentation.num_objects(); ++o) {
    std::string role;
    for (size_t v = 0; v < uc.vertex_piece.size(); ++v) {
      if (uc.vertex_piece[v] == o) role = " vertex " + std::to_string(v);
    }
    for (size_t l = 0; l < uc.leg_piece.size(); ++l) {
      if (uc.leg_piece[l] == o) role = " leg " + std::to_string(l + 1);
    }
    for (size_t e = 0; e < uc.edge_piece.size(); ++e) {
      if (uc.edge_piece[e] == o) role = " edge " + std::to_string(e);
    }
    out << "  c" << o << " [label=\"dim " << uc.presentation.cones[o].rank << role
        << " | base dim " << uc.base.faces[uc.structure_map.obj_map[o]].dim() << "\"];\n";
  }
  for (int a = 0; a < uc.presentation.num_arrows(); ++a) {
    if (uc.presentation.arrows[a].src == uc.presentation.arrows[a].dst) continue;
    out << "  c" << uc.presentation.arrows[a].src << " -> c" << uc.presentation.arrows[a].dst
        << ";\n";
  }
  out << "}\n";
  return out.str();
}

ConeCategory full_subcategory(const ConeCategory& cat, const std::vector<int>& objects) {
  std::map<int, int> obj_map;
  ConeCategory out;
  for (int o : objects) {
    obj_map[o] = out.add_object(cat.cones[o]);
  }
  std::map<int, int> arrow_map;
  for (int a = 0; a < cat.num_arrows(); ++a) {
    if (!obj_map.count(cat.arrows[a].src) || !obj_map.count(cat.arrows[a].dst)) continue;
    arrow_map[a] =
        out.add_arrow(obj_map.at(cat.arrows[a].src), obj_map.at(cat.arrows[a].dst), cat.arrows[a].matrix);
  }
  for (int o : objects) out.identity_arrow[obj_map.at(o)] = arrow_map.at(cat.identity_arrow[o]);
  for (const auto& [pair, result] : cat.composition) {
    if (arrow_map.count(pair.first) && arrow_map.count(pair.second)) {
      out.set_composite(arrow_map.at(pair.first), arrow_map.at(pair.second), arrow_map.at(result));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical bytes for complexes of smooth cones.

namespace {

struct SmoothComplex {
  int n = 0;
  std::vector<int> rank;  // per object
  // Arrow matrices with all cones in ray coordinates: entries 0/1, columns
  // mapping source coordinates to target coordinates.
  struct Arr {
    int src, dst;
    std::vector<int> col_to_row;  // per source coordinate, the target coordinate
  };
  std::vector<Arr> arrows;
};

SmoothComplex normalize_smooth(const ConeCategory& cat) {
  SmoothComplex sc;
  sc.n = cat.num_objects();
  std::vector<Mat> basis(sc.n), inv(sc.n);
  for (int o = 0; o < sc.n; ++o) {
    const Cone& c = cat.cones[o];
    sc.rank.push_back(c.rank);
    if (static_cast<int>(c.rays.size()) != c.rank) {
      throw std::invalid_argument("canonical_complex_bytes: cone is not smooth");
    }
    Mat b = Mat::from_columns(c.rank, c.rays);
    if (c.rank > 0 && !is_unimodular(b)) {
      throw std::invalid_argument("canonical_complex_bytes: cone is not smooth");
    }
    basis[o] = b;
    auto binv = solve_unique_integer_mat(b, Mat::identity(c.rank));
    inv[o] = *binv;
  }
  for (int a = 0; a < cat.num_arrows(); ++a) {
    const auto& ar = cat.arrows[a];
    Mat m = mat_mul(inv[ar.dst], mat_mul(ar.matrix, basis[ar.src]));
    SmoothComplex::Arr out{ar.src, ar.dst, {}};
    // m maps ray coordinates to ray coordinates: one 1 per column.
    for (int c = 0; c < m.cols; ++c) {
      int row = -1;
      for (int r = 0; r < m.rows; ++r) {
        if (m.at(r, c) == 1 && row < 0) {
          row = r;
        } else if (m.at(r, c) != 0) {
          throw std::invalid_argument("canonical_complex_bytes: arrow is not a ray map");
        }
      }
      if (row < 0) throw std::invalid_argument("canonical_complex_bytes: arrow drops a ray");
      out.col_to_row.push_back(row);
    }
    sc.arrows.push_back(std::move(out));
  }
  return sc;
}

}  // namespace

std::string canonical_complex_bytes(const ConeCategory& cat) {
  SmoothComplex sc = normalize_smooth(cat);
  int n = sc.n;

  // Iterated color refinement on objects.
  std::vector<long> color(n);
  for (int o = 0; o < n; ++o) color[o] = sc.rank[o];
  for (int round = 0; round < n; ++round) {
    std::vector<std::pair<long, std::vector<std::pair<int, long>>>> sigs(n);
    for (int o = 0; o < n; ++o) {
      std::vector<std::pair<int, long>> inc;
      for (const auto& a : sc.arrows) {
        if (a.src == o) inc.push_back({0, color[a.dst]});
        if (a.dst == o) inc.push_back({1, color[a.src]});
      }
      std::sort(inc.begin(), inc.end());
      sigs[o] = {color[o], std::move(inc)};
    }
    std::map<std::pair<long, std::vector<std::pair<int, long>>>, long> order;
    for (int o = 0; o < n; ++o) order.emplace(sigs[o], 0);
    long id = 0;
    for (auto& [sig, val] : order) val = id++;
    bool changed = false;
    for (int o = 0; o < n; ++o) {
      long nc = order.at(sigs[o]);
      if (nc != color[o]) changed = true;
      color[o] = nc;
    }
    if (!changed) break;
  }

  // Backtracking over object orders (respecting colors) and per-object
  // coordinate permutations, minimizing the serialized byte string.
  std::string best;
  std::vector<int> pos(n, -1);       // object -> position
  std::vector<int> placed;           // position -> object
  std::vector<std::vector<int>> perm(n);  // per object, coordinate -> slot

  std::function<std::string()> serialize_placed = [&]() {
    // Serialize all arrows among placed objects, sorted.
    std::vector<std::string> lines;
    for (const auto& a : sc.arrows) {
      if (pos[a.src] < 0 || pos[a.dst] < 0) continue;
      std::string line = "a" + std::to_string(pos[a.src]) + ">" + std::to_string(pos[a.dst]) + ":";
      std::vector<std::pair<int, int>> cols;
      for (size_t c = 0; c < a.col_to_row.size(); ++c) {
        cols.push_back({perm[a.src][c], perm[a.dst][a.col_to_row[c]]});
      }
      std::sort(cols.begin(), cols.end());
      for (auto [c, r] : cols) line += std::to_string(c) + ">" + std::to_string(r) + ",";
      lines.push_back(std::move(line));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (int p = 0; p < static_cast<int>(placed.size()); ++p) {
      out += "O" + std::to_string(sc.rank[placed[p]]) + ";";
    }
    for (const std::string& l : lines) out += l + ";";
    return out;
  };

  std::function<void()> rec = [&]() {
    if (static_cast<int>(placed.size()) == n) {
      std::string s = serialize_placed();
      if (best.empty() || s < best) best = s;
      return;
    }
    // Candidates: minimal color among unplaced.
    long mincolor = 0;
    bool first = true;
    for (int o = 0; o < n; ++o) {
      if (pos[o] >= 0) continue;
      if (first || color[o] < mincolor) {
        mincolor = color[o];
        first = false;
      }
    }
    for (int o = 0; o < n; ++o) {
      if (pos[o] >= 0 || color[o] != mincolor) continue;
      pos[o] = static_cast<int>(placed.size());
      placed.push_back(o);
      // All coordinate permutations of this object.
      std::vector<int> p(sc.rank[o]);
      std::iota(p.begin(), p.end(), 0);
      do {
        perm[o] = p;
        rec();
      } while (std::next_permutation(p.begin(), p.end()));
      placed.pop_back();
      pos[o] = -1;
    }
  };
  rec();
  return best;
}

}  // namespace tropmod
