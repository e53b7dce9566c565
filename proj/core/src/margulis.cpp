#include "polyscal/margulis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace polyscal {

namespace {

constexpr double kSlack = 1e-9;
const double kInfD = std::numeric_limits<double>::infinity();

int space_dim(const SimplicialLengthComplex& x) {
  for (int d = kMaxDim; d >= 1; --d)
    if (x.cell_count(d) > 0) return d;
  return 0;
}

// ---------------------------------------------------------------------------
// Basepoint realization.

SimplicialLengthComplex split_edge_at(const SimplicialLengthComplex& x, int edge, double t,
                                      int* new_vertex) {
  ComplexBuilder b;
  for (int v = 0; v < x.vertex_count(); ++v) b.add_vertex(x.vertex_name(v));
  const int w = b.add_vertex("basepoint");
  for (int e = 0; e < x.cell_count(1); ++e) {
    const Cell& c = x.cell(1, e);
    if (e == edge) {
      b.add_edge(c.vertices[0], w, t * c.length);
      b.add_edge(w, c.vertices[1], (1.0 - t) * c.length);
    } else {
      b.add_edge(c.vertices[0], c.vertices[1], c.length, c.name);
    }
  }
  *new_vertex = w;
  return b.build();
}

// ---------------------------------------------------------------------------
// Loop scan: Dijkstra over (vertex, deck class) states of the cover skeleton.

struct LoopScan {
  std::vector<LoopClass> loops;
  bool truncated = false;
  bool undecided = false;
  double first_length = kInfD;  // shortest nontrivial loop settled
};

LoopScan loop_scan(const BasedSpace& bs, double cap, int max_states, bool stop_at_first) {
  const SimplicialLengthComplex& s = bs.complex;
  const QuotientOracle& oracle = *bs.oracle;
  LoopScan out;

  const std::string home_key = oracle.key(DeckWord::identity());
  struct StateData {
    double dist = kInfD;
    DeckWord word;
    bool settled = false;
  };
  std::map<std::pair<int, std::string>, StateData> states;
  using QueueEntry = std::tuple<double, int, std::string>;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue;

  states[{bs.basepoint, home_key}] = {0.0, DeckWord::identity(), false};
  queue.emplace(0.0, bs.basepoint, home_key);

  std::map<std::string, LoopClass> harvested;
  while (!queue.empty()) {
    const auto [dist, vertex, key] = queue.top();
    queue.pop();
    auto& data = states.at({vertex, key});
    if (data.settled || dist > data.dist + 1e-15) continue;
    if (dist > cap + kSlack) break;
    data.settled = true;

    if (vertex == bs.basepoint && key != home_key) {
      harvested.emplace(key, LoopClass{data.word, dist, bs.basepoint});
      out.first_length = std::min(out.first_length, dist);
      if (stop_at_first) break;
    }

    // cofacets(0, v) yields (edge, f) with v opposite corner f, so the far
    // endpoint sits at corner f and the edge runs forward when f == 1.
    for (const auto& [edge, slot] : s.cofacets(0, vertex)) {
      const Cell& c = s.cell(1, edge);
      const int other = c.vertices[slot];
      const double next_dist = dist + c.length;
      if (next_dist > cap + kSlack) continue;
      bool undecided = false;
      const DeckWord next_word = data.word.concat(bs.pres.edge_word(edge, slot == 1));
      const std::string next_key = oracle.key(next_word, &undecided);
      if (undecided) out.undecided = true;
      auto [it, inserted] = states.try_emplace({other, next_key});
      if (inserted && static_cast<int>(states.size()) > max_states) {
        states.erase(it);
        out.truncated = true;
        continue;
      }
      StateData& nd = it->second;
      if (next_dist < nd.dist - 1e-15 ||
          (next_dist < nd.dist + 1e-15 && shortlex_less(next_word, nd.word))) {
        if (!nd.settled) {
          nd.dist = std::min(nd.dist, next_dist);
          nd.word = next_word;
          queue.emplace(nd.dist, other, next_key);
        }
      }
    }
  }

  // Symmetric closure (inverse loops have the same realized length).
  std::vector<LoopClass> loops;
  for (const auto& [key, loop] : harvested) {
    (void)key;
    loops.push_back(loop);
  }
  for (const auto& [key, loop] : harvested) {
    (void)key;
    const DeckWord inv = loop.word.inverse();
    const std::string inv_key = oracle.key(inv);
    if (!harvested.count(inv_key)) loops.push_back(LoopClass{inv, loop.length, loop.basepoint});
  }
  std::sort(loops.begin(), loops.end(), [](const LoopClass& a, const LoopClass& b) {
    if (a.length != b.length) return a.length < b.length;
    return shortlex_less(a.word, b.word);
  });
  out.loops = std::move(loops);
  return out;
}

// ---------------------------------------------------------------------------
// Free-pair collision scan.

struct CollisionScan {
  bool free_ok = false;
  bool undecided = false;
  std::vector<std::int64_t> sizes;  // distinct orbit classes per word length
  std::string note;
};

std::string abstract_spelling(const DeckWord& w) {
  return w.to_string({"g1", "g2"});
}

// Checks that all freely reduced words over {a, b} up to `depth` name
// distinct deck classes. Collisions are sound identifications; a clean scan
// is conclusive for canonical oracles and labeled undecided otherwise.
CollisionScan collision_scan(const QuotientOracle& oracle, const DeckWord& a, const DeckWord& b,
                             int depth) {
  CollisionScan out;
  const DeckWord gens[4] = {a, a.inverse(), b, b.inverse()};
  const int abstract_letter[4] = {1, -1, 2, -2};

  struct Node {
    DeckWord word;      // composed deck word
    DeckWord abstract;  // reduced word over the pair alphabet
    int last = -1;      // generator index of the last letter
  };
  std::map<std::string, std::string> seen;  // oracle key -> abstract spelling
  bool undecided = false;
  seen[oracle.key(DeckWord::identity(), &undecided)] = "e";
  out.undecided |= undecided;
  out.sizes.push_back(1);

  std::vector<Node> frontier{{DeckWord::identity(), DeckWord::identity(), -1}};
  for (int w = 1; w <= depth; ++w) {
    std::vector<Node> next;
    for (const Node& node : frontier)
      for (int g = 0; g < 4; ++g) {
        if (node.last >= 0 && (g ^ 1) == node.last) continue;  // stay freely reduced
        Node child;
        child.word = node.word.concat(gens[g]);
        child.abstract = node.abstract.appended(abstract_letter[g]);
        child.last = g;
        const std::string key = oracle.key(child.word, &undecided);
        out.undecided |= undecided;
        const auto [it, inserted] = seen.emplace(key, abstract_spelling(child.abstract));
        if (!inserted) {
          std::ostringstream msg;
          msg << "collision at depth " << w << ": " << abstract_spelling(child.abstract)
              << " = " << it->second;
          out.note = msg.str();
          return out;
        }
        next.push_back(std::move(child));
      }
    out.sizes.push_back(static_cast<std::int64_t>(seen.size()));
    frontier = std::move(next);
  }
  out.free_ok = true;
  return out;
}

// Reduced words over the pair alphabet up to `depth`, composed as deck
// words, in deterministic BFS order (identity excluded).
std::vector<DeckWord> composed_words(const DeckWord& a, const DeckWord& b, int depth) {
  const DeckWord gens[4] = {a, a.inverse(), b, b.inverse()};
  struct Node {
    DeckWord word;
    int last = -1;
  };
  std::vector<DeckWord> out;
  std::vector<Node> frontier{{DeckWord::identity(), -1}};
  for (int w = 1; w <= depth; ++w) {
    std::vector<Node> next;
    for (const Node& node : frontier)
      for (int g = 0; g < 4; ++g) {
        if (node.last >= 0 && (g ^ 1) == node.last) continue;
        Node child{node.word.concat(gens[g]), g};
        out.push_back(child.word);
        next.push_back(std::move(child));
      }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Based spaces and loops.

BasedSpace based_space(const SimplicialLengthComplex& x, const MetricPoint& p, OracleKind kind,
                       int closure_depth) {
  const MetricPoint q = canonical_point(x, p);
  BasedSpace bs;
  bs.original = q;
  if (q.dim == 0) {
    bs.complex = x;
    bs.basepoint = q.cell;
  } else if (q.dim == 1) {
    if (!x.cofacets(1, q.cell).empty())
      throw std::invalid_argument(
          "based_space: an edge-interior basepoint requires the edge to bound no 2-cells");
    bs.complex = split_edge_at(x, q.cell, q.bary[1], &bs.basepoint);
  } else {
    throw std::invalid_argument("based_space: basepoint must be a vertex or an edge point");
  }
  bs.pres = presentation(bs.complex, bs.basepoint);
  bs.oracle = make_oracle(bs.pres, kind, closure_depth);
  return bs;
}

ShortLoopReport short_loops(const BasedSpace& bs, double L, const ShortLoopOptions& opts) {
  if (!(L > 0.0)) throw std::invalid_argument("short_loops: the length bound must be positive");
  LoopScan scan = loop_scan(bs, L, opts.max_states, false);
  ShortLoopReport rep;
  rep.loops = std::move(scan.loops);
  rep.truncated = scan.truncated;
  rep.undecided = scan.undecided;
  return rep;
}

double sys_function(const SimplicialLengthComplex& x, const MetricPoint& p, OracleKind kind,
                    const ShortLoopOptions& opts) {
  const BasedSpace bs = based_space(x, p, kind);
  const LoopScan scan = loop_scan(bs, kInfD, opts.max_states, true);
  if (scan.first_length < kInfD) return scan.first_length;
  // A truncated scan cannot certify that no loop exists.
  if (scan.truncated)
    throw std::runtime_error("sys_function: state budget exhausted before a loop was found");
  return kInfD;
}

// ---------------------------------------------------------------------------
// Growth.

GrowthReport growth(const std::vector<LoopClass>& S, int depth, const QuotientOracle& oracle,
                    const GrowthOptions& opts) {
  if (depth < 0) throw std::invalid_argument("growth: depth must be nonnegative");
  GrowthReport rep;

  // Symmetrize and deduplicate the generators; drop identity elements.
  bool undecided = false;
  const std::string home_key = oracle.key(DeckWord::identity(), &undecided);
  std::map<std::string, DeckWord> gens;
  for (const LoopClass& loop : S)
    for (const DeckWord& w : {loop.word, loop.word.inverse()}) {
      const std::string key = oracle.key(w, &undecided);
      if (key == home_key) continue;
      gens.emplace(key, w);
    }

  std::set<std::string> visited{home_key};
  std::vector<DeckWord> frontier{DeckWord::identity()};
  rep.ball_sizes.push_back(1);
  for (int w = 1; w <= depth && !frontier.empty(); ++w) {
    std::vector<DeckWord> next;
    for (const DeckWord& f : frontier)
      for (const auto& [gkey, g] : gens) {
        (void)gkey;
        const DeckWord p = f.concat(g);
        const std::string key = oracle.key(p, &undecided);
        if (visited.insert(key).second) next.push_back(p);
      }
    rep.ball_sizes.push_back(static_cast<std::int64_t>(visited.size()));
    frontier = std::move(next);
    if (static_cast<std::int64_t>(visited.size()) > opts.state_budget) {
      rep.truncated = true;
      break;
    }
  }
  rep.undecided = undecided;
  rep.depth = static_cast<int>(rep.ball_sizes.size()) - 1;

  const auto& s = rep.ball_sizes;
  const int d = rep.depth;
  if (undecided) {
    rep.verdict = GrowthClass::kUndetermined;
    return rep;
  }
  if (s[d] == 1) {  // trivial subgroup: sizes are all one
    rep.verdict = GrowthClass::kSubexponential;
    return rep;
  }
  if (d < 2) {
    rep.verdict = GrowthClass::kUndetermined;
    return rep;
  }

  const int window = std::max(1, std::min(opts.window, d - 1));
  const auto logsize = [&](int w) { return std::log(static_cast<double>(s[w])); };
  rep.rate = (logsize(d) - logsize(d - window)) / window;

  double min_step = kInfD;
  for (int w = d - window + 1; w <= d; ++w)
    min_step = std::min(min_step, logsize(w) - logsize(w - 1));
  if (min_step >= opts.exponential_threshold - 1e-12) {
    rep.verdict = GrowthClass::kExponential;
    return rep;
  }

  // Power-law fit through the trailing window, anchored at the last point.
  const double span = std::log(static_cast<double>(d)) - std::log(static_cast<double>(d - window));
  rep.fitted_degree = span > 0.0 ? (logsize(d) - logsize(d - window)) / span : 0.0;
  double residual = 0.0;
  for (int w = d - window; w <= d; ++w) {
    const double predicted =
        logsize(d) + rep.fitted_degree *
                         (std::log(static_cast<double>(w)) - std::log(static_cast<double>(d)));
    residual = std::max(residual, std::abs(logsize(w) - predicted));
  }
  const double last_step = logsize(d) - logsize(d - 1);
  if (residual <= opts.residual_tol && last_step < opts.exponential_threshold)
    rep.verdict = GrowthClass::kSubexponential;
  else
    rep.verdict = GrowthClass::kUndetermined;
  return rep;
}

// ---------------------------------------------------------------------------
// Margulis function.

MargulisEstimate margulis_function(const SimplicialLengthComplex& x, const MetricPoint& p,
                                   OracleKind kind, int depth, const std::vector<double>& mu_grid,
                                   const GrowthOptions& opts, const ShortLoopOptions& loop_opts) {
  if (mu_grid.empty() || !std::is_sorted(mu_grid.begin(), mu_grid.end()) ||
      mu_grid.front() <= 0.0)
    throw std::invalid_argument("margulis_function: the scale grid must be positive increasing");
  const BasedSpace bs = based_space(x, p, kind);
  const ShortLoopReport all = short_loops(bs, mu_grid.back(), loop_opts);

  MargulisEstimate est;
  est.x = p;
  est.depth = depth;
  est.grid = mu_grid;
  for (double mu : mu_grid) {
    std::vector<LoopClass> S;
    for (const LoopClass& loop : all.loops) {
      if (loop.length > mu + kSlack) break;
      S.push_back(loop);
    }
    const GrowthReport rep = growth(S, depth, *bs.oracle, opts);
    est.verdicts.push_back(rep.verdict);
    if (rep.verdict != GrowthClass::kUndetermined) est.determined = true;
  }
  for (std::size_t i = 0; i < mu_grid.size(); ++i)
    if (est.verdicts[i] == GrowthClass::kExponential) {
      est.upper = mu_grid[i];
      break;
    }
  for (std::size_t i = 0; i < mu_grid.size(); ++i)
    if (est.verdicts[i] == GrowthClass::kSubexponential && mu_grid[i] < est.upper)
      est.lower = mu_grid[i];
  return est;
}

// ---------------------------------------------------------------------------
// Free pairs.

FreePairSearch find_free_pair(const SimplicialLengthComplex& x, const MetricPoint& p,
                              double kappa, double mu0, OracleKind kind,
                              const FreePairOptions& opts) {
  if (kappa < 1.0) throw std::invalid_argument("find_free_pair: kappa must be at least 1");
  if (!(mu0 > 0.0)) throw std::invalid_argument("find_free_pair: mu0 must be positive");
  FreePairSearch out;
  out.based = based_space(x, p, kind, opts.closure_depth);
  const double bound = 2.0 * kappa * mu0;

  FreePairCertificate& cert = out.certificate;
  cert.displacement_bound = bound;
  cert.witness_depth = opts.witness_depth;

  const ShortLoopReport loops = short_loops(out.based, bound);
  cert.undecided = loops.undecided;
  if (loops.loops.size() < 2) {
    cert.note = "fewer than two loop classes of length at most " + std::to_string(bound);
    return out;
  }

  // Pairs ordered by combined length, then discovery order.
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < loops.loops.size(); ++i)
    for (std::size_t j = i + 1; j < loops.loops.size(); ++j)
      pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    const double la = loops.loops[a.first].length + loops.loops[a.second].length;
    const double lb = loops.loops[b.first].length + loops.loops[b.second].length;
    return la < lb;
  });
  if (static_cast<int>(pairs.size()) > opts.max_pairs) pairs.resize(opts.max_pairs);

  std::string last_note = "no candidate pairs";
  for (const auto& [i, j] : pairs) {
    const CollisionScan scan = collision_scan(*out.based.oracle, loops.loops[i].word,
                                              loops.loops[j].word, opts.witness_depth);
    cert.undecided |= scan.undecided;
    if (!scan.free_ok) {
      last_note = scan.note;
      continue;
    }
    cert.found = true;
    cert.alpha1 = loops.loops[i];
    cert.alpha2 = loops.loops[j];
    cert.displacement = std::max(loops.loops[i].length, loops.loops[j].length);
    cert.orbit_sizes = scan.sizes;
    break;
  }
  if (!cert.found) {
    cert.note = "not found at budget: " + last_note;
    return out;
  }

  const double radius = opts.patch_radius > 0.0
                            ? opts.patch_radius
                            : std::max(2.0 * mu0, bound) + x.max_edge_length() + 0.1;
  out.patch = build_cover(out.based.complex, out.based.oracle, radius);
  return out;
}

FreePairCertificate minimize_orbit(const FreePairCertificate& cert, const CoverPatch& patch,
                                   double mu0, int power_budget) {
  FreePairCertificate out = cert;
  if (!cert.found) {
    out.note = "no certificate to minimize";
    return out;
  }
  if (!(mu0 > 0.0)) throw std::invalid_argument("minimize_orbit: mu0 must be positive");
  const QuotientOracle& oracle = *patch.oracle();
  const int base_vertex = patch.vertex_info(patch.basepoint_vertex()).base_vertex;
  const bool absent_is_far = patch.safe_radius() >= mu0 - 1e-12;
  const auto orbit_distance = [&](const DeckWord& w) -> std::optional<double> {
    const int v = patch.find_vertex(base_vertex, w);
    if (v < 0) return std::nullopt;
    return patch.vertex_info(v).skeleton_distance;
  };

  for (int round = 0; round < 16; ++round) {
    // Smallest displacement among nontrivial orbit words strictly inside
    // B(x0, mu0).
    std::optional<DeckWord> inside;
    double inside_dist = kInfD;
    bool inconclusive = false;
    for (const DeckWord& w : composed_words(out.alpha1.word, out.alpha2.word,
                                            out.witness_depth)) {
      if (oracle.trivial(w)) continue;
      const auto d = orbit_distance(w);
      if (!d) {
        if (!absent_is_far) inconclusive = true;
        continue;
      }
      if (*d < mu0 - 1e-12 && *d < inside_dist) {
        inside_dist = *d;
        inside = w;
      }
    }
    if (!inside) {
      if (inconclusive) {
        out.note = "patch too small to certify a clean orbit";
        return out;
      }
      out.minimized = true;
      return out;
    }

    // Smallest escaping power of the offending element.
    DeckWord power = *inside;
    int k = 1;
    std::optional<double> power_dist = inside_dist;
    bool escaped = false;
    while (k < power_budget) {
      power = power.concat(*inside);
      ++k;
      power_dist = orbit_distance(power);
      if (!power_dist) {
        if (absent_is_far) escaped = true;
        break;
      }
      if (*power_dist >= mu0 - 1e-12) {
        escaped = true;
        break;
      }
    }
    if (!escaped) {
      out.note = "no escaping power within budget";
      return out;
    }
    LoopClass replacement;
    replacement.word = power;
    replacement.length = power_dist ? *power_dist : patch.safe_radius();
    replacement.basepoint = out.alpha1.basepoint;

    bool replaced = false;
    for (const LoopClass& keep : {out.alpha1, out.alpha2}) {
      const CollisionScan scan =
          collision_scan(oracle, keep.word, replacement.word, out.witness_depth);
      out.undecided |= scan.undecided;
      if (!scan.free_ok) continue;
      std::ostringstream note;
      note << (out.note.empty() ? "" : out.note + "; ") << "replaced a displacement-"
           << inside_dist << " element by its power k=" << k;
      out.note = note.str();
      out.alpha1 = keep;
      out.alpha2 = replacement;
      out.displacement = std::max(out.alpha1.length, out.alpha2.length);
      out.orbit_sizes = scan.sizes;
      replaced = true;
      break;
    }
    if (!replaced) {
      out.note += (out.note.empty() ? "" : "; ");
      out.note += "re-certification failed after replacement";
      return out;
    }
  }
  out.note += (out.note.empty() ? "" : "; ");
  out.note += "replacement budget exhausted";
  return out;
}

OrbitCheck orbit_disjointness(const FreePairCertificate& cert, const CoverPatch& patch,
                              double mu0, int depth) {
  OrbitCheck check;
  check.depth = depth;
  if (!cert.found) return check;
  const QuotientOracle& oracle = *patch.oracle();
  const int base_vertex = patch.vertex_info(patch.basepoint_vertex()).base_vertex;
  const bool absent_is_far = patch.safe_radius() >= mu0 - 1e-12;

  // Pairwise ball centers w1*x0, w2*x0 are mu0 apart iff every nontrivial
  // word of length <= 2*depth (in the pair alphabet) displaces the basepoint
  // by at least mu0.
  const DeckWord gens[4] = {cert.alpha1.word, cert.alpha1.word.inverse(), cert.alpha2.word,
                            cert.alpha2.word.inverse()};
  struct Node {
    DeckWord word;
    int last = -1;
  };
  std::set<int> seen;
  bool all_far = true;
  std::vector<Node> frontier{{DeckWord::identity(), -1}};
  for (int w = 1; w <= 2 * depth; ++w) {
    std::vector<Node> next;
    for (const Node& node : frontier)
      for (int g = 0; g < 4; ++g) {
        if (node.last >= 0 && (g ^ 1) == node.last) continue;
        Node child{node.word.concat(gens[g]), g};
        if (oracle.trivial(child.word)) {
          check.min_displacement = 0.0;  // a relation: two centers coincide
          all_far = false;
        } else if (const int v = patch.find_vertex(base_vertex, child.word); v < 0) {
          if (!absent_is_far) check.complete = false;
        } else {
          const double d = patch.vertex_info(v).skeleton_distance;
          check.min_displacement = std::min(check.min_displacement, d);
          if (d < mu0 - 1e-9) all_far = false;
          if (w <= depth) seen.insert(v);
        }
        next.push_back(std::move(child));
      }
    frontier = std::move(next);
  }
  check.points = static_cast<int>(seen.size()) + 1;  // orbit points probed, plus x0
  check.disjoint = all_far && check.complete;
  return check;
}

// ---------------------------------------------------------------------------
// Exponential ball bound.

double exponential_ball_bound(int n, double mu0, double kappa, double r) {
  if (n < 1) throw std::invalid_argument("exponential_ball_bound: n must be at least 1");
  if (!(mu0 > 0.0) || !(kappa > 0.0))
    throw std::invalid_argument("exponential_ball_bound: mu0 and kappa must be positive");
  if (r < mu0 / 2.0 - 1e-12) throw std::domain_error("exponential_ball_bound: below lemma domain");
  const ConstantsTable ct = constants(n);
  const double steps = std::floor((r - mu0 / 2.0) / (2.0 * kappa * mu0));
  return ct.c / std::pow(2.0, n) * std::pow(mu0, n) * (std::pow(3.0, steps) - 1.0);
}

// ---------------------------------------------------------------------------
// Theorem 3.5 pipeline.

namespace {

std::vector<double> default_mu_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(0.25 * i);
  return grid;
}

double scale_estimate(const MargulisEstimate& est) {
  if (est.lower > 0.0) return est.lower;
  if (est.upper < kInfD) return est.upper;
  return est.grid.empty() ? 0.0 : est.grid.front();
}

}  // namespace

Theorem35Report theorem35_experiment(const SimplicialLengthComplex& x, OracleKind kind,
                                     double kappa, const Theorem35Budgets& budgets) {
  Theorem35Report rep;
  rep.n = space_dim(x);
  rep.kappa = kappa;
  const ConstantsTable ct = constants(rep.n);
  const std::vector<double> mu_grid =
      budgets.mu_grid.empty() ? default_mu_grid() : budgets.mu_grid;

  // Margulis stage: estimates at every vertex when affordable, else a
  // constant lower envelope over sampled vertices.
  const int nv = x.vertex_count();
  const int cap = std::max(budgets.basepoint_samples, 8);
  const bool pointwise = nv <= cap;
  const int stride = pointwise ? 1 : std::max(1, nv / budgets.basepoint_samples);
  std::vector<int> samples;
  for (int v = 0; v < nv; v += stride) samples.push_back(v);

  rep.sys = sys_function(x, MetricPoint::vertex(samples.front()), kind, budgets.loops);
  if (rep.sys == kInfD) {
    rep.obstruction = "no nontrivial loops";
    return rep;
  }

  std::vector<double> estimates;
  for (int v : samples) {
    rep.sampled.push_back(margulis_function(x, MetricPoint::vertex(v), kind,
                                            budgets.growth_depth, mu_grid, budgets.growth,
                                            budgets.loops));
    estimates.push_back(scale_estimate(rep.sampled.back()));
  }
  rep.mu_hat = *std::max_element(estimates.begin(), estimates.end());
  if (!(rep.mu_hat > 0.0)) {
    rep.obstruction = "margulis estimate degenerate";
    return rep;
  }

  // Collapse stage at rho = mu_hat / 2 (pointwise when estimated everywhere).
  ScaleFunction rho;
  if (pointwise) {
    rho.vertex_values.assign(nv, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i)
      rho.vertex_values[samples[i]] = 0.5 * estimates[i];
    // Half of a 2-Lipschitz function, but the grid quantization can steepen
    // it; declare the measured edge slope.
    rho.lipschitz = 1.0;
    for (int e = 0; e < x.cell_count(1); ++e) {
      const Cell& c = x.cell(1, e);
      if (c.length <= 0.0) continue;
      const double slope =
          std::abs(rho.vertex_values[c.vertices[0]] - rho.vertex_values[c.vertices[1]]) /
          c.length;
      rho.lipschitz = std::max(rho.lipschitz, slope);
    }
  } else {
    rho = ScaleFunction::constant(x, 0.5 * *std::min_element(estimates.begin(), estimates.end()));
  }
  const CollapseOutcome sweep = dichotomy_sweep(x, rho, budgets.sweep);
  rep.sweep_tag = sweep.tag;
  rep.certificate = sweep.certificate;
  rep.fat_point = sweep.fat_point;

  if (sweep.tag == OutcomeTag::kCertificate) {
    const FreePairSearch fp =
        find_free_pair(x, MetricPoint::vertex(samples.front()), kappa, rep.mu_hat, kind,
                       FreePairOptions{budgets.witness_depth});
    rep.pair = fp.certificate;
    rep.obstruction = "space collapses at half the estimate; free pair: " +
                      (fp.certificate.found ? std::string("found") : fp.certificate.note);
    return rep;
  }
  if (sweep.tag == OutcomeTag::kInconclusive) {
    rep.obstruction = "collapse sweep inconclusive";
    return rep;
  }

  // Free-pair stage at the fat point. Points that cannot serve as a
  // basepoint (cell interiors, edge points on 2-complexes) are snapped to
  // the heaviest corner of their carrier cell; the estimate moves by at most
  // 2 * max_edge_length by the Lipschitz bound.
  MetricPoint x0 = rep.fat_point->point;
  const bool vertex_ok = x0.dim == 0 || (x0.dim == 1 && x.cofacets(1, x0.cell).empty());
  if (!vertex_ok) {
    const Cell& carrier = x.cell(x0.dim, x0.cell);
    int best = 0;
    for (int i = 1; i <= x0.dim; ++i)
      if (x0.bary[i] > x0.bary[best]) best = i;
    x0 = MetricPoint::vertex(carrier.vertices[best]);
    rep.notes = "fat point snapped to the nearest vertex for the loop stage; ";
  }
  MargulisEstimate at_fat;
  try {
    at_fat = margulis_function(x, x0, kind, budgets.growth_depth, mu_grid, budgets.growth,
                               budgets.loops);
  } catch (const std::invalid_argument& err) {
    rep.obstruction = std::string("fat point basepoint unsupported: ") + err.what();
    return rep;
  }
  rep.sampled.push_back(at_fat);
  rep.mu0 = at_fat.upper < kInfD ? at_fat.upper : scale_estimate(at_fat);
  if (!(rep.mu0 > 0.0)) {
    rep.obstruction = "margulis estimate degenerate at the fat point";
    return rep;
  }

  std::vector<double> r_grid = budgets.r_grid;
  if (r_grid.empty()) {
    r_grid.push_back(rep.mu0 / 2.0);
    for (double r = 1.5; r <= 4.51; r += 1.0)
      if (r > rep.mu0 / 2.0) r_grid.push_back(r);
  }
  FreePairOptions fp_opts;
  fp_opts.witness_depth = budgets.witness_depth;
  fp_opts.patch_radius = budgets.patch_radius > 0.0
                             ? budgets.patch_radius
                             : std::max({r_grid.back(), 2.0 * kappa * rep.mu0, 2.0 * rep.mu0}) +
                                   2.0 * x.max_edge_length() + 0.3;
  FreePairSearch fp = find_free_pair(x, x0, kappa, rep.mu0, kind, fp_opts);
  if (!fp.certificate.found) {
    rep.pair = fp.certificate;
    rep.obstruction = "no free pair: " + fp.certificate.note;
    return rep;
  }
  rep.pair = minimize_orbit(fp.certificate, *fp.patch, rep.mu0);
  rep.orbit = orbit_disjointness(*rep.pair, *fp.patch,  rep.mu0,
                                 std::min(budgets.witness_depth, 3));

  // Ball comparison stage. The space-form cap needs a scalar curvature
  // normalization, so it only exists from dimension two up.
  const bool cap_defined = rep.n >= 2;
  if (cap_defined) {
    const AdmissibleC adm = admissible_growth_constant(rep.n, kappa, rep.mu0);
    rep.admissible_c = adm.value;
    rep.admissible_found = adm.found;
  }
  rep.bounds_hold = true;
  for (double r : r_grid) {
    if (r > fp.patch->safe_radius() + 1e-12) continue;
    BallComparisonRow row;
    row.r = r;
    row.measured = cover_ball_volume(*fp.patch, r);
    row.lower_bound = ct.c * std::pow(std::min(r, rep.mu0 / 2.0), rep.n);
    if (r >= rep.mu0 / 2.0 - 1e-12)
      row.lower_bound =
          std::max(row.lower_bound, exponential_ball_bound(rep.n, rep.mu0, kappa, r));
    if (cap_defined)
      row.spaceform_cap =
          spaceform_ball_volume(rep.n, -static_cast<double>(rep.n) * (rep.n - 1),
                                rep.admissible_c * r);
    row.lower_ok = row.measured.value >= row.lower_bound - row.measured.half_width - 1e-9;
    row.cap_ok = !cap_defined ||
                 row.measured.value >= row.spaceform_cap - row.measured.half_width - 1e-9;
    rep.bounds_hold = rep.bounds_hold && row.lower_ok;
    rep.rows.push_back(row);
  }
  if (!cap_defined) rep.notes += "space-form cap undefined in dimension one; ";

  // Volume normalization and the scale bound at r = mu0 / 2.
  rep.total_volume = x.total_measure();
  rep.mu0_bound_derived = std::pow(2.0, rep.n) / ct.c * rep.total_volume;
  rep.mu0_bound_printed = std::pow(2.0, rep.n) * ct.c * rep.total_volume;
  rep.mu0_within_derived = std::pow(rep.mu0, rep.n) <= rep.mu0_bound_derived + 1e-12;
  rep.delta_n = ct.delta;
  rep.lambda_rescale = std::pow(rep.delta_n / rep.total_volume, 1.0 / rep.n);
  rep.notes +=
      "scale bound uses the derived form mu0^n <= (2^n/c_n) H_n; the printed form "
      "2^n c_n H_n differs by a factor c_n^2 and is reported alongside";
  if (cap_defined && !rep.admissible_found)
    rep.notes += "; no admissible growth constant on the search grid";
  return rep;
}

}  // namespace polyscal
