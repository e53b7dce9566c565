#include "polyscal/cover.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace polyscal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int letter_of(int gen, bool inverse) { return inverse ? -(gen + 1) : (gen + 1); }

// Alphabet order for shortlex: g0 < g0^-1 < g1 < g1^-1 < ...
int letter_rank(int letter) { return 2 * (std::abs(letter) - 1) + (letter < 0 ? 1 : 0); }

int patch_dimension(const SimplicialLengthComplex& x) {
  const int n = x.dimension();
  for (const CellRef& t : x.top_cells())
    if (t.dim != n)
      throw std::invalid_argument("cover construction requires a pure-dimensional complex");
  return n;
}

std::string serialize_word(const DeckWord& w) {
  std::string s;
  for (int l : w.letters) {
    s += std::to_string(l);
    s += '.';
  }
  return s;
}

}  // namespace

DeckWord DeckWord::generator(int g, bool inverse) {
  DeckWord w;
  w.letters.push_back(letter_of(g, inverse));
  return w;
}

DeckWord free_reduce(const DeckWord& w) {
  DeckWord out;
  out.letters.reserve(w.letters.size());
  for (int l : w.letters) {
    if (!out.letters.empty() && out.letters.back() == -l)
      out.letters.pop_back();
    else
      out.letters.push_back(l);
  }
  return out;
}

DeckWord DeckWord::inverse() const {
  DeckWord out;
  out.letters.reserve(letters.size());
  for (auto it = letters.rbegin(); it != letters.rend(); ++it) out.letters.push_back(-*it);
  return out;
}

DeckWord DeckWord::concat(const DeckWord& other) const {
  DeckWord out = *this;
  for (int l : other.letters) {
    if (!out.letters.empty() && out.letters.back() == -l)
      out.letters.pop_back();
    else
      out.letters.push_back(l);
  }
  return out;
}

DeckWord DeckWord::appended(int letter) const {
  DeckWord out = *this;
  if (!out.letters.empty() && out.letters.back() == -letter)
    out.letters.pop_back();
  else
    out.letters.push_back(letter);
  return out;
}

std::string DeckWord::to_string(const std::vector<std::string>& names) const {
  if (letters.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    if (i) s += ' ';
    const int g = std::abs(letters[i]) - 1;
    if (g < static_cast<int>(names.size()) && !names[g].empty())
      s += names[g];
    else
      s += "g" + std::to_string(g);
    if (letters[i] < 0) s += "^-1";
  }
  return s;
}

bool shortlex_less(const DeckWord& a, const DeckWord& b) {
  if (a.letters.size() != b.letters.size()) return a.letters.size() < b.letters.size();
  for (std::size_t i = 0; i < a.letters.size(); ++i) {
    const int ra = letter_rank(a.letters[i]);
    const int rb = letter_rank(b.letters[i]);
    if (ra != rb) return ra < rb;
  }
  return false;
}

DeckWord Presentation::edge_word(int edge, bool forward) const {
  const int g = edge_generator.at(edge);
  if (g < 0) return {};
  return DeckWord::generator(g, !forward);
}

Presentation presentation(const SimplicialLengthComplex& x, int basepoint) {
  if (!x.connected()) throw std::invalid_argument("presentation requires a connected complex");
  if (basepoint < 0 || basepoint >= x.vertex_count())
    throw std::out_of_range("basepoint out of range");
  const int V = x.vertex_count();
  const int E = x.cell_count(1);

  // Incidence lists; entries appear in increasing edge order.
  std::vector<std::vector<std::pair<int, int>>> inc(V);
  for (int e = 0; e < E; ++e) {
    const auto& c = x.cell(1, e);
    const int t = c.vertices[0];
    const int h = c.vertices[1];
    inc[t].push_back({e, h});
    if (h != t) inc[h].push_back({e, t});
  }

  Presentation pres;
  pres.basepoint = basepoint;
  pres.tree_parent.assign(V, -1);
  pres.tree_parent_edge.assign(V, -1);
  pres.edge_generator.assign(E, -1);

  std::vector<char> visited(V, 0);
  std::vector<char> in_tree(E, 0);
  std::deque<int> queue{basepoint};
  visited[basepoint] = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const auto& [e, w] : inc[u]) {
      if (visited[w]) continue;
      visited[w] = 1;
      in_tree[e] = 1;
      pres.tree_parent[w] = u;
      pres.tree_parent_edge[w] = e;
      queue.push_back(w);
    }
  }

  for (int e = 0; e < E; ++e) {
    if (in_tree[e]) continue;
    pres.edge_generator[e] = pres.generator_count();
    pres.generator_edges.push_back(e);
    const std::string& nm = x.cell(1, e).name;
    pres.generator_names.push_back(nm.empty() ? "g" + std::to_string(pres.generator_count() - 1)
                                              : nm);
  }

  for (int c = 0; c < x.cell_count(2); ++c) {
    DeckWord w;
    for (int side = 0; side < 3; ++side) {
      const int a = side;
      const int b = (side + 1) % 3;
      const auto [eid, tail_at] = x.edge_between(2, c, a, b);
      w = w.concat(pres.edge_word(eid, tail_at == 0));
    }
    pres.relators.push_back(w);
  }
  return pres;
}

namespace {

// Row-style Hermite normal form over long long. Returns the rank; `rows` is
// replaced by the echelon basis with positive pivots and reduced entries
// above each pivot. `pivots` receives (row, column) pairs.
int hermite_normal_form(std::vector<std::vector<long long>>& rows,
                        std::vector<std::pair<int, int>>* pivots) {
  if (pivots) pivots->clear();
  if (rows.empty()) return 0;
  const int cols = static_cast<int>(rows[0].size());
  int rank = 0;
  for (int col = 0; col < cols && rank < static_cast<int>(rows.size()); ++col) {
    // Eliminate below: repeatedly reduce by the smallest nonzero entry.
    while (true) {
      int best = -1;
      for (int i = rank; i < static_cast<int>(rows.size()); ++i)
        if (rows[i][col] != 0 &&
            (best < 0 || std::llabs(rows[i][col]) < std::llabs(rows[best][col])))
          best = i;
      if (best < 0) break;
      std::swap(rows[rank], rows[best]);
      bool clean = true;
      for (int i = rank + 1; i < static_cast<int>(rows.size()); ++i) {
        if (rows[i][col] == 0) continue;
        const long long q = rows[i][col] / rows[rank][col];
        if (q != 0)
          for (int j = 0; j < cols; ++j) rows[i][j] -= q * rows[rank][j];
        if (rows[i][col] != 0) clean = false;
      }
      if (clean) break;
    }
    if (rows[rank][col] == 0) continue;
    if (rows[rank][col] < 0)
      for (int j = 0; j < cols; ++j) rows[rank][j] = -rows[rank][j];
    // Reduce entries above the pivot into [0, pivot).
    for (int i = 0; i < rank; ++i) {
      const long long p = rows[rank][col];
      long long q = rows[i][col] / p;
      if (rows[i][col] % p < 0) --q;
      if (q != 0)
        for (int j = 0; j < cols; ++j) rows[i][j] -= q * rows[rank][j];
    }
    if (pivots) pivots->push_back({rank, col});
    ++rank;
  }
  rows.resize(rank);
  return rank;
}

std::vector<std::vector<long long>> relator_rows(const Presentation& pres) {
  std::vector<std::vector<long long>> rows;
  rows.reserve(pres.relators.size());
  for (const auto& r : pres.relators) {
    std::vector<long long> row(pres.generator_count(), 0);
    for (int l : r.letters) row[std::abs(l) - 1] += (l > 0 ? 1 : -1);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Eigen::MatrixXi relator_exponent_matrix(const Presentation& pres) {
  Eigen::MatrixXi m(static_cast<int>(pres.relators.size()), pres.generator_count());
  m.setZero();
  for (int i = 0; i < m.rows(); ++i)
    for (int l : pres.relators[i].letters) m(i, std::abs(l) - 1) += (l > 0 ? 1 : -1);
  return m;
}

int abelianization_rank(const Presentation& pres) {
  auto rows = relator_rows(pres);
  const int rank = hermite_normal_form(rows, nullptr);
  return pres.generator_count() - rank;
}

bool QuotientOracle::equal(const DeckWord& a, const DeckWord& b, bool* undecided) const {
  bool ua = false;
  bool ub = false;
  const std::string ka = key(a, &ua);
  const std::string kb = key(b, &ub);
  if (undecided) *undecided = ua || ub;
  return ka == kb;
}

bool QuotientOracle::trivial(const DeckWord& w, bool* undecided) const {
  return equal(w, DeckWord::identity(), undecided);
}

namespace {

class FreeOracle final : public QuotientOracle {
 public:
  explicit FreeOracle(Presentation pres) : QuotientOracle(std::move(pres)) {}
  std::string name() const override { return "free"; }
  OracleKind kind() const override { return OracleKind::kFree; }
  std::string key(const DeckWord& w, bool* undecided) const override {
    if (undecided) *undecided = false;
    return serialize_word(free_reduce(w));
  }
};

class AbelianizedOracle final : public QuotientOracle {
 public:
  explicit AbelianizedOracle(Presentation pres) : QuotientOracle(std::move(pres)) {
    basis_ = relator_rows(pres_);
    hermite_normal_form(basis_, &pivots_);
  }
  std::string name() const override { return "abelianized"; }
  OracleKind kind() const override { return OracleKind::kAbelianized; }
  std::string key(const DeckWord& w, bool* undecided) const override {
    if (undecided) *undecided = false;
    std::vector<long long> v(pres_.generator_count(), 0);
    for (int l : w.letters) v[std::abs(l) - 1] += (l > 0 ? 1 : -1);
    for (const auto& [row, col] : pivots_) {
      const long long p = basis_[row][col];
      long long q = v[col] / p;
      if (v[col] % p < 0) --q;
      if (q != 0)
        for (std::size_t j = 0; j < v.size(); ++j) v[j] -= q * basis_[row][j];
    }
    std::string s;
    for (long long c : v) {
      s += std::to_string(c);
      s += ',';
    }
    return s;
  }

 private:
  std::vector<std::vector<long long>> basis_;
  std::vector<std::pair<int, int>> pivots_;
};

class RelatorClosureOracle final : public QuotientOracle {
 public:
  RelatorClosureOracle(Presentation pres, int depth)
      : QuotientOracle(std::move(pres)), budget_(4000 * std::max(1, depth)) {
    // All cyclic rotations of every relator and of its inverse.
    std::set<std::vector<int>> seen;
    for (const auto& r : pres_.relators) {
      for (const DeckWord& base : {free_reduce(r), free_reduce(r).inverse()}) {
        const int n = base.length();
        if (n == 0) continue;
        max_relator_ = std::max(max_relator_, n);
        for (int s = 0; s < n; ++s) {
          DeckWord rot;
          for (int i = 0; i < n; ++i) rot.letters.push_back(base.letters[(s + i) % n]);
          rot = free_reduce(rot);
          if (!rot.empty() && seen.insert(rot.letters).second) variants_.push_back(rot);
        }
      }
    }
  }
  std::string name() const override { return "relator-closure"; }
  OracleKind kind() const override { return OracleKind::kRelatorClosure; }

  std::string key(const DeckWord& w, bool* undecided) const override {
    const DeckWord start = free_reduce(w);
    if (variants_.empty()) {
      if (undecided) *undecided = false;
      return serialize_word(start);
    }
    const std::string cache_key = serialize_word(start);
    if (const auto it = cache_.find(cache_key); it != cache_.end()) {
      if (undecided) *undecided = it->second.second;
      return it->second.first;
    }

    const int max_len = start.length() + max_relator_;
    std::set<std::vector<int>> visited{start.letters};
    std::deque<DeckWord> queue{start};
    DeckWord best = start;
    bool truncated = false;
    while (!queue.empty()) {
      if (static_cast<int>(visited.size()) > budget_) {
        truncated = true;
        break;
      }
      const DeckWord u = queue.front();
      queue.pop_front();
      for (const auto& rv : variants_) {
        const int rn = rv.length();
        for (int k = 0; k <= rn; ++k) {
          // rv = p * q with p = rv[0..k); an occurrence of p may be replaced
          // by q^{-1} (insertion when p is empty, deletion when p = rv).
          const int un = u.length();
          for (int pos = 0; pos + k <= un; ++pos) {
            bool match = true;
            for (int i = 0; i < k; ++i)
              if (u.letters[pos + i] != rv.letters[i]) {
                match = false;
                break;
              }
            if (!match) continue;
            DeckWord next;
            next.letters.assign(u.letters.begin(), u.letters.begin() + pos);
            for (int i = rn - 1; i >= k; --i) next = next.appended(-rv.letters[i]);
            for (int i = pos + k; i < un; ++i) next = next.appended(u.letters[i]);
            if (next.length() > max_len) continue;
            if (!visited.insert(next.letters).second) continue;
            if (shortlex_less(next, best)) best = next;
            queue.push_back(next);
          }
        }
      }
    }
    if (undecided) *undecided = truncated;
    const std::string result = serialize_word(best);
    cache_.emplace(cache_key, std::make_pair(result, truncated));
    return result;
  }

 private:
  int budget_;
  int max_relator_ = 0;
  std::vector<DeckWord> variants_;
  mutable std::map<std::string, std::pair<std::string, bool>> cache_;
};

}  // namespace

std::shared_ptr<const QuotientOracle> make_free_oracle(const Presentation& pres) {
  return std::make_shared<FreeOracle>(pres);
}
std::shared_ptr<const QuotientOracle> make_abelianized_oracle(const Presentation& pres) {
  return std::make_shared<AbelianizedOracle>(pres);
}
std::shared_ptr<const QuotientOracle> make_relator_closure_oracle(const Presentation& pres,
                                                                  int depth) {
  return std::make_shared<RelatorClosureOracle>(pres, depth);
}
std::shared_ptr<const QuotientOracle> make_oracle(const Presentation& pres, OracleKind kind,
                                                  int closure_depth) {
  switch (kind) {
    case OracleKind::kFree:
      return make_free_oracle(pres);
    case OracleKind::kAbelianized:
      return make_abelianized_oracle(pres);
    case OracleKind::kRelatorClosure:
      return make_relator_closure_oracle(pres, closure_depth);
  }
  throw std::invalid_argument("unknown oracle kind");
}

const LiftedVertexInfo& CoverPatch::vertex_info(int patch_vertex) const {
  return vertices_.at(patch_vertex);
}

int CoverPatch::base_cell_of(int dim, int patch_cell) const {
  if (dim < 0 || dim > kMaxDim) throw std::out_of_range("dimension out of range");
  return base_cells_[dim].at(patch_cell);
}

int CoverPatch::find_vertex(int base_vertex, const DeckWord& word) const {
  const std::string k = oracle_->key(word);
  for (int i = 0; i < static_cast<int>(vertices_.size()); ++i)
    if (vertices_[i].base_vertex == base_vertex && vertices_[i].key == k) return i;
  return -1;
}

namespace {

struct LiftState {
  std::vector<LiftedVertexInfo> verts;
  std::map<std::pair<int, std::string>, int> index;  // (base vertex, key) -> id
  // Lifted edges, one per (base edge, tail lift): (base edge, tail id, head id).
  std::vector<std::array<int, 3>> edges;
  std::map<std::pair<int, int>, int> edge_at;  // (base edge, tail id) -> edge row
};

// Dijkstra over the lifted 1-skeleton out to threshold D.
LiftState lift_vertices(const SimplicialLengthComplex& x, const Presentation& pres,
                        const QuotientOracle& oracle, double D) {
  const int E = x.cell_count(1);
  std::vector<std::vector<std::pair<int, bool>>> out(x.vertex_count());  // (edge, forward)
  for (int e = 0; e < E; ++e) {
    const auto& c = x.cell(1, e);
    out[c.vertices[0]].push_back({e, true});
    out[c.vertices[1]].push_back({e, false});  // loops get both directions
  }

  LiftState st;
  auto mint = [&](int base, const DeckWord& word, double dist) {
    bool und = false;
    const std::string k = oracle.key(word, &und);
    const auto [it, fresh] = st.index.try_emplace({base, k}, static_cast<int>(st.verts.size()));
    if (fresh) {
      st.verts.push_back({base, word, k, und, dist});
      if (st.verts.size() > 200000) throw std::runtime_error("cover patch too large");
    }
    return it->second;
  };

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  mint(pres.basepoint, DeckWord::identity(), 0.0);
  heap.push({0.0, 0});
  std::vector<char> done;
  while (!heap.empty()) {
    const auto [d, id] = heap.top();
    heap.pop();
    if (id < static_cast<int>(done.size()) && done[id]) continue;
    if (id >= static_cast<int>(done.size())) done.resize(st.verts.size(), 0);
    done[id] = 1;
    const int base = st.verts[id].base_vertex;
    const DeckWord word = st.verts[id].word;
    for (const auto& [e, fwd] : out[base]) {
      const auto& c = x.cell(1, e);
      const int nb = fwd ? c.vertices[1] : c.vertices[0];
      const double nd = d + c.length;
      if (nd > D) continue;
      const DeckWord nw = word.concat(pres.edge_word(e, fwd));
      const int nid = mint(nb, nw, nd);
      if (nid >= static_cast<int>(done.size())) done.resize(st.verts.size(), 0);
      if (done[nid]) continue;
      if (nd < st.verts[nid].skeleton_distance) st.verts[nid].skeleton_distance = nd;
      heap.push({nd, nid});
    }
  }

  // Lifted edges between settled vertices, one per (base edge, tail lift).
  for (int id = 0; id < static_cast<int>(st.verts.size()); ++id) {
    const int base = st.verts[id].base_vertex;
    for (const auto& [e, fwd] : out[base]) {
      if (!fwd) continue;
      const auto& c = x.cell(1, e);
      const DeckWord hw = st.verts[id].word.concat(pres.edge_word(e, true));
      const auto it = st.index.find({c.vertices[1], oracle.key(hw)});
      if (it == st.index.end()) continue;
      st.edge_at[{e, id}] = static_cast<int>(st.edges.size());
      st.edges.push_back({e, id, it->second});
    }
  }
  return st;
}

struct Materialized {
  SimplicialLengthComplex complex;
  std::array<std::vector<int>, kMaxDim + 1> base_cells;
  std::vector<int> lift_of_vertex;  // patch vertex -> lift id
  int skipped_cells = 0;            // candidate lifts dropped for incoherent corners
};

// Materializes the pure subcomplex spanned by the coherently lifted top
// cells (dangling lower-dimensional lifts are pruned so the patch stays
// pure-dimensional for the metric engine).
Materialized materialize(const SimplicialLengthComplex& x, const Presentation& pres,
                         const QuotientOracle& oracle, const LiftState& st, int n) {
  Materialized out;

  // Lift of the vertex under cell corner `corner`, at the deck position whose
  // corner-0 lift is `v0`; -1 when absent.
  auto corner_lift = [&](int dim, int cell, int v0, int corner) -> int {
    if (corner == 0) return v0;
    const auto [eid, tail_at] = x.edge_between(dim, cell, 0, corner);
    const DeckWord w = st.verts[v0].word.concat(pres.edge_word(eid, tail_at == 0));
    const auto it = st.index.find({x.cell(dim, cell).vertices[corner], oracle.key(w)});
    return it == st.index.end() ? -1 : it->second;
  };
  // Lifted-edge row realizing cell corners a->b at the given corner lifts; -1
  // when the lifted edge is absent or lands on a different head (incoherent).
  auto side_row = [&](int dim, int cell, int la, int lb, int a, int b, bool* reversed) -> int {
    const auto [eid, tail_at] = x.edge_between(dim, cell, a, b);
    const bool fwd = (tail_at == 0);
    const int tail = fwd ? la : lb;
    const int head = fwd ? lb : la;
    const auto it = st.edge_at.find({eid, tail});
    if (it == st.edge_at.end()) return -1;
    if (st.edges[it->second][2] != head) return -1;
    if (reversed) *reversed = !fwd;
    return it->second;
  };

  std::vector<std::vector<int>> lifts_of_base(x.vertex_count());
  for (int i = 0; i < static_cast<int>(st.verts.size()); ++i)
    lifts_of_base[st.verts[i].base_vertex].push_back(i);

  struct TriLift {
    int base;
    std::array<int, 3> sides;
    std::array<bool, 3> rev;
  };
  struct TetLift {
    int base;
    std::array<int, 4> corners;
  };
  std::vector<TriLift> tris;
  std::vector<TetLift> tets;
  std::vector<char> edge_used(st.edges.size(), 0);

  if (n == 1) {
    std::fill(edge_used.begin(), edge_used.end(), 1);
  } else if (n == 2) {
    for (int c = 0; c < x.cell_count(2); ++c) {
      for (int v0 : lifts_of_base[x.cell(2, c).vertices[0]]) {
        const int l1 = corner_lift(2, c, v0, 1);
        const int l2 = corner_lift(2, c, v0, 2);
        if (l1 < 0 || l2 < 0) {
          ++out.skipped_cells;
          continue;
        }
        const std::array<int, 3> lifts{v0, l1, l2};
        TriLift tl{c, {}, {}};
        bool ok = true;
        for (int s = 0; s < 3 && ok; ++s) {
          tl.sides[s] = side_row(2, c, lifts[s], lifts[(s + 1) % 3], s, (s + 1) % 3, &tl.rev[s]);
          if (tl.sides[s] < 0) ok = false;
        }
        if (!ok) {
          ++out.skipped_cells;
          continue;
        }
        for (int s = 0; s < 3; ++s) edge_used[tl.sides[s]] = 1;
        tris.push_back(tl);
      }
    }
  } else {
    for (int c = 0; c < x.cell_count(3); ++c) {
      for (int v0 : lifts_of_base[x.cell(3, c).vertices[0]]) {
        TetLift tl{c, {v0, -1, -1, -1}};
        bool ok = true;
        for (int corner = 1; corner < 4 && ok; ++corner) {
          tl.corners[corner] = corner_lift(3, c, v0, corner);
          if (tl.corners[corner] < 0) ok = false;
        }
        std::array<int, 6> rows{};
        int nr = 0;
        for (int a = 0; a < 4 && ok; ++a)
          for (int b = a + 1; b < 4 && ok; ++b) {
            rows[nr] = side_row(3, c, tl.corners[a], tl.corners[b], a, b, nullptr);
            if (rows[nr++] < 0) ok = false;
          }
        if (!ok) {
          ++out.skipped_cells;
          continue;
        }
        for (int i = 0; i < nr; ++i) edge_used[rows[i]] = 1;
        tets.push_back(tl);
      }
    }
  }

  // Keep only the basepoint's connected component: stray lobes beyond the
  // certified region would break development-based measurement and cannot
  // host ball points anyway.
  std::vector<std::vector<int>> adj(st.verts.size());
  for (std::size_t i = 0; i < st.edges.size(); ++i)
    if (edge_used[i]) {
      adj[st.edges[i][1]].push_back(st.edges[i][2]);
      adj[st.edges[i][2]].push_back(st.edges[i][1]);
    }
  std::vector<char> in_comp(st.verts.size(), 0);
  std::deque<int> bfs{0};
  in_comp[0] = 1;
  while (!bfs.empty()) {
    const int u = bfs.front();
    bfs.pop_front();
    for (int v : adj[u])
      if (!in_comp[v]) {
        in_comp[v] = 1;
        bfs.push_back(v);
      }
  }
  std::erase_if(tris, [&](const TriLift& t) { return !in_comp[st.edges[t.sides[0]][1]]; });
  std::erase_if(tets, [&](const TetLift& t) { return !in_comp[t.corners[0]]; });
  for (std::size_t i = 0; i < st.edges.size(); ++i)
    if (edge_used[i] && !in_comp[st.edges[i][1]]) edge_used[i] = 0;

  // Compact to the used vertex/edge set (ascending order keeps the lifted
  // basepoint at patch vertex 0).
  std::vector<int> vert_new(st.verts.size(), -1);
  std::vector<int> edge_new(st.edges.size(), -1);
  for (std::size_t i = 0; i < st.edges.size(); ++i)
    if (edge_used[i]) {
      vert_new[st.edges[i][1]] = 0;
      vert_new[st.edges[i][2]] = 0;
    }
  ComplexBuilder bld;
  for (int i = 0; i < static_cast<int>(st.verts.size()); ++i) {
    if (vert_new[i] < 0) continue;
    vert_new[i] = bld.add_vertex(x.vertex_name(st.verts[i].base_vertex) + "@" +
                                 st.verts[i].word.to_string(pres.generator_names));
    out.lift_of_vertex.push_back(i);
    out.base_cells[0].push_back(st.verts[i].base_vertex);
  }
  for (std::size_t i = 0; i < st.edges.size(); ++i) {
    if (!edge_used[i]) continue;
    const auto& [e, tail, head] = st.edges[i];
    edge_new[i] = bld.add_edge(vert_new[tail], vert_new[head], x.cell(1, e).length,
                               x.cell(1, e).name);
    out.base_cells[1].push_back(e);
  }
  for (const auto& t : tris) {
    bld.add_triangle_by_edges({edge_new[t.sides[0]], edge_new[t.sides[1]], edge_new[t.sides[2]]},
                              t.rev, x.cell(2, t.base).name);
    out.base_cells[2].push_back(t.base);
  }
  for (const auto& t : tets) {
    bld.add_tetrahedron(vert_new[t.corners[0]], vert_new[t.corners[1]], vert_new[t.corners[2]],
                        vert_new[t.corners[3]], x.cell(3, t.base).name);
    out.base_cells[3].push_back(t.base);
  }
  out.complex = bld.build();
  // Faces synthesized by tetrahedron insertion have no tracked base cell.
  for (int d = 0; d <= kMaxDim; ++d)
    out.base_cells[d].resize(out.complex.cell_count(d), -1);
  return out;
}

// Corner incidences of top cells around each vertex; a patch vertex with
// fewer incidences than its base vertex sits on the frontier.
std::vector<int> star_counts(const SimplicialLengthComplex& x) {
  std::vector<int> count(x.vertex_count(), 0);
  for (const CellRef& t : x.top_cells())
    for (int v : x.cell(t.dim, t.index).vertices) ++count[v];
  return count;
}

// Certified lower bound on the patch distance from the basepoint to the
// frontier (+inf when the frontier is empty and the cover is exhausted).
double certify(const SimplicialLengthComplex& patch, int basepoint,
               const std::vector<int>& frontier, double target) {
  if (frontier.empty()) return kInf;
  const MetricPoint src = MetricPoint::vertex(basepoint);
  if (patch.dimension() == 1) {
    const auto field = build_distance_field(patch, src, 0);
    double lo = kInf;
    for (int v : frontier) lo = std::min(lo, field.vertex_label(v));
    return lo;
  }
  double best = -kInf;
  for (int level = 4; level <= 6; ++level) {
    const auto field = build_distance_field(patch, src, level);
    double lo = kInf;
    for (int v : frontier) {
      const double lab = field.vertex_label(v);
      // Unreachable frontier vertices cannot host a first exit of any
      // geodesic from the basepoint; they certify as infinitely far.
      if (!std::isfinite(lab)) continue;
      lo = std::min(lo, lab - field.error_for(lab));
    }
    best = std::max(best, lo);
    if (best >= target) break;
  }
  return best;
}

}  // namespace

CoverPatch build_cover(const SimplicialLengthComplex& x,
                       std::shared_ptr<const QuotientOracle> oracle, double R) {
  if (!oracle) throw std::invalid_argument("oracle required");
  if (!(R > 0.0)) throw std::invalid_argument("R > 0 required");
  const int n = patch_dimension(x);
  if (oracle->kind() == OracleKind::kFree && x.cell_count(2) > 0)
    throw std::invalid_argument(
        "free oracle cannot lift 2-cells; use the abelianized or relator-closure oracle");
  const Presentation& pres = oracle->group_presentation();

  const double margin = x.max_edge_length();
  const auto base_stars = star_counts(x);
  double D = R + margin;
  Materialized mat;
  LiftState st;
  double certified = -kInf;
  bool done = false;
  for (int round = 0; round < 40 && !done; ++round) {
    st = lift_vertices(x, pres, *oracle, D);
    mat = materialize(x, pres, *oracle, st, n);
    if (mat.complex.vertex_count() == 0 ||
        mat.lift_of_vertex.empty() || mat.lift_of_vertex[0] != 0) {
      D += margin + 0.25 * R;  // not even the basepoint star lifted yet
      continue;
    }
    const auto patch_stars = star_counts(mat.complex);
    std::vector<int> frontier;
    for (int v = 0; v < mat.complex.vertex_count(); ++v)
      if (patch_stars[v] < base_stars[st.verts[mat.lift_of_vertex[v]].base_vertex])
        frontier.push_back(v);
    certified = certify(mat.complex, 0, frontier, R);
    done = certified >= R;
    if (!done) D += margin + 0.25 * R;
  }
  if (!done) {
    std::string msg = "cover patch certification failed";
    if (mat.skipped_cells > 0)
      msg += " (" + std::to_string(mat.skipped_cells) + " undecided cell identifications)";
    throw std::runtime_error(msg);
  }

  std::vector<LiftedVertexInfo> verts;
  verts.reserve(mat.lift_of_vertex.size());
  for (int lift : mat.lift_of_vertex) verts.push_back(st.verts[lift]);

  // Shortlex-minimal coset representatives via breadth-first search over the
  // deck-element key space.
  std::set<std::string> needed;
  for (const auto& v : verts) needed.insert(v.key);
  std::map<std::string, DeckWord> reps;
  reps[oracle->key(DeckWord::identity())] = DeckWord::identity();
  std::size_t missing = 0;
  for (const auto& k : needed)
    if (!reps.count(k)) ++missing;
  std::deque<DeckWord> queue{DeckWord::identity()};
  while (!queue.empty() && missing > 0 && reps.size() < 200000) {
    const DeckWord w = queue.front();
    queue.pop_front();
    for (int g = 0; g < pres.generator_count(); ++g)
      for (bool inv : {false, true}) {
        const DeckWord w2 = w.appended(letter_of(g, inv));
        const std::string k2 = oracle->key(w2);
        if (reps.emplace(k2, w2).second) {
          if (needed.count(k2)) --missing;
          queue.push_back(w2);
        }
      }
  }
  for (auto& v : verts) {
    const auto it = reps.find(v.key);
    if (it != reps.end() && shortlex_less(it->second, v.word)) v.word = it->second;
  }

  CoverPatch patch;
  patch.base_ = x;
  patch.patch_ = std::move(mat.complex);
  patch.pres_ = pres;
  patch.oracle_ = std::move(oracle);
  patch.vertices_ = std::move(verts);
  patch.base_cells_ = std::move(mat.base_cells);
  patch.radius_ = R;
  patch.certified_ = certified;
  patch.margin_ = margin;
  patch.whole_ = std::isinf(certified);
  patch.basepoint_vertex_ = 0;
  patch.undecided_ = 0;
  for (const auto& v : patch.vertices_)
    if (v.undecided) ++patch.undecided_;
  return patch;
}

MeasureEstimate cover_ball_volume(const CoverPatch& patch, double r, BallMethod method,
                                  const SampleSpec& spec) {
  if (r < 0.0) throw std::invalid_argument("r >= 0 required");
  if (r > patch.safe_radius()) throw std::invalid_argument("patch too small");
  return ball_volume(patch.complex(), MetricPoint::vertex(patch.basepoint_vertex()), r, method,
                     spec);
}

MeasureEstimate cover_ball_volume_at(const CoverPatch& patch, const DeckWord& word, double r,
                                     BallMethod method, const SampleSpec& spec) {
  if (r < 0.0) throw std::invalid_argument("r >= 0 required");
  const int v = patch.find_vertex(patch.group_presentation().basepoint, word);
  if (v < 0) throw std::invalid_argument("deck translate outside patch");
  if (patch.vertex_info(v).skeleton_distance + r > patch.safe_radius())
    throw std::invalid_argument("patch too small");
  return ball_volume(patch.complex(), MetricPoint::vertex(v), r, method, spec);
}

BallProfile max_ball_profile(const SimplicialLengthComplex& x, OracleKind kind,
                             const std::vector<double>& r_grid,
                             const std::vector<int>& center_vertices, int closure_depth) {
  if (r_grid.empty()) throw std::invalid_argument("r grid required");
  if (center_vertices.empty()) throw std::invalid_argument("center vertices required");
  const double max_r = *std::max_element(r_grid.begin(), r_grid.end());
  BallProfile profile;
  profile.r = r_grid;
  profile.value.resize(r_grid.size());
  bool first = true;
  for (int center : center_vertices) {
    const auto pres = presentation(x, center);
    const auto oracle = make_oracle(pres, kind, closure_depth);
    const auto patch = build_cover(x, oracle, max_r + x.max_edge_length() + 1e-9);
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
      const auto est = cover_ball_volume(patch, r_grid[i]);
      if (first || est.value > profile.value[i].value) profile.value[i] = est;
    }
    first = false;
  }
  return profile;
}

}  // namespace polyscal
