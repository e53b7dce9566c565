#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polyscal/complex.hpp"
#include "polyscal/metric.hpp"

namespace polyscal {

/// A freely reduced word over presentation generators. Letters are signed
/// one-based generator ids: +(g+1) for the generator, -(g+1) for its inverse.
struct DeckWord {
  std::vector<int> letters;

  static DeckWord identity() { return {}; }
  static DeckWord generator(int g, bool inverse = false);

  int length() const { return static_cast<int>(letters.size()); }
  bool empty() const { return letters.empty(); }
  DeckWord inverse() const;
  /// Concatenation followed by free reduction.
  DeckWord concat(const DeckWord& other) const;
  DeckWord appended(int letter) const;
  bool operator==(const DeckWord&) const = default;

  std::string to_string(const std::vector<std::string>& names = {}) const;
};

/// Free reduction (cancel adjacent inverse pairs).
DeckWord free_reduce(const DeckWord& w);
/// Shortlex order: by length, then letter-wise with g < g^{-1} < next
/// generator. Total and deterministic.
bool shortlex_less(const DeckWord& a, const DeckWord& b);

/// Edge-path presentation of the fundamental group: one generator per
/// non-tree edge of a breadth-first spanning tree (lexicographic tie-break),
/// one relator per 2-cell (its boundary word with tree edges erased).
struct Presentation {
  int basepoint = 0;
  /// Per generator, the base edge realizing it (sorted ascending).
  std::vector<int> generator_edges;
  std::vector<std::string> generator_names;
  /// Per base edge: generator index, or -1 for spanning-tree edges.
  std::vector<int> edge_generator;
  /// Per vertex: parent vertex / connecting edge in the tree (-1 at the
  /// basepoint).
  std::vector<int> tree_parent;
  std::vector<int> tree_parent_edge;
  /// One freely reduced relator per 2-cell, aligned with 2-cell indices.
  std::vector<DeckWord> relators;

  int generator_count() const { return static_cast<int>(generator_edges.size()); }
  /// Word contributed by crossing `edge` tail->head (identity on tree edges).
  DeckWord edge_word(int edge, bool forward = true) const;
};

Presentation presentation(const SimplicialLengthComplex& x, int basepoint = 0);

/// Exponent-sum matrix of the relators (rows) over the generators (columns).
Eigen::MatrixXi relator_exponent_matrix(const Presentation& pres);
/// Free rank of the abelianized group: generators minus relator-lattice rank.
int abelianization_rank(const Presentation& pres);

enum class OracleKind { kFree, kAbelianized, kRelatorClosure };

/// Decides which deck words name the same deck transformation, via a stable
/// canonical key. Identifications are sound: equal keys imply equal group
/// elements. The bounded relator-closure oracle may fail to canonicalize a
/// word within its budget; it then reports the word as undecided and the
/// caller keeps conservative distinctions.
class QuotientOracle {
 public:
  explicit QuotientOracle(Presentation pres) : pres_(std::move(pres)) {}
  virtual ~QuotientOracle() = default;
  virtual std::string name() const = 0;
  virtual OracleKind kind() const = 0;
  virtual std::string key(const DeckWord& w, bool* undecided = nullptr) const = 0;

  const Presentation& group_presentation() const { return pres_; }
  bool equal(const DeckWord& a, const DeckWord& b, bool* undecided = nullptr) const;
  bool trivial(const DeckWord& w, bool* undecided = nullptr) const;

 protected:
  Presentation pres_;
};

std::shared_ptr<const QuotientOracle> make_free_oracle(const Presentation& pres);
std::shared_ptr<const QuotientOracle> make_abelianized_oracle(const Presentation& pres);
/// Breadth-limited rewriting closure: explores the equivalence class of a
/// word under free reduction and relator substitutions, up to
/// `max_states` visited words of length at most |w| + longest relator.
/// `depth` scales the state budget.
std::shared_ptr<const QuotientOracle> make_relator_closure_oracle(const Presentation& pres,
                                                                  int depth = 3);
std::shared_ptr<const QuotientOracle> make_oracle(const Presentation& pres, OracleKind kind,
                                                  int closure_depth = 3);

struct LiftedVertexInfo {
  int base_vertex = 0;
  DeckWord word;        // shortlex-minimal representative of the deck element
  std::string key;      // oracle key of `word`
  bool undecided = false;
  double skeleton_distance = 0.0;
};

/// A finite radius-R piece of the cover of `base` determined by an oracle,
/// materialized as a first-class complex. Lifted cells carry their base cell
/// and deck label; the lifted basepoint is a patch vertex. Completeness: every
/// cover point within `certified_radius() - safety_margin()` of the lifted
/// basepoint belongs to the patch, with certified_radius() >= radius().
class CoverPatch {
 public:
  const SimplicialLengthComplex& complex() const { return patch_; }
  const SimplicialLengthComplex& base() const { return base_; }
  const Presentation& group_presentation() const { return pres_; }

  double radius() const { return radius_; }
  double certified_radius() const { return certified_; }
  double safety_margin() const { return margin_; }
  /// Largest r for which metric balls at the lifted basepoint are complete.
  double safe_radius() const { return certified_ - margin_; }
  /// True when the patch exhausted the whole cover (no frontier remained).
  bool whole_cover() const { return whole_; }

  int basepoint_vertex() const { return basepoint_vertex_; }
  std::shared_ptr<const QuotientOracle> oracle() const { return oracle_; }
  const LiftedVertexInfo& vertex_info(int patch_vertex) const;
  int base_cell_of(int dim, int patch_cell) const;
  /// Patch vertex holding (base_vertex, deck element of `word`), or -1.
  int find_vertex(int base_vertex, const DeckWord& word) const;
  /// Number of lifted vertices whose identification was undecided.
  int undecided_count() const { return undecided_; }

 private:
  friend CoverPatch build_cover(const SimplicialLengthComplex&,
                                std::shared_ptr<const QuotientOracle>, double);
  SimplicialLengthComplex base_;
  SimplicialLengthComplex patch_;
  Presentation pres_;
  std::shared_ptr<const QuotientOracle> oracle_;
  std::vector<LiftedVertexInfo> vertices_;
  std::array<std::vector<int>, kMaxDim + 1> base_cells_;
  double radius_ = 0.0;
  double certified_ = 0.0;
  double margin_ = 0.0;
  bool whole_ = false;
  int basepoint_vertex_ = 0;
  int undecided_ = 0;
};

/// Breadth-first patch construction from the lifted basepoint, grown and
/// re-certified until every frontier vertex provably lies at distance >= R.
CoverPatch build_cover(const SimplicialLengthComplex& x,
                       std::shared_ptr<const QuotientOracle> oracle, double R);

/// Hausdorff measure of the r-ball around the lifted basepoint, measured by
/// the metric engine on the patch complex. Requires r <= safe_radius().
MeasureEstimate cover_ball_volume(const CoverPatch& patch, double r,
                                  BallMethod method = BallMethod::kAuto,
                                  const SampleSpec& spec = {});
/// Ball around the deck translate word * basepoint (for invariance checks);
/// requires the translated ball to stay within the certified region.
MeasureEstimate cover_ball_volume_at(const CoverPatch& patch, const DeckWord& word, double r,
                                     BallMethod method = BallMethod::kAuto,
                                     const SampleSpec& spec = {});

struct BallProfile {
  std::vector<double> r;
  std::vector<MeasureEstimate> value;  // max over sampled centers, per r
  bool lower_bound = true;             // reported as a lower bound on the true profile
};

/// Maximum cover ball volume over lifted centers of the sampled base
/// vertices, per grid radius. A lower bound on the true profile.
BallProfile max_ball_profile(const SimplicialLengthComplex& x, OracleKind kind,
                             const std::vector<double>& r_grid,
                             const std::vector<int>& center_vertices, int closure_depth = 3);

}  // namespace polyscal
