#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcoh/corpus.hpp"
#include "json.hpp"

namespace dcoh {

/// Splits a dialogue into a context of `context_len` turns and the positive
/// next turn at index `context_len`.
struct InsertionPoint {
  std::string dialogue_id;
  std::size_t context_len = 1;

  std::size_t positive_idx() const { return context_len; }
  bool operator==(const InsertionPoint&) const = default;
};

/// Admissible context lengths (inclusive).
struct ContextRange {
  std::size_t min = 1;
  std::size_t max = std::numeric_limits<std::size_t>::max();
};

enum class Provenance { Original, Internal, External };
std::string to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

struct Candidate {
  Turn turn;
  Provenance provenance = Provenance::Original;
  std::string source_dialogue;
  std::size_t source_turn = 0;
};

struct RankingInstance {
  std::string id;  // "<dialogue_id>#<context_len>"
  std::string dialogue_id;
  std::vector<Turn> context;
  std::vector<Candidate> candidates;
  std::size_t positive_position = 0;

  std::size_t negatives() const { return candidates.size() - 1; }
};

/// Samples up to `n` distinct insertion points uniformly among positive
/// indices whose context length lies in `range` and that are followed by at
/// least `min_turns_after` further turns. Returned in ascending order.
/// Throws DataError when no position is admissible.
std::vector<InsertionPoint> gen_insertion_points(const Dialogue& d, std::size_t n,
                                                 const ContextRange& range,
                                                 std::uint64_t seed,
                                                 std::size_t min_turns_after = 0);
/// Same, with an arbitrary admissibility test on the positive index.
std::vector<InsertionPoint> gen_insertion_points(const Dialogue& d, std::size_t n,
                                                 const ContextRange& range,
                                                 std::uint64_t seed,
                                                 const std::function<bool(std::size_t)>& admit);

/// Turns of every dialogue in a split, for external sampling.
class SplitIndex {
 public:
  explicit SplitIndex(const Corpus& split);

  const Corpus& corpus() const { return *corpus_; }
  const Dialogue& dialogue(const std::string& id) const;
  std::size_t turn_count() const { return flat_.size(); }

  /// Turns belonging to dialogues other than `id`.
  std::size_t turns_outside(const std::string& id) const;

 private:
  friend std::vector<Candidate> sample_negatives(const InsertionPoint&, Provenance,
                                                 std::size_t, const SplitIndex&,
                                                 std::uint64_t);
  const Corpus* corpus_;
  std::vector<std::pair<std::size_t, std::size_t>> flat_;  // (dialogue, turn)
  std::vector<std::size_t> first_;  // per dialogue: offset into flat_
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Draws `count` negatives without replacement. Internal: turns after the
/// positive in the same dialogue. External: turns of other dialogues in the
/// split. Turns whose annotation equals the positive are never returned.
/// Throws DataError when the pool is too small.
std::vector<Candidate> sample_negatives(const InsertionPoint& point, Provenance mode,
                                        std::size_t count, const SplitIndex& split,
                                        std::uint64_t seed);

struct SelectionConfig {
  std::size_t points_per_dialogue = 10;
  std::size_t internal_negatives = 0;
  std::size_t external_negatives = 9;
  ContextRange context;
  std::uint64_t seed = 0;

  std::size_t negatives() const { return internal_negatives + external_negatives; }
  std::string mode() const;
};

struct SelectionDataset {
  std::vector<RankingInstance> instances;
  std::vector<std::string> skipped;  // dialogues without an admissible point
  nlohmann::json manifest;

  std::size_t pairs() const;
};

/// Builds a response-selection dataset over one split. Dialogues are visited
/// in id order with per-dialogue derived seeds; candidate order within an
/// instance is shuffled.
SelectionDataset build_selection_dataset(const Corpus& split, const SelectionConfig& cfg);

nlohmann::json to_json(const RankingInstance& r);
RankingInstance ranking_instance_from_json(const nlohmann::json& j);
std::string serialize_instances(const std::vector<RankingInstance>& v);
std::vector<RankingInstance> load_instances(const std::string& path);
std::vector<RankingInstance> parse_instances(std::string_view jsonl);

/// Restricts a corpus to the ids listed (one per line) in a split file.
Corpus select_split(const Corpus& corpus, const std::vector<std::string>& ids);

struct RatedCandidate {
  Turn turn;
  Provenance provenance = Provenance::Original;
  std::vector<int> ratings;  // per worker, may be empty
  double mean_rating = 0.0;
};

struct RatedInstance {
  std::string id;
  std::vector<Turn> context;
  std::vector<RatedCandidate> candidates;
};

/// Rated test set, one instance per line:
///   {"id", "context": [turn], "candidates": [{"turn", "provenance",
///    "ratings": [int]} | {"turn", "provenance", "mean_rating": real}]}
/// With `strict`, each instance must have 7 candidates: one original, three
/// internal and three external.
std::vector<RatedInstance> load_rated_testset(const std::string& path, bool strict = false);
std::vector<RatedInstance> parse_rated_testset(std::string_view jsonl, bool strict = false);
nlohmann::json to_json(const RatedInstance& r);

}  // namespace dcoh
