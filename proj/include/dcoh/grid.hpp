#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dcoh/corpus.hpp"

namespace dcoh {

/// Turn-by-entity matrix of grammatical roles. Columns are entity heads in
/// order of first mention.
struct EntityGrid {
  std::size_t n_turns = 0;
  std::vector<std::string> entities;
  std::vector<std::vector<Role>> columns;  // columns[e][t]

  std::size_t n_entities() const { return columns.size(); }
  Role cell(std::size_t turn, std::size_t entity) const {
    return columns[entity][turn];
  }
  /// Number of non-Absent cells in a column.
  std::size_t mentions(std::size_t entity) const;
};

struct TransitionConfig {
  std::size_t length = 2;    // k; history is k - 1
  std::size_t saliency = 1;  // minimum non-Absent cells to keep a column

  void check() const;
};

/// Roles enumerate as S, O, X, Absent (index 0..3); transition index is the
/// base-4 number of the role window, first role most significant.
inline constexpr std::size_t kRoleAlphabet = 4;

EntityGrid build_grid(const Dialogue& d);
EntityGrid build_grid(std::span<const Turn> turns);

/// Window-frequency distribution over all 4^k role transitions. Sums to 1
/// when at least one window exists, otherwise all zeros.
std::vector<double> entity_transition_features(const EntityGrid& g,
                                               const TransitionConfig& cfg);

std::vector<std::string> da_sequence(const Dialogue& d);
std::vector<std::string> da_sequence(std::span<const Turn> turns);

/// Window-frequency distribution over |vocab|^k DA transitions (index is
/// the base-|vocab| number of the window). Throws DataError on unknown tags.
std::vector<double> da_transition_features(const std::vector<std::string>& seq,
                                           const TransitionConfig& cfg,
                                           const Vocab& das);

/// Entity block followed by DA block.
std::vector<double> joint_features(const std::vector<double>& entity,
                                   const std::vector<double>& da);

/// Column names matching the feature layout, e.g. "ent:O-" and "da:sd>qy".
std::vector<std::string> entity_feature_names(const TransitionConfig& cfg);
std::vector<std::string> da_feature_names(const TransitionConfig& cfg,
                                          const Vocab& das);

enum class GridFeatures { Entity, Da, Joint };

std::size_t feature_dim(GridFeatures kind, const TransitionConfig& cfg,
                        const Vocab& das);
std::vector<double> grid_features(std::span<const Turn> turns, GridFeatures kind,
                                  const TransitionConfig& cfg, const Vocab& das);
std::vector<std::string> grid_feature_names(GridFeatures kind,
                                            const TransitionConfig& cfg,
                                            const Vocab& das);
std::string to_string(GridFeatures kind);
GridFeatures parse_grid_features(std::string_view s);

/// One row per dialogue, header names every transition.
std::string features_tsv(const Corpus& corpus, GridFeatures kind,
                         const TransitionConfig& cfg, const Vocab& das);

/// Add-one smoothed conditional model p(next | previous k-1 symbols),
/// estimated from symbol sequences over an alphabet of fixed size.
class TransitionModel {
 public:
  TransitionModel(std::size_t alphabet, std::size_t history);

  void observe(const std::vector<std::size_t>& sequence);
  double probability(std::span<const std::size_t> history, std::size_t next) const;
  std::size_t alphabet() const { return alphabet_; }
  std::size_t history() const { return history_; }

 private:
  std::size_t alphabet_;
  std::size_t history_;
  std::map<std::vector<std::size_t>, std::pair<std::size_t, std::vector<std::size_t>>>
      counts_;  // history -> (total, per-next counts)
};

/// Estimates entity and DA transition conditionals from a training corpus.
struct CoherenceStats {
  TransitionModel entity;
  TransitionModel da;
  Vocab das;
  TransitionConfig cfg;

  static CoherenceStats estimate(const Corpus& corpus, const TransitionConfig& cfg,
                                 const Vocab& das);
};

/// Mean log conditional probability of every full-history role transition
/// in the (saliency-filtered) grid. 0 for an empty grid.
double entity_log_coherence(const Dialogue& d, const CoherenceStats& stats);
/// Mean log conditional probability of every full-history DA transition.
/// 0 when the sequence is shorter than the transition length.
double da_log_coherence(const Dialogue& d, const CoherenceStats& stats);

}  // namespace dcoh
