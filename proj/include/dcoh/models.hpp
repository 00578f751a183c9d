#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcoh/grid.hpp"
#include "dcoh/metrics.hpp"
#include "dcoh/neural.hpp"
#include "dcoh/swapgen.hpp"
#include "json.hpp"

namespace dcoh {

/// Scores a candidate next turn given the dialogue history. Higher is more
/// coherent; scores are unbounded.
class CoherenceModel {
 public:
  virtual ~CoherenceModel() = default;
  virtual double score(std::span<const Turn> context, const Turn& candidate) const = 0;
  virtual std::string kind() const = 0;

  std::vector<double> score_candidates(std::span<const Turn> context,
                                       std::span<const Turn> candidates) const;
};

class NeuralModel final : public CoherenceModel {
 public:
  NeuralModel(NeuralConfig cfg, Vocabularies vocab, ParamSet<float> params);

  double score(std::span<const Turn> context, const Turn& candidate) const override;
  double score_stream(const TokenStream& s) const;
  std::string kind() const override { return "neural"; }

  TokenStream encode(std::span<const Turn> context, const Turn& candidate) const;
  const NeuralConfig& config() const { return cfg_; }
  const Vocabularies& vocab() const { return vocab_; }
  const ParamSet<float>& params() const { return params_; }
  ParamSet<float>& mutable_params() { return params_; }
  const BiGruScorer<float>& scorer() const { return scorer_; }

 private:
  NeuralConfig cfg_;
  Vocabularies vocab_;
  ParamSet<float> params_;
  BiGruScorer<float> scorer_;
};

struct LinearConfig {
  GridFeatures features = GridFeatures::Joint;
  TransitionConfig transitions;
  double l2 = 0.5;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const LinearConfig& c);
LinearConfig linear_config_from_json(const nlohmann::json& j);

/// Pairwise linear ranker over entity-grid / DA transition features.
class LinearModel final : public CoherenceModel {
 public:
  LinearModel(LinearConfig cfg, Vocab das, std::vector<float> weights);

  double score(std::span<const Turn> context, const Turn& candidate) const override;
  std::string kind() const override { return "linear"; }

  std::vector<double> features(std::span<const Turn> context, const Turn& candidate) const;
  const LinearConfig& config() const { return cfg_; }
  const Vocab& das() const { return das_; }
  const std::vector<float>& weights() const { return weights_; }

 private:
  LinearConfig cfg_;
  Vocab das_;
  std::vector<float> weights_;
};

/// Minimizes sum max(0, 1 - w.(pos - neg)) + l2 |w|^2 by seeded stochastic
/// subgradient descent (step 1/(lambda t) on the per-pair averaged
/// objective). l2 must be > 0.
std::vector<double> train_linear_ranker(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
    double l2, std::size_t epochs, std::uint64_t seed);

LinearModel train_linear_model(const std::vector<RankingInstance>& train, const Vocab& das,
                               const LinearConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean margin loss over pairs
  double dev_mrr = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_mrr = 0.0;
  bool early_stopped = false;
  std::size_t pretrained_words = 0;  // word embedding rows set from vectors
};

nlohmann::json to_json(const TrainHistory& h);

struct NeuralTrainResult {
  NeuralModel model;
  TrainHistory history;
};

/// Word vectors in the common text format: "word v1 ... vd" per line. A
/// leading "count dim" header line is skipped. Words are lowercased; the
/// first vector of a repeated word wins.
using WordVectors = std::unordered_map<std::string, std::vector<float>>;
WordVectors parse_word_vectors(std::string_view text);

/// Overwrites the "emb.word" rows of vocabulary words that have a vector.
/// Returns the number of rows set. Throws DataError on a dimension mismatch.
std::size_t apply_word_vectors(const WordVectors& vectors, const Vocab& words,
                               ParamSet<float>& params);

/// Margin-ranking training over (original, adversarial) pairs with Adam.
/// Keeps the parameters of the epoch with the best dev MRR; stops after
/// `patience` epochs without improvement or at `max_epochs`. Throws
/// NumericError when the loss becomes non-finite. `pretrained` word vectors,
/// when given, replace the random initialization of matching words.
NeuralTrainResult train_neural(const std::vector<RankingInstance>& train,
                               const std::vector<RankingInstance>& dev,
                               const NeuralConfig& cfg, const Vocabularies& vocab,
                               const WordVectors* pretrained = nullptr);

/// Vocabularies for training: words (with `min_word_count`) from the train
/// set; DA labels from the tagset when given, else from train and dev.
Vocabularies derive_training_vocab(const std::vector<RankingInstance>& train,
                                   const std::vector<RankingInstance>& dev,
                                   std::size_t min_word_count, const Tagset* tagset = nullptr);

struct RankedCandidate {
  std::size_t index = 0;  // position in the input candidate list
  double score = 0.0;
  std::size_t rank = 0;   // 1-based
};

/// Candidates in descending score order. Among equal scores, candidates
/// flagged relevant go after the others.
std::vector<RankedCandidate> rank_candidates(std::span<const Turn> context,
                                             std::span<const Turn> candidates,
                                             const CoherenceModel& model,
                                             std::span<const double> relevance = {});

struct SelectionMetrics {
  double accuracy = 0.0;
  double mrr = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  std::size_t instances = 0;
  std::size_t pairs = 0;
};

SelectionMetrics evaluate_selection(const CoherenceModel& model,
                                    const std::vector<RankingInstance>& data);
/// Same metrics from precomputed per-candidate scores.
SelectionMetrics selection_metrics(const std::vector<RankingInstance>& data,
                                   const std::vector<std::vector<double>>& scores);

struct RatingMetrics {
  double accuracy = 0.0;  // over candidate pairs with different ratings
  double mrr = 0.0;       // dynamic relevance: best-rated candidates
  double r1 = 0.0;
  double ndcg = 0.0;
  std::size_t instances = 0;
  std::size_t pairs = 0;
};

RatingMetrics evaluate_rating(const CoherenceModel& model,
                              const std::vector<RatedInstance>& data,
                              GainMode gain = GainMode::Linear);

// ---------------------------------------------------------- checkpoints
//
// Byte layout (all integers little-endian):
//   [0, 8)       magic "DCOHCKPT"
//   [8, 12)      u32 format version
//   [12, 20)     u64 header length N
//   [20, 20+N)   UTF-8 JSON header: kind, config, vocabularies, manifest and
//                "tensors": [{name, shape, offset, count}] (offset in bytes
//                from the start of the payload)
//   payload      tensors in header order, float32 little-endian
//   last 8       u64 FNV-1a-64 of every preceding byte

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelCheckpoint {
  std::string kind;  // "neural" or "linear"
  nlohmann::json config;
  nlohmann::json vocabularies;
  nlohmann::json manifest;
  ParamSet<float> params;
};

ModelCheckpoint make_checkpoint(const NeuralModel& m, nlohmann::json manifest);
ModelCheckpoint make_checkpoint(const LinearModel& m, nlohmann::json manifest);

std::string encode_checkpoint(const ModelCheckpoint& c);
/// Throws DataError on bad magic, version mismatch, truncation or checksum
/// mismatch.
ModelCheckpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelCheckpoint& c, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

std::unique_ptr<CoherenceModel> model_from_checkpoint(const ModelCheckpoint& c);

}  // namespace dcoh
