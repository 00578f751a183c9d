#include "dcoh/models.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "dcoh/metrics.hpp"

namespace dcoh {

std::vector<double> CoherenceModel::score_candidates(std::span<const Turn> context,
                                                     std::span<const Turn> candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(score(context, c));
  return out;
}

// -------------------------------------------------------------- neural

NeuralModel::NeuralModel(NeuralConfig cfg, Vocabularies vocab, ParamSet<float> params)
    : cfg_(std::move(cfg)),
      vocab_(std::move(vocab)),
      params_(std::move(params)),
      scorer_(cfg_, ChannelSizes::from(vocab_, cfg_.channels)) {
  const auto layout = scorer_.make_params();
  if (layout.count() != params_.count())
    throw DataError("neural model: parameter count does not match configuration");
  for (std::size_t i = 0; i < layout.count(); ++i)
    if (layout.name(i) != params_.name(i) || layout[i].shape != params_[i].shape)
      throw DataError("neural model: parameter '" + params_.name(i) +
                      "' does not match configuration");
}

TokenStream NeuralModel::encode(std::span<const Turn> context, const Turn& candidate) const {
  return encode_pairwise_inputs(context, candidate, {cfg_.channels, &vocab_});
}

double NeuralModel::score_stream(const TokenStream& s) const {
  return static_cast<double>(scorer_.forward(params_, s));
}

double NeuralModel::score(std::span<const Turn> context, const Turn& candidate) const {
  return score_stream(encode(context, candidate));
}

Vocabularies derive_training_vocab(const std::vector<RankingInstance>& train,
                                   const std::vector<RankingInstance>& dev,
                                   std::size_t min_word_count, const Tagset* tagset) {
  auto as_dialogue = [](const RankingInstance& r) {
    Dialogue d{r.id, r.context};
    for (const auto& c : r.candidates) d.turns.push_back(c.turn);
    return d;
  };
  Corpus words;
  for (const auto& r : train) words.push_back(as_dialogue(r));
  auto v = derive_vocabularies(words, min_word_count, tagset);
  if (!tagset) {
    Corpus all = words;
    for (const auto& r : dev) all.push_back(as_dialogue(r));
    auto full = derive_vocabularies(all, min_word_count);
    v.das = full.das;
    v.das_iob = full.das_iob;
  }
  return v;
}

nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"dev_mrr", e.dev_mrr},
                      {"dev_accuracy", e.dev_accuracy}});
  return {{"epochs", std::move(epochs)},
          {"best_epoch", h.best_epoch},
          {"best_dev_mrr", h.best_dev_mrr},
          {"early_stopped", h.early_stopped},
          {"pretrained_words", h.pretrained_words}};
}

namespace {

struct EncodedInstance {
  std::vector<TokenStream> candidates;
  std::size_t positive = 0;
};

std::vector<EncodedInstance> encode_all(const std::vector<RankingInstance>& data,
                                        const EncodingConfig& enc) {
  std::vector<EncodedInstance> out;
  out.reserve(data.size());
  for (const auto& r : data) {
    EncodedInstance e;
    e.positive = r.positive_position;
    for (const auto& c : r.candidates)
      e.candidates.push_back(encode_pairwise_inputs(r.context, c.turn, enc));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::vector<double>> score_all(const BiGruScorer<float>& scorer,
                                           const ParamSet<float>& params,
                                           const std::vector<EncodedInstance>& data) {
  std::vector<std::vector<double>> scores;
  scores.reserve(data.size());
  for (const auto& e : data) {
    std::vector<double> s;
    for (const auto& c : e.candidates) s.push_back(scorer.forward(params, c));
    scores.push_back(std::move(s));
  }
  return scores;
}

}  // namespace

WordVectors parse_word_vectors(std::string_view text) {
  WordVectors out;
  std::size_t dim = 0;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string word;
    if (!(in >> word)) continue;
    std::vector<float> v;
    for (float x; in >> x;) v.push_back(x);
    if (!in.eof()) throw DataError("word vectors line " + std::to_string(i + 1) + ": bad number");
    if (i == 0 && v.size() == 1) continue;  // "count dim" header
    if (v.empty()) throw DataError("word vectors line " + std::to_string(i + 1) + ": no values");
    if (dim == 0) dim = v.size();
    if (v.size() != dim)
      throw DataError("word vectors line " + std::to_string(i + 1) + ": expected " +
                      std::to_string(dim) + " values, got " + std::to_string(v.size()));
    out.emplace(lowercase(word), std::move(v));
  }
  if (out.empty()) throw DataError("word vectors: no entries");
  return out;
}

std::size_t apply_word_vectors(const WordVectors& vectors, const Vocab& words,
                               ParamSet<float>& params) {
  auto& emb = params[params.index("emb.word")];
  const std::size_t dim = emb.shape.at(1);
  std::size_t set = 0;
  for (std::size_t r = 0; r < words.size(); ++r) {
    const auto it = vectors.find(words.token(r));
    if (it == vectors.end()) continue;
    if (it->second.size() != dim)
      throw DataError("word vectors have " + std::to_string(it->second.size()) +
                      " dimensions, the word embedding has " + std::to_string(dim));
    std::copy(it->second.begin(), it->second.end(),
              emb.data.begin() + static_cast<std::ptrdiff_t>(r * dim));
    ++set;
  }
  return set;
}

NeuralTrainResult train_neural(const std::vector<RankingInstance>& train,
                               const std::vector<RankingInstance>& dev,
                               const NeuralConfig& cfg, const Vocabularies& vocab,
                               const WordVectors* pretrained) {
  cfg.check();
  if (train.empty()) throw DataError("train_neural: empty training set");
  if (dev.empty()) throw DataError("train_neural: empty dev set");
  const EncodingConfig enc{cfg.channels, &vocab};
  const auto train_enc = encode_all(train, enc);
  const auto dev_enc = encode_all(dev, enc);

  BiGruScorer<float> scorer(cfg, ChannelSizes::from(vocab, cfg.channels));
  auto params = scorer.init_params(derive_seed(cfg.seed, "init"));
  std::size_t hist_pretrained = 0;
  if (pretrained) {
    if (!cfg.channels.word) throw DataError("word vectors given but the word channel is off");
    hist_pretrained = apply_word_vectors(*pretrained, vocab.words, params);
  }
  auto grads = params.zeros_like();
  auto adam = AdamState<float>::like(params);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (instance, negative)
  for (std::size_t i = 0; i < train_enc.size(); ++i)
    for (std::size_t c = 0; c < train_enc[i].candidates.size(); ++c)
      if (c != train_enc[i].positive) pairs.emplace_back(i, c);
  if (pairs.empty()) throw DataError("train_neural: no training pairs");

  TrainHistory hist;
  hist.pretrained_words = hist_pretrained;
  ParamSet<float> best = params;
  bool have_best = false;
  std::size_t since_best = 0;
  BiGruScorer<float>::Cache cpos, cneg;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "epoch:" + std::to_string(epoch)));
    rng.shuffle(pairs);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch) {
      const std::size_t end = std::min(pairs.size(), start + cfg.batch);
      const auto scale = 1.0f / static_cast<float>(end - start);
      grads.set_zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto& inst = train_enc[pairs[k].first];
        const auto& pos = inst.candidates[inst.positive];
        const auto& neg = inst.candidates[pairs[k].second];
        const float x1 = scorer.forward(params, pos, &cpos);
        const float x2 = scorer.forward(params, neg, &cneg);
        const auto l = margin_ranking_loss(x1, x2, cfg.margin);
        if (!std::isfinite(l.value) || !std::isfinite(x1) || !std::isfinite(x2))
          throw NumericError("train_neural: non-finite loss at epoch " +
                             std::to_string(epoch) + ", pair " + std::to_string(k));
        loss_sum += l.value;
        if (l.value > 0.0) {
          scorer.backward(params, pos, cpos, static_cast<float>(l.d_x1) * scale, grads);
          scorer.backward(params, neg, cneg, static_cast<float>(l.d_x2) * scale, grads);
        }
      }
      adam_step(params, grads, adam, cfg.lr);
    }

    const auto dev_scores = score_all(scorer, params, dev_enc);
    const auto m = selection_metrics(dev, dev_scores);
    hist.epochs.push_back({epoch, loss_sum / static_cast<double>(pairs.size()), m.mrr,
                           m.accuracy});
    if (!have_best || m.mrr > hist.best_dev_mrr) {
      have_best = true;
      hist.best_dev_mrr = m.mrr;
      hist.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      hist.early_stopped = true;
      break;
    }
  }
  return {NeuralModel(cfg, vocab, std::move(best)), std::move(hist)};
}

// ------------------------------------------------------------- ranking

std::vector<RankedCandidate> rank_candidates(std::span<const Turn> context,
                                             std::span<const Turn> candidates,
                                             const CoherenceModel& model,
                                             std::span<const double> relevance) {
  const auto scores = model.score_candidates(context, candidates);
  std::vector<double> rel(relevance.begin(), relevance.end());
  if (rel.empty()) rel.assign(scores.size(), 0.0);
  if (rel.size() != scores.size())
    throw std::invalid_argument("rank_candidates: relevance size mismatch");
  const auto order = rank_order(scores, rel);
  std::vector<RankedCandidate> out;
  for (std::size_t r = 0; r < order.size(); ++r)
    out.push_back({order[r], scores[order[r]], r + 1});
  return out;
}

SelectionMetrics selection_metrics(const std::vector<RankingInstance>& data,
                                   const std::vector<std::vector<double>>& scores) {
  if (data.size() != scores.size())
    throw std::invalid_argument("selection_metrics: size mismatch");
  SelectionMetrics m;
  std::size_t wins = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    const auto& s = scores[i];
    std::vector<double> rel(s.size(), 0.0);
    rel[r.positive_position] = 1.0;
    std::vector<double> negs;
    for (std::size_t c = 0; c < s.size(); ++c)
      if (c != r.positive_position) negs.push_back(s[c]);
    wins += static_cast<std::size_t>(
        std::lround(pairwise_accuracy(s[r.positive_position], negs) *
                    static_cast<double>(negs.size())));
    m.pairs += negs.size();
    const auto ranked = ranked_list(s, rel);
    m.mrr += mrr(ranked);
    m.r1 += recall_at_k(ranked, 1);
    m.r2 += recall_at_k(ranked, std::min<std::size_t>(2, ranked.size()));
  }
  m.instances = data.size();
  if (m.instances) {
    const auto n = static_cast<double>(m.instances);
    m.mrr /= n;
    m.r1 /= n;
    m.r2 /= n;
  }
  if (m.pairs) m.accuracy = static_cast<double>(wins) / static_cast<double>(m.pairs);
  return m;
}

SelectionMetrics evaluate_selection(const CoherenceModel& model,
                                    const std::vector<RankingInstance>& data) {
  std::vector<std::vector<double>> scores;
  scores.reserve(data.size());
  for (const auto& r : data) {
    std::vector<Turn> cands;
    for (const auto& c : r.candidates) cands.push_back(c.turn);
    scores.push_back(model.score_candidates(r.context, cands));
  }
  return selection_metrics(data, scores);
}

RatingMetrics evaluate_rating(const CoherenceModel& model,
                              const std::vector<RatedInstance>& data, GainMode gain) {
  RatingMetrics m;
  std::size_t correct = 0;
  for (const auto& r : data) {
    std::vector<Turn> cands;
    std::vector<double> ratings;
    for (const auto& c : r.candidates) {
      cands.push_back(c.turn);
      ratings.push_back(c.mean_rating);
    }
    const auto scores = model.score_candidates(r.context, cands);
    const auto pc = rated_pair_accuracy(scores, ratings);
    correct += pc.correct;
    m.pairs += pc.total;
    const auto ranked = ranked_list(scores, dynamic_relevance(ratings));
    m.mrr += mrr(ranked);
    m.r1 += recall_at_k(ranked, 1);
    m.ndcg += ndcg(ranked_list(scores, ratings), gain);
  }
  m.instances = data.size();
  if (m.instances) {
    const auto n = static_cast<double>(m.instances);
    m.mrr /= n;
    m.r1 /= n;
    m.ndcg /= n;
  }
  if (m.pairs) m.accuracy = static_cast<double>(correct) / static_cast<double>(m.pairs);
  return m;
}

}  // namespace dcoh
