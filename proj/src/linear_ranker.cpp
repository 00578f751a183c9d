#include "dcoh/models.hpp"

#include <cmath>
#include <numeric>

namespace dcoh {

nlohmann::json to_json(const LinearConfig& c) {
  return {{"features", to_string(c.features)},
          {"transition_length", c.transitions.length},
          {"saliency", c.transitions.saliency},
          {"l2", c.l2},
          {"epochs", c.epochs},
          {"seed", c.seed}};
}

LinearConfig linear_config_from_json(const nlohmann::json& j) {
  LinearConfig c;
  try {
    c.features = parse_grid_features(j.at("features").get<std::string>());
    c.transitions.length = j.at("transition_length").get<std::size_t>();
    c.transitions.saliency = j.at("saliency").get<std::size_t>();
    c.l2 = j.at("l2").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("linear config: ") + e.what());
  }
  c.transitions.check();
  return c;
}

LinearModel::LinearModel(LinearConfig cfg, Vocab das, std::vector<float> weights)
    : cfg_(std::move(cfg)), das_(std::move(das)), weights_(std::move(weights)) {
  cfg_.transitions.check();
  if (weights_.size() != feature_dim(cfg_.features, cfg_.transitions, das_))
    throw DataError("linear model: weight vector length does not match feature space");
}

std::vector<double> LinearModel::features(std::span<const Turn> context,
                                          const Turn& candidate) const {
  std::vector<Turn> all(context.begin(), context.end());
  all.push_back(candidate);
  return grid_features(all, cfg_.features, cfg_.transitions, das_);
}

double LinearModel::score(std::span<const Turn> context, const Turn& candidate) const {
  const auto f = features(context, candidate);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += static_cast<double>(weights_[i]) * f[i];
  return s;
}

std::vector<double> train_linear_ranker(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
    double l2, std::size_t epochs, std::uint64_t seed) {
  if (pairs.empty()) throw DataError("train_linear_ranker: no pairs");
  if (!(l2 > 0.0)) throw std::invalid_argument("train_linear_ranker: l2 must be > 0");
  const std::size_t dim = pairs.front().first.size();
  std::vector<std::vector<double>> diffs;
  diffs.reserve(pairs.size());
  for (const auto& [pos, neg] : pairs) {
    if (pos.size() != dim || neg.size() != dim)
      throw DataError("train_linear_ranker: inconsistent feature dimensions");
    std::vector<double> d(dim);
    for (std::size_t i = 0; i < dim; ++i) d[i] = pos[i] - neg[i];
    diffs.push_back(std::move(d));
  }

  // sum hinge + l2 |w|^2 = N * (mean hinge + lambda/2 |w|^2), lambda = 2 l2 / N.
  const double lambda = 2.0 * l2 / static_cast<double>(diffs.size());
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> w(dim, 0.0);
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t t = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    Rng rng(derive_seed(seed, "linear-epoch:" + std::to_string(e)));
    rng.shuffle(order);
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto& d = diffs[i];
      const double margin = std::inner_product(w.begin(), w.end(), d.begin(), 0.0);
      const double shrink = 1.0 - eta * lambda;
      for (auto& x : w) x *= shrink;
      if (margin < 1.0)
        for (std::size_t j = 0; j < dim; ++j) w[j] += eta * d[j];
      const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (norm > radius)
        for (auto& x : w) x *= radius / norm;
    }
  }
  return w;
}

LinearModel train_linear_model(const std::vector<RankingInstance>& train, const Vocab& das,
                               const LinearConfig& cfg) {
  LinearModel shape(cfg, das, std::vector<float>(feature_dim(cfg.features, cfg.transitions, das)));
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (const auto& r : train) {
    const auto pos = shape.features(r.context, r.candidates[r.positive_position].turn);
    for (std::size_t c = 0; c < r.candidates.size(); ++c)
      if (c != r.positive_position)
        pairs.emplace_back(pos, shape.features(r.context, r.candidates[c].turn));
  }
  const auto w = train_linear_ranker(pairs, cfg.l2, cfg.epochs, cfg.seed);
  return LinearModel(cfg, das, std::vector<float>(w.begin(), w.end()));
}

}  // namespace dcoh
