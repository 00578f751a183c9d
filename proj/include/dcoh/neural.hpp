#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dcoh/engine.hpp"
#include "dcoh/linearizer.hpp"
#include "json.hpp"

namespace dcoh {

struct NeuralConfig {
  Channels channels{.word = false, .role = false, .da = true, .turn = true};
  std::size_t emb_dim_word = 300;
  std::size_t emb_dim_other = 50;
  std::size_t gru_layers = 2;
  std::size_t gru_hidden = 512;  // per direction
  std::size_t head_hidden = 256;
  double lr = 0.0005;
  std::size_t batch = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  double margin = 0.5;
  std::uint64_t seed = 0;

  void check() const;
  bool operator==(const NeuralConfig&) const = default;
};

nlohmann::json to_json(const NeuralConfig& c);
NeuralConfig neural_config_from_json(const nlohmann::json& j);

/// Vocabulary sizes of the enabled input channels.
struct ChannelSizes {
  std::size_t words = 0;
  std::size_t roles = 0;
  std::size_t das = 0;  // IOB2-expanded when entity channels are on
  std::size_t turns = 0;

  static ChannelSizes from(const Vocabularies& v, const Channels& c);
};

/// Embeddings -> stacked bidirectional GRU -> mean pooling -> affine, ReLU,
/// affine -> scalar score.
///
/// The scorer only fixes the parameter layout; parameter values live in a
/// ParamSet so the same code runs in float (training) and double (gradient
/// checks).
template <typename T>
class BiGruScorer {
 public:
  BiGruScorer(NeuralConfig cfg, ChannelSizes sizes);

  const NeuralConfig& config() const { return cfg_; }
  const ChannelSizes& sizes() const { return sizes_; }

  /// Parameter tensors in checkpoint order, zero-initialized.
  ParamSet<T> make_params() const;
  /// Seeded initialization: embeddings U(-0.1, 0.1), GRU and head weights
  /// U(-1/sqrt(fan), 1/sqrt(fan)) with fan the GRU hidden size or head input
  /// size, biases zero.
  ParamSet<T> init_params(std::uint64_t seed) const;

  struct Cache;

  /// Score of one stream. With `cache`, keeps what backward needs.
  T forward(const ParamSet<T>& p, const TokenStream& s, Cache* cache = nullptr) const;

  /// Accumulates d(score)/d(params) * dscore into `grads`.
  void backward(const ParamSet<T>& p, const TokenStream& s, const Cache& cache, T dscore,
                ParamSet<T>& grads) const;

  struct Cache {
    Mat<T> emb;                              // L x D
    std::vector<Mat<T>> layer_out;           // per layer L x 2H
    std::vector<GruSequenceCache<T>> fwd;    // per layer
    std::vector<GruSequenceCache<T>> bwd;
    Vec<T> pooled, pre_act, hidden;
  };

 private:
  struct Layer {
    std::size_t fW, fU, fb, bW, bU, bb;
  };
  void check_stream(const TokenStream& s) const;

  NeuralConfig cfg_;
  ChannelSizes sizes_;
  std::size_t input_dim_ = 0;
  // Tensor indices; npos for disabled channels.
  std::size_t emb_word_, emb_role_, emb_da_, emb_turn_;
  std::vector<Layer> layers_;
  std::size_t head_W1_, head_b1_, head_w2_, head_b2_;
};

extern template class BiGruScorer<float>;
extern template class BiGruScorer<double>;

}  // namespace dcoh
