#include "dcoh/neural.hpp"

#include <cmath>
#include <limits>

namespace dcoh {

namespace {
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
}

void NeuralConfig::check() const {
  channels.check();
  if (!emb_dim_word || !emb_dim_other || !gru_layers || !gru_hidden || !head_hidden ||
      !batch || !max_epochs)
    throw std::invalid_argument("neural config: dimensions and counts must be > 0");
  if (!(lr > 0.0)) throw std::invalid_argument("neural config: lr must be > 0");
  if (!(margin > 0.0)) throw std::invalid_argument("neural config: margin must be > 0");
}

nlohmann::json to_json(const NeuralConfig& c) {
  return {{"channels", c.channels.to_string()},
          {"emb_dim_word", c.emb_dim_word},
          {"emb_dim_other", c.emb_dim_other},
          {"gru_layers", c.gru_layers},
          {"gru_hidden", c.gru_hidden},
          {"head_hidden", c.head_hidden},
          {"lr", c.lr},
          {"batch", c.batch},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"margin", c.margin},
          {"seed", c.seed}};
}

NeuralConfig neural_config_from_json(const nlohmann::json& j) {
  NeuralConfig c;
  try {
    c.channels = Channels::parse(j.at("channels").get<std::string>());
    c.emb_dim_word = j.at("emb_dim_word").get<std::size_t>();
    c.emb_dim_other = j.at("emb_dim_other").get<std::size_t>();
    c.gru_layers = j.at("gru_layers").get<std::size_t>();
    c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
    c.head_hidden = j.at("head_hidden").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.batch = j.at("batch").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.margin = j.at("margin").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("neural config: ") + e.what());
  }
  c.check();
  return c;
}

ChannelSizes ChannelSizes::from(const Vocabularies& v, const Channels& c) {
  ChannelSizes s;
  if (c.word) s.words = v.words.size();
  if (c.role) s.roles = v.roles.size();
  if (c.da) s.das = c.entities() ? v.das_iob.size() : v.das.size();
  if (c.turn) s.turns = v.turns.size();
  return s;
}

template <typename T>
BiGruScorer<T>::BiGruScorer(NeuralConfig cfg, ChannelSizes sizes)
    : cfg_(std::move(cfg)), sizes_(sizes) {
  cfg_.check();
  const auto& c = cfg_.channels;
  if ((c.word && !sizes_.words) || (c.role && !sizes_.roles) || (c.da && !sizes_.das) ||
      (c.turn && !sizes_.turns))
    throw std::invalid_argument("BiGruScorer: empty vocabulary for an enabled channel");
  // Layout is recorded by index; make_params() creates tensors in this order.
  std::size_t next = 0;
  emb_word_ = c.word ? next++ : npos;
  emb_role_ = c.role ? next++ : npos;
  emb_da_ = c.da ? next++ : npos;
  emb_turn_ = c.turn ? next++ : npos;
  input_dim_ = (c.word ? cfg_.emb_dim_word : 0) + (c.role ? cfg_.emb_dim_other : 0) +
               (c.da ? cfg_.emb_dim_other : 0) + (c.turn ? cfg_.emb_dim_other : 0);
  for (std::size_t l = 0; l < cfg_.gru_layers; ++l) {
    Layer L;
    L.fW = next++;
    L.fU = next++;
    L.fb = next++;
    L.bW = next++;
    L.bU = next++;
    L.bb = next++;
    layers_.push_back(L);
  }
  head_W1_ = next++;
  head_b1_ = next++;
  head_w2_ = next++;
  head_b2_ = next++;
}

template <typename T>
ParamSet<T> BiGruScorer<T>::make_params() const {
  ParamSet<T> p;
  const auto& c = cfg_.channels;
  if (c.word) p.add("emb.word", {sizes_.words, cfg_.emb_dim_word});
  if (c.role) p.add("emb.role", {sizes_.roles, cfg_.emb_dim_other});
  if (c.da) p.add("emb.da", {sizes_.das, cfg_.emb_dim_other});
  if (c.turn) p.add("emb.turn", {sizes_.turns, cfg_.emb_dim_other});
  const std::size_t H = cfg_.gru_hidden;
  for (std::size_t l = 0; l < cfg_.gru_layers; ++l) {
    const std::size_t in = l == 0 ? input_dim_ : 2 * H;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string pre = "gru.l" + std::to_string(l) + "." + dir + ".";
      p.add(pre + "W", {3 * H, in});
      p.add(pre + "U", {3 * H, H});
      p.add(pre + "b", {3 * H});
    }
  }
  p.add("head.W1", {cfg_.head_hidden, 2 * H});
  p.add("head.b1", {cfg_.head_hidden});
  p.add("head.w2", {cfg_.head_hidden});
  p.add("head.b2", {1});
  return p;
}

template <typename T>
ParamSet<T> BiGruScorer<T>::init_params(std::uint64_t seed) const {
  auto p = make_params();
  Rng rng(seed);
  for (auto i : {emb_word_, emb_role_, emb_da_, emb_turn_})
    if (i != npos) uniform_init(p[i], rng, 0.1);
  const double gru_bound = 1.0 / std::sqrt(static_cast<double>(cfg_.gru_hidden));
  for (const auto& L : layers_)
    for (auto i : {L.fW, L.fU, L.bW, L.bU}) uniform_init(p[i], rng, gru_bound);
  uniform_init(p[head_W1_], rng, 1.0 / std::sqrt(static_cast<double>(2 * cfg_.gru_hidden)));
  uniform_init(p[head_w2_], rng, 1.0 / std::sqrt(static_cast<double>(cfg_.head_hidden)));
  return p;
}

template <typename T>
void BiGruScorer<T>::check_stream(const TokenStream& s) const {
  const auto& c = cfg_.channels;
  if (s.channels != c) throw DataError("stream channels do not match the model");
  const std::size_t L = s.length();
  if (L == 0) throw DataError("empty token stream");
  auto check = [&](const std::vector<std::int32_t>& ids, bool on, std::size_t vocab,
                   const char* what) {
    if (!on) return;
    if (ids.size() != L) throw DataError(std::string("misaligned channel: ") + what);
    for (auto id : ids)
      if (id < 0 || static_cast<std::size_t>(id) >= vocab)
        throw DataError(std::string("id out of vocabulary range in channel ") + what);
  };
  check(s.word, c.word, sizes_.words, "word");
  check(s.role, c.role, sizes_.roles, "role");
  check(s.da, c.da, sizes_.das, "da");
  check(s.turn, c.turn, sizes_.turns, "turn");
}

template <typename T>
T BiGruScorer<T>::forward(const ParamSet<T>& p, const TokenStream& s, Cache* cache) const {
  check_stream(s);
  const auto L = static_cast<Eigen::Index>(s.length());
  const auto H = static_cast<Eigen::Index>(cfg_.gru_hidden);

  Mat<T> X(L, static_cast<Eigen::Index>(input_dim_));
  Eigen::Index col = 0;
  auto gather = [&](std::size_t idx, const std::vector<std::int32_t>& ids) {
    if (idx == npos) return;
    const auto E = p[idx].mat();
    for (Eigen::Index t = 0; t < L; ++t)
      X.row(t).segment(col, E.cols()) = E.row(ids[static_cast<std::size_t>(t)]);
    col += E.cols();
  };
  gather(emb_word_, s.word);
  gather(emb_role_, s.role);
  gather(emb_da_, s.da);
  gather(emb_turn_, s.turn);

  if (cache) {
    cache->layer_out.clear();
    cache->fwd.assign(layers_.size(), {});
    cache->bwd.assign(layers_.size(), {});
  }
  Mat<T> in = X;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& Ly = layers_[l];
    GruCellParams<T> pf{&p[Ly.fW], &p[Ly.fU], &p[Ly.fb]};
    GruCellParams<T> pb{&p[Ly.bW], &p[Ly.bU], &p[Ly.bb]};
    Mat<T> out(L, 2 * H);
    out.leftCols(H) = gru_sequence_forward<T>(in, pf, false, cache ? &cache->fwd[l] : nullptr);
    out.rightCols(H) = gru_sequence_forward<T>(in, pb, true, cache ? &cache->bwd[l] : nullptr);
    if (cache) cache->layer_out.push_back(out);
    in = std::move(out);
  }
  Vec<T> pooled = in.colwise().mean().transpose();
  Vec<T> pre = p[head_W1_].mat() * pooled + p[head_b1_].vec();
  Vec<T> hid = pre.cwiseMax(T(0));
  const T score = p[head_w2_].vec().dot(hid) + p[head_b2_].data[0];
  if (cache) {
    cache->emb = std::move(X);
    cache->pooled = std::move(pooled);
    cache->pre_act = std::move(pre);
    cache->hidden = std::move(hid);
  }
  return score;
}

template <typename T>
void BiGruScorer<T>::backward(const ParamSet<T>& p, const TokenStream& s, const Cache& c,
                              T dscore, ParamSet<T>& g) const {
  const auto L = static_cast<Eigen::Index>(s.length());
  const auto H = static_cast<Eigen::Index>(cfg_.gru_hidden);

  g[head_b2_].data[0] += dscore;
  g[head_w2_].vec() += dscore * c.hidden;
  Vec<T> dhid = dscore * p[head_w2_].vec();
  Vec<T> dpre = (c.pre_act.array() > T(0)).select(dhid, Vec<T>::Zero(dhid.size()));
  g[head_W1_].mat().noalias() += dpre * c.pooled.transpose();
  g[head_b1_].vec() += dpre;
  Vec<T> dpooled = p[head_W1_].mat().transpose() * dpre;

  Mat<T> dout = (dpooled / static_cast<T>(L)).transpose().replicate(L, 1);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& Ly = layers_[l];
    const Mat<T>& in = l == 0 ? c.emb : c.layer_out[l - 1];
    GruCellParams<T> pf{&p[Ly.fW], &p[Ly.fU], &p[Ly.fb]};
    GruCellParams<T> pb{&p[Ly.bW], &p[Ly.bU], &p[Ly.bb]};
    Mat<T> dfwd = dout.leftCols(H);
    Mat<T> dbwd = dout.rightCols(H);
    Mat<T> din = gru_sequence_backward<T>(in, dfwd, c.fwd[l], pf,
                                          {&g[Ly.fW], &g[Ly.fU], &g[Ly.fb]});
    din += gru_sequence_backward<T>(in, dbwd, c.bwd[l], pb,
                                    {&g[Ly.bW], &g[Ly.bU], &g[Ly.bb]});
    dout = std::move(din);
  }

  Eigen::Index col = 0;
  auto scatter = [&](std::size_t idx, const std::vector<std::int32_t>& ids) {
    if (idx == npos) return;
    auto G = g[idx].mat();
    for (Eigen::Index t = 0; t < L; ++t)
      G.row(ids[static_cast<std::size_t>(t)]) += dout.row(t).segment(col, G.cols());
    col += G.cols();
  };
  scatter(emb_word_, s.word);
  scatter(emb_role_, s.role);
  scatter(emb_da_, s.da);
  scatter(emb_turn_, s.turn);
}

template class BiGruScorer<float>;
template class BiGruScorer<double>;

}  // namespace dcoh
