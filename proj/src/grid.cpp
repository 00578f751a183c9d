#include "dcoh/grid.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "dcoh/common.hpp"

namespace dcoh {

std::size_t EntityGrid::mentions(std::size_t entity) const {
  std::size_t n = 0;
  for (auto r : columns[entity]) n += r != Role::Absent;
  return n;
}

void TransitionConfig::check() const {
  if (length < 2) throw std::invalid_argument("transition length must be >= 2");
  if (saliency < 1) throw std::invalid_argument("saliency must be >= 1");
}

EntityGrid build_grid(std::span<const Turn> turns) {
  EntityGrid g;
  g.n_turns = turns.size();
  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    for (const auto& seg : turns[t].segments) {
      for (const auto& m : seg.entities) {
        auto [it, fresh] = column_of.emplace(m.head, g.columns.size());
        if (fresh) {
          g.entities.push_back(m.head);
          g.columns.emplace_back(turns.size(), Role::Absent);
        }
        auto& cell = g.columns[it->second][t];
        // S > O > X > Absent follows enum order.
        if (static_cast<int>(m.role) < static_cast<int>(cell)) cell = m.role;
      }
    }
  }
  return g;
}

EntityGrid build_grid(const Dialogue& d) { return build_grid(std::span(d.turns)); }

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

void normalize(std::vector<double>& v, std::size_t total) {
  if (total == 0) return;
  for (auto& x : v) x /= static_cast<double>(total);
}

std::vector<std::size_t> da_indices(const std::vector<std::string>& seq,
                                    const Vocab& das) {
  std::vector<std::size_t> idx;
  idx.reserve(seq.size());
  for (const auto& tag : seq) idx.push_back(static_cast<std::size_t>(das.at(tag, "DA tag")));
  return idx;
}

std::vector<std::size_t> role_indices(const std::vector<Role>& column) {
  std::vector<std::size_t> idx;
  idx.reserve(column.size());
  for (auto r : column) idx.push_back(static_cast<std::size_t>(r));
  return idx;
}

}  // namespace

std::vector<double> entity_transition_features(const EntityGrid& g,
                                               const TransitionConfig& cfg) {
  cfg.check();
  const std::size_t k = cfg.length;
  std::vector<double> v(ipow(kRoleAlphabet, k), 0.0);
  if (g.n_turns < k) return v;
  std::size_t total = 0;
  for (std::size_t e = 0; e < g.n_entities(); ++e) {
    if (g.mentions(e) < cfg.saliency) continue;
    const auto& col = g.columns[e];
    for (std::size_t t = 0; t + k <= g.n_turns; ++t) {
      std::size_t index = 0;
      for (std::size_t j = 0; j < k; ++j)
        index = index * kRoleAlphabet + static_cast<std::size_t>(col[t + j]);
      v[index] += 1.0;
      ++total;
    }
  }
  normalize(v, total);
  return v;
}

std::vector<std::string> da_sequence(std::span<const Turn> turns) {
  std::vector<std::string> seq;
  for (const auto& t : turns)
    for (const auto& s : t.segments) seq.push_back(s.da);
  return seq;
}

std::vector<std::string> da_sequence(const Dialogue& d) {
  return da_sequence(std::span(d.turns));
}

std::vector<double> da_transition_features(const std::vector<std::string>& seq,
                                           const TransitionConfig& cfg,
                                           const Vocab& das) {
  cfg.check();
  const std::size_t k = cfg.length;
  const std::size_t base = das.size();
  std::vector<double> v(ipow(base, k), 0.0);
  const auto idx = da_indices(seq, das);
  if (idx.size() < k) return v;
  std::size_t total = 0;
  for (std::size_t i = 0; i + k <= idx.size(); ++i) {
    std::size_t index = 0;
    for (std::size_t j = 0; j < k; ++j) index = index * base + idx[i + j];
    v[index] += 1.0;
    ++total;
  }
  normalize(v, total);
  return v;
}

std::vector<double> joint_features(const std::vector<double>& entity,
                                   const std::vector<double>& da) {
  std::vector<double> out;
  out.reserve(entity.size() + da.size());
  out.insert(out.end(), entity.begin(), entity.end());
  out.insert(out.end(), da.begin(), da.end());
  return out;
}

std::vector<std::string> entity_feature_names(const TransitionConfig& cfg) {
  const std::size_t n = ipow(kRoleAlphabet, cfg.length);
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string s(cfg.length, '?');
    std::size_t x = i;
    for (std::size_t j = cfg.length; j-- > 0;) {
      s[j] = role_char(static_cast<Role>(x % kRoleAlphabet));
      x /= kRoleAlphabet;
    }
    names.push_back("ent:" + s);
  }
  return names;
}

std::vector<std::string> da_feature_names(const TransitionConfig& cfg,
                                          const Vocab& das) {
  const std::size_t base = das.size();
  const std::size_t n = ipow(base, cfg.length);
  std::vector<std::string> names;
  names.reserve(n);
  std::vector<std::size_t> digits(cfg.length);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x = i;
    for (std::size_t j = cfg.length; j-- > 0;) {
      digits[j] = x % base;
      x /= base;
    }
    std::string s = "da:";
    for (std::size_t j = 0; j < cfg.length; ++j) {
      if (j) s += '>';
      s += das.token(digits[j]);
    }
    names.push_back(std::move(s));
  }
  return names;
}

std::size_t feature_dim(GridFeatures kind, const TransitionConfig& cfg,
                        const Vocab& das) {
  const std::size_t ent = ipow(kRoleAlphabet, cfg.length);
  const std::size_t da = ipow(das.size(), cfg.length);
  switch (kind) {
    case GridFeatures::Entity: return ent;
    case GridFeatures::Da: return da;
    case GridFeatures::Joint: return ent + da;
  }
  return 0;
}

std::vector<double> grid_features(std::span<const Turn> turns, GridFeatures kind,
                                  const TransitionConfig& cfg, const Vocab& das) {
  switch (kind) {
    case GridFeatures::Entity:
      return entity_transition_features(build_grid(turns), cfg);
    case GridFeatures::Da:
      return da_transition_features(da_sequence(turns), cfg, das);
    case GridFeatures::Joint:
      return joint_features(entity_transition_features(build_grid(turns), cfg),
                            da_transition_features(da_sequence(turns), cfg, das));
  }
  return {};
}

std::vector<std::string> grid_feature_names(GridFeatures kind,
                                            const TransitionConfig& cfg,
                                            const Vocab& das) {
  switch (kind) {
    case GridFeatures::Entity: return entity_feature_names(cfg);
    case GridFeatures::Da: return da_feature_names(cfg, das);
    case GridFeatures::Joint: {
      auto names = entity_feature_names(cfg);
      auto d = da_feature_names(cfg, das);
      names.insert(names.end(), d.begin(), d.end());
      return names;
    }
  }
  return {};
}

std::string to_string(GridFeatures kind) {
  switch (kind) {
    case GridFeatures::Entity: return "entity";
    case GridFeatures::Da: return "da";
    case GridFeatures::Joint: return "joint";
  }
  return "?";
}

GridFeatures parse_grid_features(std::string_view s) {
  if (s == "entity") return GridFeatures::Entity;
  if (s == "da") return GridFeatures::Da;
  if (s == "joint") return GridFeatures::Joint;
  throw DataError("unknown grid feature set '" + std::string(s) +
                  "' (expected entity|da|joint)");
}

std::string features_tsv(const Corpus& corpus, GridFeatures kind,
                         const TransitionConfig& cfg, const Vocab& das) {
  std::ostringstream out;
  out.precision(17);
  out << "dialogue_id";
  for (const auto& n : grid_feature_names(kind, cfg, das)) out << '\t' << n;
  out << '\n';
  for (const auto& d : corpus) {
    out << d.id;
    for (double x : grid_features(d.turns, kind, cfg, das)) out << '\t' << x;
    out << '\n';
  }
  return out.str();
}

// ------------------------------------------------- generative scoring

TransitionModel::TransitionModel(std::size_t alphabet, std::size_t history)
    : alphabet_(alphabet), history_(history) {
  if (alphabet == 0) throw std::invalid_argument("TransitionModel: empty alphabet");
}

void TransitionModel::observe(const std::vector<std::size_t>& sequence) {
  for (std::size_t i = history_; i < sequence.size(); ++i) {
    std::vector<std::size_t> h(sequence.begin() + static_cast<std::ptrdiff_t>(i - history_),
                               sequence.begin() + static_cast<std::ptrdiff_t>(i));
    auto& [total, next] = counts_[h];
    if (next.empty()) next.assign(alphabet_, 0);
    ++total;
    ++next.at(sequence[i]);
  }
}

double TransitionModel::probability(std::span<const std::size_t> history,
                                    std::size_t next) const {
  std::vector<std::size_t> h(history.begin(), history.end());
  std::size_t total = 0, hit = 0;
  if (auto it = counts_.find(h); it != counts_.end()) {
    total = it->second.first;
    hit = it->second.second.at(next);
  }
  return (static_cast<double>(hit) + 1.0) /
         (static_cast<double>(total) + static_cast<double>(alphabet_));
}

CoherenceStats CoherenceStats::estimate(const Corpus& corpus,
                                        const TransitionConfig& cfg,
                                        const Vocab& das) {
  cfg.check();
  CoherenceStats s{TransitionModel(kRoleAlphabet, cfg.length - 1),
                   TransitionModel(das.size(), cfg.length - 1), das, cfg};
  for (const auto& d : corpus) {
    const auto g = build_grid(d);
    for (std::size_t e = 0; e < g.n_entities(); ++e)
      if (g.mentions(e) >= cfg.saliency) s.entity.observe(role_indices(g.columns[e]));
    s.da.observe(da_indices(da_sequence(d), das));
  }
  return s;
}

namespace {

// Sum of log p over full-history windows; adds the number of terms to `n`.
double sum_log_conditionals(const TransitionModel& model,
                            const std::vector<std::size_t>& seq, std::size_t& n) {
  const std::size_t h = model.history();
  double sum = 0.0;
  for (std::size_t i = h; i < seq.size(); ++i) {
    sum += std::log(model.probability(std::span(seq).subspan(i - h, h), seq[i]));
    ++n;
  }
  return sum;
}

}  // namespace

double entity_log_coherence(const Dialogue& d, const CoherenceStats& stats) {
  const auto g = build_grid(d);
  std::size_t n = 0;
  double sum = 0.0;
  for (std::size_t e = 0; e < g.n_entities(); ++e)
    if (g.mentions(e) >= stats.cfg.saliency)
      sum += sum_log_conditionals(stats.entity, role_indices(g.columns[e]), n);
  return n ? sum / static_cast<double>(n) : 0.0;
}

double da_log_coherence(const Dialogue& d, const CoherenceStats& stats) {
  std::size_t n = 0;
  const double sum =
      sum_log_conditionals(stats.da, da_indices(da_sequence(d), stats.das), n);
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace dcoh
