#include "dcoh/swapgen.hpp"

#include <algorithm>
#include <set>

#include "dcoh/common.hpp"

namespace dcoh {

using nlohmann::json;

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Internal: return "internal";
    case Provenance::External: return "external";
  }
  return "?";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "original") return Provenance::Original;
  if (s == "internal") return Provenance::Internal;
  if (s == "external") return Provenance::External;
  throw DataError("invalid provenance '" + std::string(s) +
                  "' (expected original|internal|external)");
}

std::vector<InsertionPoint> gen_insertion_points(const Dialogue& d, std::size_t n,
                                                 const ContextRange& range,
                                                 std::uint64_t seed,
                                                 std::size_t min_turns_after) {
  const std::size_t turns = d.turns.size();
  return gen_insertion_points(d, n, range, seed, [&](std::size_t p) {
    return turns - 1 - p >= min_turns_after;
  });
}

std::vector<InsertionPoint> gen_insertion_points(
    const Dialogue& d, std::size_t n, const ContextRange& range, std::uint64_t seed,
    const std::function<bool(std::size_t)>& admit) {
  std::vector<std::size_t> admissible;
  const std::size_t turns = d.turns.size();
  for (std::size_t p = std::max<std::size_t>(1, range.min); p < turns && p <= range.max; ++p)
    if (!admit || admit(p)) admissible.push_back(p);
  if (admissible.empty())
    throw DataError("dialogue '" + d.id + "': no admissible insertion point (" +
                    std::to_string(turns) + " turns)");
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(admissible.size(),
                                              std::min(n, admissible.size()));
  std::sort(picks.begin(), picks.end());
  std::vector<InsertionPoint> out;
  out.reserve(picks.size());
  for (auto i : picks) out.push_back({d.id, admissible[i]});
  return out;
}

SplitIndex::SplitIndex(const Corpus& split) : corpus_(&split) {
  for (std::size_t d = 0; d < split.size(); ++d) {
    if (!by_id_.emplace(split[d].id, d).second)
      throw DataError("duplicate dialogue id '" + split[d].id + "' in split");
    first_.push_back(flat_.size());
    for (std::size_t t = 0; t < split[d].turns.size(); ++t) flat_.emplace_back(d, t);
  }
  first_.push_back(flat_.size());
}

const Dialogue& SplitIndex::dialogue(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataError("dialogue '" + id + "' not in split");
  return (*corpus_)[it->second];
}

std::size_t SplitIndex::turns_outside(const std::string& id) const {
  return flat_.size() - dialogue(id).turns.size();
}

std::vector<Candidate> sample_negatives(const InsertionPoint& point, Provenance mode,
                                        std::size_t count, const SplitIndex& split,
                                        std::uint64_t seed) {
  const Dialogue& src = split.dialogue(point.dialogue_id);
  const std::size_t p = point.positive_idx();
  if (p < 1 || p >= src.turns.size())
    throw DataError("insertion point out of range for '" + src.id + "'");
  const Turn& positive = src.turns[p];
  Rng rng(seed);
  std::vector<Candidate> out;
  if (count == 0) return out;

  if (mode == Provenance::Internal) {
    std::vector<std::size_t> pool;
    for (std::size_t j = p + 1; j < src.turns.size(); ++j)
      if (!src.turns[j].same_annotation(positive)) pool.push_back(j);
    if (pool.size() < count)
      throw DataError("dialogue '" + src.id + "': internal pool of " +
                      std::to_string(pool.size()) + " turns after index " +
                      std::to_string(p) + " < " + std::to_string(count));
    for (auto i : rng.sample_without_replacement(pool.size(), count))
      out.push_back({src.turns[pool[i]], Provenance::Internal, src.id, pool[i]});
    return out;
  }
  if (mode != Provenance::External)
    throw std::invalid_argument("sample_negatives: mode must be internal or external");

  // Flat index over the split with the source dialogue's block removed.
  const std::size_t d = split.by_id_.at(src.id);
  const std::size_t lo = split.first_[d], hi = split.first_[d + 1];
  const std::size_t outside = split.flat_.size() - (hi - lo);
  auto flat_at = [&](std::size_t u) { return split.flat_[u < lo ? u : u + (hi - lo)]; };
  auto eligible = [&](std::size_t u) {
    auto [dd, tt] = flat_at(u);
    return !split.corpus()[dd].turns[tt].same_annotation(positive);
  };
  if (outside < count)
    throw DataError("dialogue '" + src.id + "': external pool of " +
                    std::to_string(outside) + " turns < " + std::to_string(count));

  std::set<std::size_t> chosen;
  std::vector<std::size_t> order;
  const std::size_t max_attempts = 64 * count + 1024;
  for (std::size_t attempt = 0; order.size() < count && attempt < max_attempts; ++attempt) {
    const auto u = static_cast<std::size_t>(rng.uniform_index(outside));
    if (chosen.count(u) || !eligible(u)) continue;
    chosen.insert(u);
    order.push_back(u);
  }
  if (order.size() < count) {
    // Pool dominated by duplicates of the positive: draw from the exact
    // eligible list instead.
    std::vector<std::size_t> pool;
    for (std::size_t u = 0; u < outside; ++u)
      if (!chosen.count(u) && eligible(u)) pool.push_back(u);
    const std::size_t need = count - order.size();
    if (pool.size() < need)
      throw DataError("dialogue '" + src.id + "': external pool exhausted");
    for (auto i : rng.sample_without_replacement(pool.size(), need)) order.push_back(pool[i]);
  }
  for (auto u : order) {
    auto [dd, tt] = flat_at(u);
    const auto& other = split.corpus()[dd];
    out.push_back({other.turns[tt], Provenance::External, other.id, tt});
  }
  return out;
}

std::string SelectionConfig::mode() const {
  if (internal_negatives && external_negatives) return "mixed";
  return internal_negatives ? "internal" : "external";
}

std::size_t SelectionDataset::pairs() const {
  std::size_t n = 0;
  for (const auto& r : instances) n += r.negatives();
  return n;
}

SelectionDataset build_selection_dataset(const Corpus& split, const SelectionConfig& cfg) {
  if (split.empty()) throw DataError("build_selection_dataset: empty split");
  if (cfg.negatives() == 0) throw DataError("build_selection_dataset: no negatives requested");
  // Sorting by id makes the output independent of input order, including
  // the flat turn index used for external sampling.
  Corpus sorted = split;
  std::sort(sorted.begin(), sorted.end(),
            [](const Dialogue& a, const Dialogue& b) { return a.id < b.id; });
  SplitIndex index(sorted);
  std::vector<const Dialogue*> order;
  for (const auto& d : sorted) order.push_back(&d);

  SelectionDataset out;
  for (const Dialogue* d : order) {
    std::vector<InsertionPoint> points;
    try {
      // Internal sampling needs enough later turns that differ from the
      // positive.
      points = gen_insertion_points(
          *d, cfg.points_per_dialogue, cfg.context, derive_seed(cfg.seed, "points:" + d->id),
          [&](std::size_t p) {
            if (cfg.internal_negatives == 0) return true;
            std::size_t eligible = 0;
            for (std::size_t j = p + 1; j < d->turns.size(); ++j)
              eligible += !d->turns[j].same_annotation(d->turns[p]);
            return eligible >= cfg.internal_negatives;
          });
    } catch (const DataError&) {
      out.skipped.push_back(d->id);
      continue;
    }
    for (const auto& pt : points) {
      const auto tag = d->id + "#" + std::to_string(pt.context_len);
      RankingInstance r;
      r.id = tag;
      r.dialogue_id = d->id;
      r.context.assign(d->turns.begin(),
                       d->turns.begin() + static_cast<std::ptrdiff_t>(pt.context_len));
      r.candidates.push_back({d->turns[pt.positive_idx()], Provenance::Original, d->id,
                              pt.positive_idx()});
      for (auto& c : sample_negatives(pt, Provenance::Internal, cfg.internal_negatives,
                                      index, derive_seed(cfg.seed, "internal:" + tag)))
        r.candidates.push_back(std::move(c));
      for (auto& c : sample_negatives(pt, Provenance::External, cfg.external_negatives,
                                      index, derive_seed(cfg.seed, "external:" + tag)))
        r.candidates.push_back(std::move(c));
      Rng rng(derive_seed(cfg.seed, "order:" + tag));
      rng.shuffle(r.candidates);
      for (std::size_t i = 0; i < r.candidates.size(); ++i)
        if (r.candidates[i].provenance == Provenance::Original) r.positive_position = i;
      out.instances.push_back(std::move(r));
    }
  }
  out.manifest = {
      {"seed", cfg.seed},
      {"mode", cfg.mode()},
      {"points_per_dialogue", cfg.points_per_dialogue},
      {"internal_negatives", cfg.internal_negatives},
      {"external_negatives", cfg.external_negatives},
      {"context_min", cfg.context.min},
      {"context_max", cfg.context.max == std::numeric_limits<std::size_t>::max()
                          ? json(nullptr)
                          : json(cfg.context.max)},
      {"dialogues", split.size()},
      {"skipped_dialogues", out.skipped},
      {"instances", out.instances.size()},
      {"pairs", out.pairs()},
  };
  return out;
}

// ---------------------------------------------------------------- IO

json to_json(const RankingInstance& r) {
  json ctx = json::array();
  for (const auto& t : r.context) ctx.push_back(to_json(t));
  json cands = json::array();
  for (const auto& c : r.candidates)
    cands.push_back({{"turn", to_json(c.turn)},
                     {"provenance", to_string(c.provenance)},
                     {"source_dialogue", c.source_dialogue},
                     {"source_turn", c.source_turn}});
  return {{"id", r.id},
          {"dialogue_id", r.dialogue_id},
          {"context", std::move(ctx)},
          {"candidates", std::move(cands)},
          {"positive_position", r.positive_position}};
}

RankingInstance ranking_instance_from_json(const json& j) {
  RankingInstance r;
  try {
    r.id = j.at("id").get<std::string>();
    r.dialogue_id = j.value("dialogue_id", std::string{});
    for (const auto& t : j.at("context")) r.context.push_back(turn_from_json(t));
    for (const auto& c : j.at("candidates")) {
      Candidate cand;
      cand.turn = turn_from_json(c.at("turn"));
      cand.provenance = parse_provenance(c.at("provenance").get<std::string>());
      cand.source_dialogue = c.value("source_dialogue", std::string{});
      cand.source_turn = c.value("source_turn", std::size_t{0});
      r.candidates.push_back(std::move(cand));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("ranking instance: ") + e.what());
  }
  if (r.context.empty()) throw DataError("ranking instance '" + r.id + "': empty context");
  std::size_t originals = 0;
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    if (r.candidates[i].provenance == Provenance::Original) {
      ++originals;
      r.positive_position = i;
    }
  if (originals != 1 || r.candidates.size() < 2)
    throw DataError("ranking instance '" + r.id +
                    "': need exactly one original candidate and at least one negative");
  return r;
}

std::string serialize_instances(const std::vector<RankingInstance>& v) {
  std::string out;
  for (const auto& r : v) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<RankingInstance> parse_instances(std::string_view jsonl) {
  std::vector<RankingInstance> out;
  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(ranking_instance_from_json(json::parse(lines[i])));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(i + 1) + ": parse error: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("empty dataset");
  return out;
}

std::vector<RankingInstance> load_instances(const std::string& path) {
  try {
    return parse_instances(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Corpus select_split(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const Dialogue*> by_id;
  for (const auto& d : corpus) by_id.emplace(d.id, &d);
  Corpus out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("split references unknown dialogue '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

// ------------------------------------------------------ rated test set

namespace {

RatedInstance rated_from_json(const json& j, bool strict) {
  RatedInstance r;
  try {
    r.id = j.at("id").get<std::string>();
    for (const auto& t : j.at("context")) r.context.push_back(turn_from_json(t));
    for (const auto& c : j.at("candidates")) {
      RatedCandidate rc;
      rc.turn = turn_from_json(c.at("turn"));
      rc.provenance = parse_provenance(c.at("provenance").get<std::string>());
      if (c.contains("ratings")) {
        rc.ratings = c.at("ratings").get<std::vector<int>>();
        if (rc.ratings.empty()) throw DataError("empty ratings list");
        double sum = 0.0;
        for (int x : rc.ratings) {
          if (x < 1 || x > 3)
            throw DataError("rating " + std::to_string(x) + " outside {1,2,3}");
          sum += x;
        }
        rc.mean_rating = sum / static_cast<double>(rc.ratings.size());
      } else {
        rc.mean_rating = c.at("mean_rating").get<double>();
        if (!(rc.mean_rating >= 1.0 && rc.mean_rating <= 3.0))
          throw DataError("mean_rating outside [1,3]");
      }
      r.candidates.push_back(std::move(rc));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("rated instance: ") + e.what());
  }
  if (r.context.empty()) throw DataError("rated instance '" + r.id + "': empty context");
  if (r.candidates.empty()) throw DataError("rated instance '" + r.id + "': no candidates");
  if (strict) {
    std::size_t n[3] = {0, 0, 0};
    for (const auto& c : r.candidates) ++n[static_cast<int>(c.provenance)];
    if (r.candidates.size() != 7 || n[0] != 1 || n[1] != 3 || n[2] != 3)
      throw DataError("rated instance '" + r.id + "': expected 7 candidates "
                      "(1 original, 3 internal, 3 external), got " +
                      std::to_string(r.candidates.size()));
  }
  return r;
}

}  // namespace

std::vector<RatedInstance> parse_rated_testset(std::string_view jsonl, bool strict) {
  std::vector<RatedInstance> out;
  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(rated_from_json(json::parse(lines[i]), strict));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(i + 1) + ": parse error: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("empty rated test set");
  return out;
}

std::vector<RatedInstance> load_rated_testset(const std::string& path, bool strict) {
  try {
    return parse_rated_testset(read_file(path), strict);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

json to_json(const RatedInstance& r) {
  json ctx = json::array();
  for (const auto& t : r.context) ctx.push_back(to_json(t));
  json cands = json::array();
  for (const auto& c : r.candidates) {
    json jc = {{"turn", to_json(c.turn)}, {"provenance", to_string(c.provenance)}};
    if (!c.ratings.empty()) jc["ratings"] = c.ratings;
    else jc["mean_rating"] = c.mean_rating;
    cands.push_back(std::move(jc));
  }
  return {{"id", r.id}, {"context", std::move(ctx)}, {"candidates", std::move(cands)}};
}

}  // namespace dcoh
