#include "dcoh/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "dcoh/common.hpp"

namespace dcoh {

using nlohmann::json;

char speaker_char(Speaker s) { return s == Speaker::A ? 'A' : 'B'; }

char role_char(Role r) {
  switch (r) {
    case Role::S: return 'S';
    case Role::O: return 'O';
    case Role::X: return 'X';
    case Role::Absent: return '-';
  }
  return '?';
}

std::optional<Role> parse_mention_role(std::string_view s) {
  if (s == "S") return Role::S;
  if (s == "O") return Role::O;
  if (s == "X") return Role::X;
  return std::nullopt;
}

std::optional<Speaker> parse_speaker(std::string_view s) {
  if (s == "A") return Speaker::A;
  if (s == "B") return Speaker::B;
  return std::nullopt;
}

std::size_t Turn::mention_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.entities.size();
  return n;
}

bool Turn::same_annotation(const Turn& other) const {
  if (speaker != other.speaker || segments.size() != other.segments.size())
    return false;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].da != other.segments[i].da ||
        segments[i].entities != other.segments[i].entities)
      return false;
  }
  return true;
}

bool Tagset::contains(std::string_view label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

Tagset Tagset::load(const std::string& path) {
  Tagset t;
  std::set<std::string> seen;
  for (auto line : split_lines(read_file(path))) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    line = line.substr(first);
    if (!seen.insert(line).second)
      throw DataError("tagset " + path + ": duplicate label '" + line + "'");
    t.labels.push_back(line);
  }
  if (t.labels.empty()) throw DataError("tagset " + path + ": empty");
  return t;
}

// ---------------------------------------------------------------- JSON

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw DataError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + "." + key + ": missing");
  return *it;
}

std::string require_string(const json& obj, const char* key,
                           const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw DataError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const char* key,
                          const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_array()) throw DataError(where + "." + key + ": expected an array");
  return v;
}

Turn turn_from_json_at(const json& jt, const std::string& where) {
  Turn t;
  const auto spk = require_string(jt, "speaker", where);
  auto speaker = parse_speaker(spk);
  if (!speaker)
    throw DataError(where + ".speaker: invalid speaker '" + spk + "' (expected A|B)");
  t.speaker = *speaker;
  const auto& segs = require_array(jt, "segments", where);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto sw = where + ".segments[" + std::to_string(s) + "]";
    Segment seg;
    seg.da = require_string(segs[s], "da", sw);
    const auto& ents = require_array(segs[s], "entities", sw);
    for (std::size_t e = 0; e < ents.size(); ++e) {
      const auto ew = sw + ".entities[" + std::to_string(e) + "]";
      EntityMention m;
      m.head = lowercase(require_string(ents[e], "head", ew));
      const auto role = require_string(ents[e], "role", ew);
      auto r = parse_mention_role(role);
      if (!r)
        throw DataError(ew + ".role: invalid role '" + role + "' (expected S|O|X)");
      m.role = *r;
      seg.entities.push_back(std::move(m));
    }
    if (auto it = segs[s].find("text"); it != segs[s].end() && !it->is_null()) {
      if (!it->is_string()) throw DataError(sw + ".text: expected a string");
      seg.text = it->get<std::string>();
    }
    t.segments.push_back(std::move(seg));
  }
  return t;
}

}  // namespace

json to_json(const Turn& t) {
  json segs = json::array();
  for (const auto& s : t.segments) {
    json ents = json::array();
    for (const auto& e : s.entities)
      ents.push_back({{"head", e.head}, {"role", std::string(1, role_char(e.role))}});
    json js = {{"da", s.da}, {"entities", std::move(ents)}};
    if (s.text) js["text"] = *s.text;
    segs.push_back(std::move(js));
  }
  return {{"speaker", std::string(1, speaker_char(t.speaker))},
          {"segments", std::move(segs)}};
}

json to_json(const Dialogue& d) {
  json turns = json::array();
  for (const auto& t : d.turns) turns.push_back(to_json(t));
  return {{"id", d.id}, {"turns", std::move(turns)}};
}

Turn turn_from_json(const json& j) { return turn_from_json_at(j, "turn"); }

Dialogue dialogue_from_json(const json& j) {
  Dialogue d;
  d.id = require_string(j, "id", "dialogue");
  const auto& turns = require_array(j, "turns", "dialogue");
  for (std::size_t i = 0; i < turns.size(); ++i)
    d.turns.push_back(turn_from_json_at(turns[i], "turns[" + std::to_string(i) + "]"));
  return d;
}

std::string serialize_dialogue(const Dialogue& d) { return to_json(d).dump(); }

std::string serialize_corpus(const Corpus& c) {
  std::string out;
  for (const auto& d : c) {
    out += serialize_dialogue(d);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------- validation

std::vector<Violation> validate_dialogue(const Dialogue& d, const Tagset* tagset) {
  std::vector<Violation> out;
  if (d.id.empty()) out.push_back({"id", "empty dialogue id"});
  if (d.turns.empty()) out.push_back({"turns", "dialogue has no turns"});
  for (std::size_t t = 0; t < d.turns.size(); ++t) {
    const auto tw = "turns[" + std::to_string(t) + "]";
    const auto& turn = d.turns[t];
    if (turn.segments.empty()) out.push_back({tw + ".segments", "turn has no segments"});
    for (std::size_t s = 0; s < turn.segments.size(); ++s) {
      const auto sw = tw + ".segments[" + std::to_string(s) + "]";
      const auto& seg = turn.segments[s];
      if (seg.da.empty()) out.push_back({sw + ".da", "empty DA label"});
      else if (tagset && !tagset->contains(seg.da))
        out.push_back({sw + ".da", "unknown DA tag '" + seg.da + "'"});
      for (std::size_t e = 0; e < seg.entities.size(); ++e) {
        const auto ew = sw + ".entities[" + std::to_string(e) + "]";
        const auto& m = seg.entities[e];
        if (m.head.empty()) out.push_back({ew + ".head", "empty entity head"});
        else if (std::any_of(m.head.begin(), m.head.end(), [](unsigned char c) {
                   return std::isspace(c);
                 }))
          out.push_back({ew + ".head", "entity head contains whitespace"});
        if (m.role == Role::Absent)
          out.push_back({ew + ".role", "mention role cannot be Absent"});
      }
    }
  }
  return out;
}

Corpus parse_corpus(std::string_view jsonl, const Tagset* tagset) {
  Corpus corpus;
  std::set<std::string> ids;
  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto at = "line " + std::to_string(i + 1) + ": ";
    Dialogue d;
    try {
      d = dialogue_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(at + "parse error: " + e.what());
    } catch (const DataError& e) {
      throw DataError(at + e.what());
    }
    if (auto v = validate_dialogue(d, tagset); !v.empty())
      throw DataError(at + v.front().where + ": " + v.front().message);
    if (!ids.insert(d.id).second)
      throw DataError(at + "duplicate dialogue id '" + d.id + "'");
    corpus.push_back(std::move(d));
  }
  if (corpus.empty()) throw DataError("empty corpus");
  return corpus;
}

Corpus load_corpus(const std::string& path, const Tagset* tagset) {
  try {
    return parse_corpus(read_file(path), tagset);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// -------------------------------------------------------- vocabularies

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second)
      throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

std::optional<std::int32_t> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocab::at(std::string_view token, std::string_view what) const {
  if (auto i = find(token)) return *i;
  throw DataError(std::string(what) + ": '" + std::string(token) +
                  "' not in vocabulary");
}

Vocabularies derive_vocabularies(const Corpus& corpus, std::size_t min_word_count,
                                 const Tagset* tagset) {
  if (corpus.empty()) throw DataError("derive_vocabularies: empty corpus");
  std::map<std::string, std::size_t> counts;
  std::set<std::string> das;
  for (const auto& d : corpus)
    for (const auto& t : d.turns)
      for (const auto& s : t.segments) {
        das.insert(s.da);
        for (const auto& m : s.entities) ++counts[m.head];
      }

  std::vector<std::string> words{kPad, kUnk, kNoEnt};
  for (const auto& [head, n] : counts)
    if (n >= min_word_count && n > 0) words.push_back(head);

  std::vector<std::string> base;
  if (tagset) {
    base = tagset->labels;
    std::sort(base.begin(), base.end());
  } else {
    base.assign(das.begin(), das.end());
  }
  std::vector<std::string> iob;
  for (const auto& da : base) {
    iob.push_back("B-" + da);
    iob.push_back("I-" + da);
  }

  Vocabularies v;
  v.words = Vocab(std::move(words));
  v.roles = Vocab({kNoEnt, "O", "S", "X"});
  v.das = Vocab(std::move(base));
  v.das_iob = Vocab(std::move(iob));
  v.turns = Vocab({"B-A", "I-A", "B-B", "I-B"});
  return v;
}

json to_json(const Vocabularies& v) {
  return {{"words", v.words.tokens()},     {"roles", v.roles.tokens()},
          {"das", v.das.tokens()},         {"das_iob", v.das_iob.tokens()},
          {"turns", v.turns.tokens()}};
}

Vocabularies vocabularies_from_json(const json& j) {
  try {
    Vocabularies v;
    v.words = Vocab(j.at("words").get<std::vector<std::string>>());
    v.roles = Vocab(j.at("roles").get<std::vector<std::string>>());
    v.das = Vocab(j.at("das").get<std::vector<std::string>>());
    v.das_iob = Vocab(j.at("das_iob").get<std::vector<std::string>>());
    v.turns = Vocab(j.at("turns").get<std::vector<std::string>>());
    return v;
  } catch (const json::exception& e) {
    throw DataError(std::string("vocabularies: ") + e.what());
  }
}

}  // namespace dcoh
