#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace dcoh {

enum class Speaker : std::uint8_t { A, B };

/// Grammatical role of an entity within a turn. Absent only ever appears in
/// grid cells.
enum class Role : std::uint8_t { S, O, X, Absent };

char speaker_char(Speaker s);
/// "S", "O", "X" or "-" for Absent.
char role_char(Role r);
std::optional<Role> parse_mention_role(std::string_view s);
std::optional<Speaker> parse_speaker(std::string_view s);

struct EntityMention {
  std::string head;  // lowercased NP head
  Role role = Role::X;

  bool operator==(const EntityMention&) const = default;
};

struct Segment {
  std::string da;
  std::vector<EntityMention> entities;  // appearance order
  std::optional<std::string> text;

  bool operator==(const Segment&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::A;
  std::vector<Segment> segments;

  std::size_t mention_count() const;
  /// Content equality ignoring free text: same speaker, DAs and mentions.
  bool same_annotation(const Turn& other) const;
  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;

  bool operator==(const Dialogue&) const = default;
};

using Corpus = std::vector<Dialogue>;

/// Closed set of DA labels (one per line in a tagset file).
struct Tagset {
  std::vector<std::string> labels;

  bool contains(std::string_view label) const;
  static Tagset load(const std::string& path);
};

// JSON mapping. Parsing lowercases entity heads and throws DataError naming
// the offending field.
nlohmann::json to_json(const Turn& t);
nlohmann::json to_json(const Dialogue& d);
Turn turn_from_json(const nlohmann::json& j);
Dialogue dialogue_from_json(const nlohmann::json& j);

/// Canonical single-line JSON form of a dialogue (sorted keys, "text"
/// omitted when absent).
std::string serialize_dialogue(const Dialogue& d);
std::string serialize_corpus(const Corpus& c);

struct Violation {
  std::string where;  // e.g. "turns[2].segments[0].entities[1].head"
  std::string message;
};

/// Checks every structural invariant of the data model. An empty result
/// means the dialogue is well formed. Never throws.
std::vector<Violation> validate_dialogue(const Dialogue& d,
                                         const Tagset* tagset = nullptr);

/// Loads a JSONL corpus (one dialogue per line; blank lines ignored).
/// Errors carry the 1-based line number. Every dialogue is validated and ids
/// must be unique.
Corpus load_corpus(const std::string& path, const Tagset* tagset = nullptr);
Corpus parse_corpus(std::string_view jsonl, const Tagset* tagset = nullptr);

/// Token <-> dense index map. Indices are assigned in insertion order.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::optional<std::int32_t> find(std::string_view token) const;
  /// Index of `token`; throws DataError naming `what` when missing.
  std::int32_t at(std::string_view token, std::string_view what) const;

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

inline constexpr const char* kNoEnt = "<no_ent>";
inline constexpr const char* kUnk = "<unk>";
inline constexpr const char* kPad = "<pad>";

struct Vocabularies {
  Vocab words;    // <pad>, <unk>, <no_ent>, then heads sorted
  Vocab roles;    // <no_ent>, O, S, X
  Vocab das;      // base DA labels, sorted
  Vocab das_iob;  // B-<da>, I-<da> for each base label
  Vocab turns;    // B-A, I-A, B-B, I-B

  bool operator==(const Vocabularies&) const = default;
};

/// Builds all vocabularies from a corpus. Heads seen fewer than
/// `min_word_count` times are left out of `words` (they encode as <unk>).
/// With a tagset, the DA vocabulary is the tagset; otherwise the labels
/// observed in the corpus.
Vocabularies derive_vocabularies(const Corpus& corpus,
                                 std::size_t min_word_count,
                                 const Tagset* tagset = nullptr);

nlohmann::json to_json(const Vocabularies& v);
Vocabularies vocabularies_from_json(const nlohmann::json& j);

}  // namespace dcoh
