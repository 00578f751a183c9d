#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcoh/corpus.hpp"

namespace dcoh {

/// Which input channels feed the neural scorer.
struct Channels {
  bool word = false;
  bool role = false;
  bool da = false;
  bool turn = false;

  bool entities() const { return word || role; }
  /// Throws std::invalid_argument unless one of word/role/da is set.
  void check() const;
  /// Comma-separated list such as "word,turn".
  std::string to_string() const;
  static Channels parse(std::string_view spec);

  bool operator==(const Channels&) const = default;
};

struct EncodingConfig {
  Channels channels;
  const Vocabularies* vocab = nullptr;
};

/// Aligned id sequences; each enabled channel has the same length.
struct TokenStream {
  std::vector<std::int32_t> word;
  std::vector<std::int32_t> role;
  std::vector<std::int32_t> da;
  std::vector<std::int32_t> turn;
  Channels channels;

  std::size_t length() const;
};

/// Flattens turns into per-position channel ids.
///
/// Entity-only streams emit one position per mention (a turn without
/// mentions emits a single <no_ent>). DA-only streams emit one position per
/// segment. Entity+DA streams emit one position per mention within each
/// segment (an empty segment emits one <no_ent>), with the DA channel in
/// IOB2 over segments. The optional turn channel is IOB2 over turns with the
/// speaker as the tag type.
TokenStream linearize(std::span<const Turn> turns, const EncodingConfig& cfg);

/// linearize(context ++ [candidate]).
TokenStream encode_pairwise_inputs(std::span<const Turn> context,
                                   const Turn& candidate, const EncodingConfig& cfg);

/// Debug dump: header "word\trole\tda\tturn", one row per position, "." for
/// channels that are not emitted.
std::string stream_tsv(const TokenStream& s, const Vocabularies& v);

}  // namespace dcoh
