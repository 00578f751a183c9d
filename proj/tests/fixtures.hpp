#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dcoh/common.hpp"
#include "dcoh/corpus.hpp"

namespace dcoh::test {

inline EntityMention ment(std::string head, Role r) { return {std::move(head), r}; }

inline Segment seg(std::string da, std::vector<EntityMention> ents = {}) {
  return {std::move(da), std::move(ents), std::nullopt};
}

inline Turn turn(Speaker s, std::vector<Segment> segs) { return {s, std::move(segs)}; }

inline Turn turn(Speaker s, std::string da, std::vector<EntityMention> ents = {}) {
  return {s, {seg(std::move(da), std::move(ents))}};
}

/// Random well-formed dialogues with alternating speakers. Every turn gets a
/// distinct marker head "u<dialogue>_<turn>", so no two turns share an
/// annotation.
inline Corpus synthetic_corpus(std::size_t dialogues, std::size_t min_turns,
                               std::size_t max_turns, std::uint64_t seed,
                               std::size_t n_das = 6, std::size_t n_heads = 40) {
  Rng rng(seed);
  Corpus c;
  for (std::size_t d = 0; d < dialogues; ++d) {
    Dialogue dlg;
    dlg.id = "dlg" + std::to_string(100000 + d);
    const auto n = min_turns + rng.uniform_index(max_turns - min_turns + 1);
    for (std::size_t t = 0; t < n; ++t) {
      Turn tr{t % 2 ? Speaker::B : Speaker::A, {}};
      const auto segs = 1 + rng.uniform_index(2);
      for (std::size_t s = 0; s < segs; ++s) {
        Segment sg{"da" + std::to_string(rng.uniform_index(n_das)), {}, std::nullopt};
        const auto m = rng.uniform_index(3);
        for (std::size_t k = 0; k < m; ++k)
          sg.entities.push_back(ment("h" + std::to_string(rng.uniform_index(n_heads)),
                                     static_cast<Role>(rng.uniform_index(3))));
        tr.segments.push_back(std::move(sg));
      }
      tr.segments.front().entities.push_back(
          ment("u" + std::to_string(d) + "_" + std::to_string(t), Role::X));
      dlg.turns.push_back(std::move(tr));
    }
    c.push_back(std::move(dlg));
  }
  return c;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("dcoh_" + tag + "_" + hex64(fnv1a64(tag + std::to_string(reinterpret_cast<std::uintptr_t>(this)))));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace dcoh::test
