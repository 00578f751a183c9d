#include <set>

#include "dcoh/swapgen.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace dcoh;
using namespace dcoh::test;

namespace {

Dialogue chain(const std::string& id, std::size_t n) {
  Dialogue d{id, {}};
  for (std::size_t t = 0; t < n; ++t)
    d.turns.push_back(turn(t % 2 ? Speaker::B : Speaker::A, "sd",
                           {ment(id + "_" + std::to_string(t), Role::S)}));
  return d;
}

}  // namespace

TEST_CASE("insertion points on a 12-turn dialogue") {
  const auto d = chain("d", 12);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = gen_insertion_points(d, 10, {}, seed);
    REQUIRE(pts.size() == 10);
    std::set<std::size_t> u;
    for (const auto& p : pts) {
      CHECK(p.positive_idx() >= 1);
      CHECK(p.positive_idx() <= 11);
      u.insert(p.context_len);
    }
    CHECK(u.size() == 10);
    CHECK(std::is_sorted(pts.begin(), pts.end(),
                         [](auto& a, auto& b) { return a.context_len < b.context_len; }));
  }
}

TEST_CASE("insertion points exhaust short dialogues and honor the range") {
  const auto two = gen_insertion_points(chain("d", 2), 10, {}, 1);
  REQUIRE(two.size() == 1);
  CHECK(two[0].positive_idx() == 1);
  CHECK_THROWS_AS(gen_insertion_points(chain("d", 1), 10, {}, 1), DataError);

  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (const auto& p : gen_insertion_points(chain("d", 30), 10, {1, 10}, seed))
      CHECK(p.positive_idx() <= 10);
  CHECK(gen_insertion_points(chain("d", 30), 10, {1, 10}, 3).size() == 10);

  const auto late = gen_insertion_points(chain("d", 12), 10, {}, 1, 3);
  for (const auto& p : late) CHECK(p.positive_idx() <= 8);
  CHECK(late.size() == 8);
}

TEST_CASE("internal negatives come strictly after the positive") {
  Corpus c{chain("d", 12)};
  SplitIndex idx(c);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto neg = sample_negatives({"d", 5}, Provenance::Internal, 3, idx, seed);
    REQUIRE(neg.size() == 3);
    std::set<std::size_t> u;
    for (const auto& n : neg) {
      CHECK(n.source_turn >= 6);
      CHECK(n.source_turn <= 11);
      CHECK(n.provenance == Provenance::Internal);
      CHECK(n.source_dialogue == "d");
      u.insert(n.source_turn);
    }
    CHECK(u.size() == 3);
  }
  CHECK_THROWS_AS(sample_negatives({"d", 9}, Provenance::Internal, 3, idx, 1), DataError);
}

TEST_CASE("external negatives come from other dialogues of the split") {
  Corpus c{chain("a", 5), chain("b", 5), chain("c", 5)};
  SplitIndex idx(c);
  CHECK(idx.turn_count() == 15);
  CHECK(idx.turns_outside("a") == 10);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto neg = sample_negatives({"b", 2}, Provenance::External, 9, idx, seed);
    REQUIRE(neg.size() == 9);
    std::set<std::pair<std::string, std::size_t>> u;
    for (const auto& n : neg) {
      CHECK(n.source_dialogue != "b");
      CHECK(n.provenance == Provenance::External);
      u.insert({n.source_dialogue, n.source_turn});
    }
    CHECK(u.size() == 9);
  }
  CHECK_THROWS_AS(sample_negatives({"b", 2}, Provenance::External, 11, idx, 1), DataError);
  Corpus single{chain("a", 5)};
  SplitIndex one(single);
  CHECK_THROWS_AS(sample_negatives({"a", 2}, Provenance::External, 1, one, 1), DataError);
}

TEST_CASE("negatives never duplicate the positive's annotation") {
  // Every turn in every dialogue is the same backchannel.
  Corpus c;
  for (int i = 0; i < 4; ++i) {
    Dialogue d{"d" + std::to_string(i), {}};
    for (int t = 0; t < 6; ++t) d.turns.push_back(turn(Speaker::A, "b"));
    c.push_back(d);
  }
  c[3].turns[4] = turn(Speaker::B, "sd");
  c[3].turns[5] = turn(Speaker::A, "qy");
  SplitIndex idx(c);
  const auto neg = sample_negatives({"d0", 1}, Provenance::External, 2, idx, 5);
  REQUIRE(neg.size() == 2);
  for (const auto& n : neg) CHECK(n.source_dialogue == "d3");
  CHECK_THROWS_AS(sample_negatives({"d0", 1}, Provenance::External, 3, idx, 5), DataError);

  // Internal mode: identical later turns are ineligible, so the point is skipped.
  SelectionConfig cfg;
  cfg.internal_negatives = 1;
  cfg.external_negatives = 0;
  const auto ds = build_selection_dataset(c, cfg);
  CHECK(ds.skipped == std::vector<std::string>{"d0", "d1", "d2"});
  for (const auto& r : ds.instances)
    for (const auto& cand : r.candidates)
      if (cand.provenance != Provenance::Original)
        CHECK_FALSE(cand.turn.same_annotation(r.candidates[r.positive_position].turn));
}

TEST_CASE("one dialogue, one point, nine negatives gives nine pairs") {
  Corpus c{chain("a", 11)};
  SelectionConfig cfg;
  cfg.points_per_dialogue = 1;
  cfg.internal_negatives = 9;
  cfg.external_negatives = 0;
  const auto ds = build_selection_dataset(c, cfg);
  REQUIRE(ds.instances.size() == 1);
  CHECK(ds.pairs() == 9);
  CHECK(ds.instances[0].id == "a#1");
  CHECK(ds.manifest["mode"] == "internal");
}

TEST_CASE("dataset sizes match the three published splits") {
  struct Split {
    std::size_t dialogues, points, pairs;
  };
  for (auto s : {Split{184, 1840, 16560}, Split{231, 2310, 20790}}) {
    const auto ext_corpus = synthetic_corpus(s.dialogues, 11, 30, s.dialogues);
    SelectionConfig ext;
    ext.seed = 9;
    const auto e = build_selection_dataset(ext_corpus, ext);
    CHECK(e.instances.size() == s.points);
    CHECK(e.pairs() == s.pairs);

    const auto int_corpus = synthetic_corpus(s.dialogues, 20, 30, s.dialogues);
    SelectionConfig in = ext;
    in.internal_negatives = 9;
    in.external_negatives = 0;
    const auto i = build_selection_dataset(int_corpus, in);
    CHECK(i.instances.size() == s.points);
    CHECK(i.pairs() == s.pairs);
    CHECK(i.skipped.empty());
  }
}

TEST_CASE("dataset invariants and determinism") {
  const auto c = synthetic_corpus(25, 2, 20, 4);
  for (auto [in, ex] : {std::pair{0, 9}, std::pair{3, 0}, std::pair{2, 2}}) {
    SelectionConfig cfg;
    cfg.internal_negatives = static_cast<std::size_t>(in);
    cfg.external_negatives = static_cast<std::size_t>(ex);
    cfg.context = {1, 10};
    cfg.seed = 77;
    const auto a = build_selection_dataset(c, cfg);
    const auto b = build_selection_dataset(c, cfg);
    CHECK(serialize_instances(a.instances) == serialize_instances(b.instances));
    CHECK(a.manifest == b.manifest);
    CHECK(a.manifest["pairs"] == a.pairs());
    CHECK(a.manifest["mode"] == cfg.mode());
    for (const auto& r : a.instances) {
      CHECK(r.context.size() >= 1);
      CHECK(r.context.size() <= 10);
      CHECK(r.candidates.size() == cfg.negatives() + 1);
      const auto& pos = r.candidates[r.positive_position];
      CHECK(pos.provenance == Provenance::Original);
      CHECK(pos.source_turn == r.context.size());
      std::size_t ni = 0, ne = 0;
      for (const auto& cand : r.candidates) {
        if (cand.provenance == Provenance::Internal) {
          ++ni;
          CHECK(cand.source_dialogue == r.dialogue_id);
          CHECK(cand.source_turn > pos.source_turn);
        }
        if (cand.provenance == Provenance::External) {
          ++ne;
          CHECK(cand.source_dialogue != r.dialogue_id);
        }
      }
      CHECK(ni == cfg.internal_negatives);
      CHECK(ne == cfg.external_negatives);
    }
    cfg.seed = 78;
    CHECK(serialize_instances(build_selection_dataset(c, cfg).instances) !=
          serialize_instances(a.instances));
  }
}

TEST_CASE("dataset does not depend on input dialogue order") {
  auto c = synthetic_corpus(12, 4, 14, 8);
  SelectionConfig cfg;
  cfg.seed = 1;
  const auto a = serialize_instances(build_selection_dataset(c, cfg).instances);
  std::reverse(c.begin(), c.end());
  CHECK(serialize_instances(build_selection_dataset(c, cfg).instances) == a);
}

TEST_CASE("instances round-trip through JSONL") {
  const auto c = synthetic_corpus(6, 3, 9, 2);
  SelectionConfig cfg;
  cfg.points_per_dialogue = 3;
  cfg.external_negatives = 4;
  const auto ds = build_selection_dataset(c, cfg);
  const auto text = serialize_instances(ds.instances);
  const auto back = parse_instances(text);
  REQUIRE(back.size() == ds.instances.size());
  CHECK(serialize_instances(back) == text);
  CHECK_THROWS_AS(parse_instances(""), DataError);
  CHECK_THROWS_AS(parse_instances(R"({"id":"x","context":[],"candidates":[]})"), DataError);
}

TEST_CASE("select_split keeps listed order and rejects unknown ids") {
  const auto c = synthetic_corpus(4, 2, 3, 1);
  const auto s = select_split(c, {c[2].id, c[0].id});
  REQUIRE(s.size() == 2);
  CHECK(s[0].id == c[2].id);
  CHECK_THROWS_AS(select_split(c, {"nope"}), DataError);
}

TEST_CASE("rated test set parsing") {
  const std::string t = R"({"speaker":"A","segments":[{"da":"sd","entities":[]}]})";
  auto line = [&](const std::string& cands) {
    return R"({"id":"r1","context":[)" + t + R"(],"candidates":[)" + cands + "]}";
  };
  auto cand = [&](const char* prov, const std::string& rating) {
    return R"({"turn":)" + t + R"(,"provenance":")" + prov + R"(",)" + rating + "}";
  };
  const auto r = parse_rated_testset(line(cand("original", R"("ratings":[3,3,2,3,2])")));
  REQUIRE(r.size() == 1);
  CHECK(r[0].candidates[0].mean_rating == doctest::Approx(2.6));

  std::string seven = cand("original", R"("mean_rating":2.6)");
  for (int i = 0; i < 3; ++i) seven += "," + cand("internal", R"("mean_rating":1.8)");
  for (int i = 0; i < 3; ++i) seven += "," + cand("external", R"("ratings":[1,2,1])");
  CHECK(parse_rated_testset(line(seven), true)[0].candidates.size() == 7);
  CHECK_THROWS_AS(parse_rated_testset(line(cand("original", R"("mean_rating":2.6)")), true),
                  DataError);
  CHECK_THROWS_AS(parse_rated_testset(line(cand("original", R"("ratings":[4])"))), DataError);
  CHECK_THROWS_AS(parse_rated_testset(line(cand("original", R"("mean_rating":0.5)"))),
                  DataError);
  CHECK_THROWS_AS(parse_rated_testset(line(cand("bogus", R"("mean_rating":2)"))), DataError);

  const auto round = parse_rated_testset(to_json(parse_rated_testset(line(seven))[0]).dump());
  CHECK(round[0].candidates[6].ratings == std::vector<int>{1, 2, 1});
}
