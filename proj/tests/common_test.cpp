#include <algorithm>
#include <numeric>
#include <set>

#include "dcoh/common.hpp"
#include "doctest.h"

using namespace dcoh;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed separates labels and parents") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("Rng is reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    CHECK(r.uniform_index(7) < 7);
    const double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_index is roughly uniform") {
  Rng r(3);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[r.uniform_index(5)];
  for (int c : counts) CHECK(std::abs(c - n / 5) < 600);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(9);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("sample_without_replacement draws distinct indices") {
  Rng r(11);
  for (std::size_t k = 0; k <= 10; ++k) {
    const auto s = r.sample_without_replacement(10, k);
    CHECK(s.size() == k);
    std::set<std::size_t> u(s.begin(), s.end());
    CHECK(u.size() == k);
    for (auto x : s) CHECK(x < 10);
  }
  CHECK_THROWS(r.sample_without_replacement(3, 4));
}

TEST_CASE("split_lines drops carriage returns and the trailing empty line") {
  CHECK(split_lines("a\r\nb\n") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("a\n\nb") == std::vector<std::string>{"a", "", "b"});
  CHECK(split_lines("").empty());
}

TEST_CASE("hex64 is 16 lowercase digits") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xABCDEFULL) == "0000000000abcdef");
}

TEST_CASE("read_file on a missing path is a DataError") {
  CHECK_THROWS_AS(read_file("/nonexistent/dir/file"), DataError);
}
