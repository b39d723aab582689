#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "s2st/metrics.hpp"

using namespace s2st::metrics;
using s2st::testing::edit_oracle;
using s2st::testing::random_tokens;

TEST_CASE("word_error_rate matches the recursive oracle") {
  std::mt19937 rng(7);
  for (int k = 0; k < 500; ++k) {
    const auto ref = random_tokens(rng, 6, 3);
    const auto hyp = random_tokens(rng, 6, 3);
    const auto want = edit_oracle(ref, hyp);
    const auto got = word_error_rate(ref, hyp);
    INFO("pair " << k);
    CHECK(got.substitutions == want.s);
    CHECK(got.deletions == want.d);
    CHECK(got.insertions == want.i);
    CHECK(got.ref_length == ref.size());
  }
}

TEST_CASE("count invariants over random pairs") {
  std::mt19937 rng(11);
  for (int k = 0; k < 300; ++k) {
    const auto ref = random_tokens(rng, 12, 4);
    const auto hyp = random_tokens(rng, 12, 4);
    const auto s = word_error_rate(ref, hyp);
    // Deletions minus insertions equals the length difference.
    CHECK(static_cast<long>(s.deletions) - static_cast<long>(s.insertions) ==
          static_cast<long>(ref.size()) - static_cast<long>(hyp.size()));
    // Symmetric in total edits; S/D/I swap roles.
    const auto r = word_error_rate(hyp, ref);
    CHECK(r.errors() == s.errors());
    CHECK(s.errors() <= std::max(ref.size(), hyp.size()));
    // The alignment agrees with the counting path.
    const auto a = align(ref, hyp);
    CHECK(a.score() == s);
    std::vector<std::string> rebuilt_ref, rebuilt_hyp;
    for (const auto& op : a.ops) {
      if (op.ref) rebuilt_ref.push_back(*op.ref);
      if (op.hyp) rebuilt_hyp.push_back(*op.hyp);
      if (op.op == EditOp::match) CHECK(*op.ref == *op.hyp);
      if (op.op == EditOp::substitute) CHECK(*op.ref != *op.hyp);
    }
    CHECK(rebuilt_ref == ref);
    CHECK(rebuilt_hyp == hyp);
  }
}

TEST_CASE("literal rates") {
  Tokens x = {"मैं", "घर", "जा", "रहा", "हूँ"};
  Tokens empty;
  CHECK(word_error_rate(x, x).rate() == 0.0);
  CHECK(word_error_rate(x, empty).rate() == 1.0);
  CHECK(word_error_rate(x, empty).deletions == 5);
  CHECK(word_error_rate(empty, empty).rate() == 0.0);
  CHECK(std::isinf(word_error_rate(empty, x).rate()));
  CHECK(word_error_rate(empty, x).insertions == 5);

  CHECK(word_error_rate("the cat sat", "the hat sat").substitutions == 1);
  CHECK(word_error_rate("the cat sat", "the hat sat").rate() == doctest::Approx(1.0 / 3));
}

TEST_CASE("align prefers deletion of the leading token") {
  Tokens ref = {"a", "b"}, hyp = {"b"};
  const auto a = align(ref, hyp);
  REQUIRE(a.ops.size() == 2);
  CHECK(a.ops[0] == AlignedToken{EditOp::deletion, "a", std::nullopt});
  CHECK(a.ops[1] == AlignedToken{EditOp::match, "b", "b"});
  CHECK(std::string(to_string(EditOp::deletion)) == "delete");
}

TEST_CASE("char_error_rate counts code points") {
  const auto s = char_error_rate("अब", "अप");
  CHECK(s.ref_length == 2);
  CHECK(s.substitutions == 1);
  CHECK(s.rate() == 0.5);
  CHECK(char_error_rate("ab c", "abc").deletions == 1);
}

TEST_CASE("corpus_wer pools counts") {
  // 3 errors over 10 reference words, spread unevenly.
  std::vector<std::pair<Tokens, Tokens>> pairs = {
      {{"a", "b"}, {"x", "y"}},                                        // 2/2
      {{"a", "b", "c", "d", "e", "f", "g", "h"}, {"a", "b", "c", "d", "e", "f", "g"}},  // 1/8
  };
  const auto s = corpus_wer(pairs);
  CHECK(s.ref_length == 10);
  CHECK(s.errors() == 3);
  CHECK(s.rate() == 0.3);
  const double mean_of_rates = (1.0 + 1.0 / 8) / 2;
  CHECK(mean_of_rates != doctest::Approx(0.3));

  std::vector<std::pair<Tokens, Tokens>> none;
  CHECK_THROWS_AS(corpus_wer(none), EmptyCorpusError);
}

TEST_CASE("WerScore accumulation") {
  WerScore a{1, 2, 3, 10}, b{0, 1, 0, 5};
  a += b;
  CHECK(a == WerScore{1, 3, 3, 15});
  CHECK(a.errors() == 7);
}
