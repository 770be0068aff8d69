#include <doctest.h>

#include <random>

#include "tk/metrics.hpp"

using namespace tk;
using namespace tk::metrics;

namespace {

// Unmemoised recursion over every edit script.
long brute_distance(const std::vector<int>& a, std::size_t i, const std::vector<int>& b, std::size_t j) {
  if (i == a.size()) return static_cast<long>(b.size() - j);
  if (j == b.size()) return static_cast<long>(a.size() - i);
  const long keep = brute_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const long del = brute_distance(a, i + 1, b, j) + 1;
  const long ins = brute_distance(a, i, b, j + 1) + 1;
  return std::min({keep, del, ins});
}

std::vector<std::vector<int>> all_sequences(int max_len, int alphabet) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::vector<int>> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : frontier) {
      for (int c = 0; c < alphabet; ++c) {
        auto t = s;
        t.push_back(c);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

std::vector<int> random_seq(std::mt19937_64& rng, int max_len, int alphabet) {
  std::vector<int> s(rng() % static_cast<unsigned>(max_len + 1));
  for (auto& c : s) c = static_cast<int>(rng() % static_cast<unsigned>(alphabet));
  return s;
}

}  // namespace

TEST_CASE("edit ops hand cases") {
  const std::string r = "abcd", h = "abxd";
  EditOps ops = edit_ops(std::vector<char>(r.begin(), r.end()), std::vector<char>(h.begin(), h.end()));
  CHECK(ops.substitutions == 1);
  CHECK(ops.deletions == 0);
  CHECK(ops.insertions == 0);
  CHECK(ops.ref_units == 4);

  auto ref = tokenize("gi11 fad2 kien31 le24", Unit::kSyllable);
  auto hyp = tokenize("gi11 fad2 kien31", Unit::kSyllable);
  EditOps s = edit_ops(ref, hyp);
  CHECK(s.deletions == 1);
  CHECK(s.errors() == 1);
  CHECK(corpus_rate({{"gi11 fad2 kien31 le24", "gi11 fad2 kien31"}}, Unit::kSyllable) == 25.0);
  CHECK(corpus_rate({{"abcd", "abxd"}}, Unit::kChar) == 25.0);
}

TEST_CASE("edit ops tie-break prefers substitution then deletion") {
  const std::vector<int> ref{1, 2}, hyp{3};
  EditOps ops = edit_ops(ref, hyp);
  CHECK(ops.substitutions == 1);
  CHECK(ops.deletions == 1);
  CHECK(ops.insertions == 0);
  EditOps empty = edit_ops(std::vector<int>{}, std::vector<int>{});
  CHECK(empty.errors() == 0);
}

TEST_CASE("edit ops match exhaustive search on every short pair") {
  const auto seqs = all_sequences(5, 3);
  CHECK(seqs.size() == 364);
  long mismatches = 0, pairs = 0;
  for (const auto& a : seqs) {
    for (const auto& b : seqs) {
      EditOps ops = edit_ops(a, b);
      if (ops.errors() != brute_distance(a, 0, b, 0)) ++mismatches;
      ++pairs;
    }
  }
  CHECK(pairs == 364 * 364);
  CHECK(mismatches == 0);
}

TEST_CASE("edit op counts are consistent with both lengths") {
  std::mt19937_64 rng(3);
  for (int c = 0; c < 500; ++c) {
    auto a = random_seq(rng, 6, 4), b = random_seq(rng, 6, 4);
    EditOps ops = edit_ops(a, b);
    // Matches + S + D consume the reference; matches + S + I consume the hypothesis.
    const long matches = static_cast<long>(a.size()) - ops.substitutions - ops.deletions;
    CHECK(matches >= 0);
    CHECK(matches + ops.substitutions + ops.insertions == static_cast<long>(b.size()));
    CHECK(ops.errors() == brute_distance(a, 0, b, 0));
  }
}

TEST_CASE("edit distance is symmetric and obeys the triangle inequality") {
  std::mt19937_64 rng(4);
  for (int c = 0; c < 300; ++c) {
    auto a = random_seq(rng, 7, 3), b = random_seq(rng, 7, 3), x = random_seq(rng, 7, 3);
    EditOps ab = edit_ops(a, b), ba = edit_ops(b, a);
    CHECK(ab.errors() == ba.errors());
    CHECK(edit_ops(a, x).errors() <= ab.errors() + edit_ops(b, x).errors());
  }
}

TEST_CASE("tokenization units") {
  auto chars = tokenize("\xe4\xb8\x80\xe4\xb8\x81" "a", Unit::kChar);
  REQUIRE(chars.size() == 3);
  CHECK(chars[0] == "\xe4\xb8\x80");
  CHECK(chars[2] == "a");
  CHECK(tokenize("  ka3  mo2 ", Unit::kSyllable) == std::vector<std::string>{"ka3", "mo2"});
  CHECK(parse_unit("char") == Unit::kChar);
  CHECK(parse_unit("syllable") == Unit::kSyllable);
  CHECK_THROWS_AS(parse_unit("word"), ConfigError);
}

TEST_CASE("corpus rate cases") {
  const std::vector<std::pair<std::string, std::string>> perfect{{"abc", "abc"}, {"de", "de"}};
  CHECK(corpus_rate(perfect, Unit::kChar) == 0.0);
  CHECK(corpus_rate({{"abc", ""}, {"de", ""}}, Unit::kChar) == 100.0);
  CHECK(corpus_rate({{"abc", "abc"}, {"de", "dxe"}}, Unit::kChar) == doctest::Approx(100.0 / 5.0));
  CHECK_THROWS_AS(corpus_rate({{"", "a"}}, Unit::kChar), MetricError);
  CHECK_THROWS_AS(corpus_rate({}, Unit::kSyllable), MetricError);
}

TEST_CASE("one inserted unit adds exactly one error") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "abcd";
  for (int c = 0; c < 100; ++c) {
    std::vector<std::pair<std::string, std::string>> pairs;
    long units = 0;
    for (int k = 0; k < 4; ++k) {
      std::string s;
      const auto len = 1 + rng() % 6;
      for (unsigned i = 0; i < len; ++i) s += alphabet[rng() % 4];
      units += static_cast<long>(s.size());
      pairs.emplace_back(s, s);
    }
    auto& victim = pairs[rng() % 4].second;
    victim.insert(victim.begin() + static_cast<long>(rng() % (victim.size() + 1)), 'z');
    CHECK(corpus_rate(pairs, Unit::kChar) == doctest::Approx(100.0 / static_cast<double>(units)));
  }
}

TEST_CASE("dialect accuracy") {
  CHECK(dialect_accuracy({0, 1, 2}, {0, 1, 2}) == 100.0);
  CHECK(dialect_accuracy({std::nullopt, 1}, {0, 1}) == 50.0);
  std::vector<std::optional<int>> pred{0, 0, 0, 1, 1, 1, 2, 2, 0};
  std::vector<int> truth{0, 0, 0, 1, 1, 1, 2, 2, 2};
  CHECK(round2(dialect_accuracy(pred, truth)) == 88.89);
  CHECK_THROWS_AS(dialect_accuracy({0}, {0, 1}), MetricError);
  CHECK_THROWS_AS(dialect_accuracy({}, {}), MetricError);
}

TEST_CASE("efficiency helpers") {
  CHECK(rtfx(100.0, 0.1) == doctest::Approx(1000.0));
  CHECK_THROWS_AS(rtfx(1.0, 0.0), MetricError);
  EfficiencyReport rep{0.1, 10.0, {0.5, 0.25}};
  CHECK(rep.per_run_rtfx() == std::vector<double>{20.0, 40.0});
  CHECK(rep.mean_rtfx() == doctest::Approx(30.0));
  CHECK_THROWS_AS(EfficiencyReport{}.mean_rtfx(), MetricError);
  CHECK(relative_improvement(6.07, 2.61) == doctest::Approx(57.0016).epsilon(1e-5));
  CHECK_THROWS_AS(relative_improvement(0.0, 1.0), MetricError);
}

TEST_CASE("parameter count of two linear layers") {
  ParameterStore<double> ps;
  ps.add("l1.w", {10, 10});
  ps.add("l1.b", {1, 10});
  ps.add("l2.w", {10, 10});
  ps.add("l2.b", {1, 10});
  CHECK(count_params(ps) == doctest::Approx(0.00022).epsilon(1e-15));
}
