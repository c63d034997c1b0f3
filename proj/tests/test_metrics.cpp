#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qestack/metrics.hpp"
#include "qestack/rng.hpp"
#include "synthetic.hpp"

using namespace qestack;
using metrics::f1_mult;
using metrics::mcc;
using metrics::pearson;

namespace {

constexpr Tag O = Tag::ok;
constexpr Tag B = Tag::bad;

TagSequence flipped(const TagSequence& t) {
  TagSequence out;
  for (Tag x : t) out.push_back(flip(x));
  return out;
}

}  // namespace

TEST(Threshold, TiesAreBad) {
  EXPECT_EQ(metrics::threshold(std::vector<double>{0.4, 0.8}, 0.5), (TagSequence{O, B}));
  EXPECT_EQ(metrics::threshold(std::vector<double>{0.5}, 0.5), (TagSequence{B}));
  EXPECT_EQ(metrics::threshold(std::vector<double>{0.2, 0.3}, 0.0), (TagSequence{B, B}));
}

TEST(F1Mult, WorkedExamples) {
  EXPECT_DOUBLE_EQ(f1_mult(TagSequence{O, B, O}, TagSequence{O, B, O}).f1_mult, 1.0);

  const auto s = f1_mult(TagSequence{O, B, O, O}, TagSequence{O, B, B, O});
  EXPECT_NEAR(s.f1_bad, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.f1_ok, 0.8, 1e-12);
  EXPECT_NEAR(s.f1_mult, 8.0 / 15.0, 1e-9);

  const auto none = f1_mult(TagSequence{O, B, O}, TagSequence{O, O, O});
  EXPECT_EQ(none.f1_bad, 0.0);
  EXPECT_EQ(none.f1_mult, 0.0);
}

TEST(F1Mult, AbsentClassNeverPredictedScoresOne) {
  const auto s = f1_mult(TagSequence{O, O}, TagSequence{O, O});
  EXPECT_EQ(s.f1_bad, 1.0);
  EXPECT_EQ(s.f1_ok, 1.0);
  const auto t = f1_mult(TagSequence{O, O}, TagSequence{O, B});
  EXPECT_EQ(t.f1_bad, 0.0);
}

TEST(F1Mult, EmptyInputThrows) {
  EXPECT_THROW(f1_mult(TagSequence{}, TagSequence{}), EmptyInput);
  EXPECT_THROW(mcc(TagSequence{}, TagSequence{}), EmptyInput);
}

TEST(F1Mult, LengthMismatchThrows) { EXPECT_THROW(f1_mult(TagSequence{O}, TagSequence{O, B}), LengthMismatch); }

TEST(Mcc, WorkedExamples) {
  EXPECT_NEAR(mcc(TagSequence{O, B, O, B}, TagSequence{O, B, O, B}), 1.0, 1e-12);
  EXPECT_NEAR(mcc(TagSequence{O, B, O, O}, TagSequence{O, B, B, O}), 2.0 / std::sqrt(12.0), 1e-9);
  EXPECT_EQ(mcc(TagSequence{O, O, O}, TagSequence{O, B, O}), 0.0);
}

TEST(Pearson, WorkedExamples) {
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-12);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0, 1e-12);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-9);
}

TEST(Pearson, DegenerateInputs) {
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{2}), DegenerateInput);
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateInput);
  EXPECT_THROW(pearson(std::vector<double>{0.1, 0.1}, std::vector<double>{1, 2}), DegenerateInput);
}

TEST(Metrics, AgreeWithOraclesOnRandomInputs) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    const double p = rng.uniform();
    const TagSequence g = synth::tags(rng, n, p);
    const TagSequence q = synth::tags(rng, n, rng.uniform());
    const auto lib = f1_mult(g, q);
    const auto ref = oracle::f1_mult(g, q);
    ASSERT_NEAR(lib.f1_ok, ref.ok, 1e-12);
    ASSERT_NEAR(lib.f1_bad, ref.bad, 1e-12);
    ASSERT_NEAR(lib.f1_mult, ref.mult, 1e-12);
    ASSERT_NEAR(mcc(g, q), oracle::mcc(g, q), 1e-12);

    std::vector<double> x, y;
    const std::size_t m = 2 + rng.below(50);
    for (std::size_t i = 0; i < m; ++i) {
      x.push_back(rng.uniform());
      y.push_back(0.5 * x.back() + rng.normal());
    }
    ASSERT_NEAR(pearson(x, y), oracle::correlation(x, y), 1e-12);
  }
}

TEST(Metrics, PermutationInvariance) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    TagSequence g = synth::tags(rng, n, 0.4), q = synth::tags(rng, n, 0.4);
    const double f = f1_mult(g, q).f1_mult, m = mcc(g, q);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    TagSequence gp, qp;
    for (std::size_t i : perm) {
      gp.push_back(g[i]);
      qp.push_back(q[i]);
    }
    EXPECT_EQ(f1_mult(gp, qp).f1_mult, f);
    EXPECT_EQ(mcc(gp, qp), m);
  }
}

TEST(Metrics, ClassSwapSymmetry) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const TagSequence g = synth::tags(rng, n, 0.4), q = synth::tags(rng, n, 0.4);
    const auto a = f1_mult(g, q);
    const auto b = f1_mult(flipped(g), flipped(q));
    EXPECT_NEAR(a.f1_ok, b.f1_bad, 1e-15);
    EXPECT_NEAR(a.f1_bad, b.f1_ok, 1e-15);
    EXPECT_NEAR(mcc(g, q), mcc(flipped(g), flipped(q)), 1e-12);
  }
}

TEST(Pearson, AffineInvariance) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x, y, xs, ys;
    const double a = rng.uniform(0.1, 10), b = rng.uniform(-5, 5), c = rng.uniform(0.1, 10), d = rng.uniform(-5, 5);
    for (int i = 0; i < 30; ++i) {
      x.push_back(rng.normal());
      y.push_back(x.back() + rng.normal());
      xs.push_back(a * x.back() + b);
      ys.push_back(c * y.back() + d);
    }
    EXPECT_NEAR(pearson(x, y), pearson(xs, ys), 1e-12);
  }
}

TEST(TargetStream, InterleavesPerSentence) {
  const std::vector<TargetTags> t = {{{B}, {O, O}}, {{O, O}, {B, O, O}}};
  EXPECT_EQ(metrics::target_stream(t), (TagSequence{O, B, O, B, O, O, O, O}));
}
