#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "qestack/linearqe.hpp"
#include "qestack/metrics.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace qestack;
using namespace qestack::linear;

namespace {

constexpr Tag O = Tag::ok;
constexpr Tag B = Tag::bad;

SequenceInstance random_instance(Rng& rng, std::size_t n) {
  SequenceInstance inst;
  inst.mt = synth::sentence(rng, 6, n, n);
  inst.src = synth::sentence(rng, 6, 1, n + 2, "s");
  inst.alignment = synth::alignment(rng, inst.src.size(), inst.mt.size());
  std::vector<std::string> pos;
  for (std::size_t i = 0; i < n; ++i) pos.push_back(rng.bernoulli(0.5) ? "N" : "V");
  inst.extra_columns.push_back(pos);
  StackedSystem sys;
  sys.system_id = "sys1";
  for (std::size_t i = 0; i < n; ++i) sys.words.push_back(rng.uniform());
  inst.stacked.push_back(sys);
  return inst;
}

// Random weights for every key the instance can fire, bigrams included.
LinearModel random_model(Rng& rng, const SequenceInstance& inst, double bigram_scale = 1.0) {
  LinearModel m;
  const auto enc = encode(inst, Stream::words, m.templates);
  for (const auto& pos : enc.unigram) {
    for (const auto& keys : pos) {
      for (auto k : keys) m.weights[k] = rng.normal();
    }
  }
  for (const auto& row : enc.bigram) {
    for (auto k : row) m.weights[k] = bigram_scale * rng.normal();
  }
  return m;
}

}  // namespace

TEST(Features, SentinelsAndBins) {
  SequenceInstance inst;
  inst.mt = {"a", "b"};
  inst.src = {"x"};
  inst.alignment = {{0, 1}};
  inst.stacked.push_back({"sys1", {0.73, 1.0}, {}, {}});
  const auto names = feature_names(inst, Stream::words, 0, B, std::nullopt, TemplateConfig{});
  auto has = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  EXPECT_TRUE(has("w-1=<s>^BAD"));
  EXPECT_TRUE(has("stack:sys1:bin7^BAD"));
  EXPECT_TRUE(has("bias^BAD"));
  EXPECT_TRUE(has("sw=<null>^BAD"));
  EXPECT_TRUE(has("prev=START^BAD"));
  const auto last = feature_names(inst, Stream::words, 1, O, B, TemplateConfig{});
  EXPECT_NE(std::find(last.begin(), last.end(), "stack:sys1:bin9^OK"), last.end());
  EXPECT_NE(std::find(last.begin(), last.end(), "sw=x^OK"), last.end());
  EXPECT_NE(std::find(last.begin(), last.end(), "prev=BAD^OK"), last.end());
  EXPECT_EQ(stack_bin(0.73, 10), 7);
  EXPECT_EQ(stack_bin(1.0, 10), 9);
  EXPECT_EQ(stack_bin(0.0, 10), 0);
}

TEST(Features, Deterministic) {
  Rng rng(3);
  const auto inst = random_instance(rng, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(extract_features(inst, Stream::words, i, B, O, {}), extract_features(inst, Stream::words, i, B, O, {}));
  }
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Features, TemplatesToggle) {
  SequenceInstance inst;
  inst.mt = {"a"};
  TemplateConfig only_bias{true, false, false, false, false, false, false, 10};
  EXPECT_EQ(feature_names(inst, Stream::words, 0, O, std::nullopt, only_bias), (std::vector<std::string>{"bias^OK"}));
  EXPECT_EQ(parse_template_list(template_list(only_bias), 10), only_bias);
  EXPECT_THROW(parse_template_list("bias,nonsense", 10), ParseError);
}

TEST(Viterbi, ZeroWeightsGiveAllOk) {
  SequenceInstance inst;
  inst.mt = {"a", "b", "c"};
  const auto d = viterbi(inst, LinearModel{});
  EXPECT_EQ(d.tags, (TagSequence{O, O, O}));
  EXPECT_EQ(d.score, 0.0);
  EXPECT_EQ(predict_probs(inst, LinearModel{}), (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(Viterbi, ZeroBigramIsPerPositionArgmax) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, 1 + rng.below(10));
    const auto model = random_model(rng, inst, 0.0);
    const auto table = score_table(encode(inst, Stream::words, model.templates), model);
    const auto d = viterbi(table);
    for (std::size_t i = 0; i < table.size(); ++i) {
      EXPECT_EQ(d.tags[i], table.unigram[i][1] > table.unigram[i][0] ? B : O);
    }
    EXPECT_EQ(metrics::threshold(predict_probs(table, 1.0), 0.5), d.tags);
  }
}

TEST(Viterbi, MatchesEnumeration) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const auto inst = random_instance(rng, n);
    const auto model = random_model(rng, inst);
    const auto d = viterbi(inst, model);
    const auto best = oracle::enumerate(n, [&](const TagSequence& t) {
      return oracle::sequence_score(inst, Stream::words, model, t);
    });
    ASSERT_NEAR(d.score, best.score, 1e-9);
    if (best.ties == 1) {
      ASSERT_EQ(d.tags, best.tags);
    }
  }
}

TEST(Viterbi, LossAugmentedMatchesEnumeration) {
  Rng rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const auto inst = random_instance(rng, n);
    const auto model = random_model(rng, inst);
    const TagSequence gold = synth::tags(rng, n, 0.4);
    const auto d = viterbi(inst, model, &gold);
    const auto best = oracle::enumerate(n, [&](const TagSequence& t) {
      return oracle::sequence_score(inst, Stream::words, model, t) + static_cast<double>(hamming(t, gold));
    });
    ASSERT_NEAR(d.objective, best.score, 1e-9);
  }
}

TEST(MaxMarginals, MatchEnumeration) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const auto inst = random_instance(rng, n);
    const auto model = random_model(rng, inst);
    const auto table = score_table(encode(inst, Stream::words, model.templates), model);
    const auto margins = max_marginal_margins(table);
    for (std::size_t i = 0; i < n; ++i) {
      double best[2] = {-1e300, -1e300};
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        TagSequence t(n);
        for (std::size_t j = 0; j < n; ++j) t[j] = (mask >> j) & 1 ? B : O;
        const double s = oracle::sequence_score(inst, Stream::words, model, t);
        auto& slot = best[t[i] == B ? 1 : 0];
        slot = std::max(slot, s);
      }
      ASSERT_NEAR(margins[i], best[1] - best[0], 1e-9);
    }
  }
}

TEST(PredictProbs, MonotoneInBadBias) {
  Rng rng(18);
  const auto inst = random_instance(rng, 8);
  auto model = random_model(rng, inst);
  const FeatureKey bias_bad = fnv1a("bias^BAD");
  auto before = predict_probs(inst, model);
  for (int step = 0; step < 5; ++step) {
    model.weights[bias_bad] += 0.5;
    const auto after = predict_probs(inst, model);
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_GE(after[i], before[i]);
    before = after;
  }
}

TEST(Mira, ZeroWeightsTriggerAnUpdate) {
  TrainingExample ex;
  ex.instance.mt = {"a", "b"};
  ex.gold = {O, O};
  std::vector<TrainingExample> data{ex};
  MiraConfig config;
  config.epochs = 1;
  MiraTrace trace;
  const auto m = mira_train(data, Stream::words, {}, config, &trace);
  EXPECT_GE(trace.updates, 1u);
  ASSERT_EQ(trace.epoch_loss.size(), 1u);
  EXPECT_EQ(trace.epoch_loss[0], 2.0);
  EXPECT_EQ(viterbi(ex.instance, m).tags, ex.gold);
}

TEST(Mira, ToyVocabularySeparatesInTwoEpochs) {
  TrainingExample ex;
  ex.instance.mt = {"x", "y", "x", "y", "y", "x"};
  ex.gold = {O, B, O, B, B, O};
  std::vector<TrainingExample> data{ex};
  MiraConfig config;
  config.epochs = 2;
  const auto m = mira_train(data, Stream::words, {}, config);
  EXPECT_EQ(viterbi(ex.instance, m).tags, ex.gold);
}

TEST(Mira, TauNeverExceedsC) {
  Rng rng(19);
  auto data = synth::separable(rng, 50);
  for (auto& ex : data) {
    for (auto& t : ex.gold) {
      if (rng.bernoulli(0.1)) t = flip(t);  // noise forces large violations
    }
  }
  for (double C : {0.01, 0.1, 1.0}) {
    MiraConfig config;
    config.C = C;
    config.epochs = 3;
    MiraTrace trace;
    const auto m = mira_train(data, Stream::words, {}, config, &trace);
    EXPECT_LE(trace.max_tau, C);
    EXPECT_TRUE(m.finite());
  }
}

TEST(Mira, SeparableReachesPerfectAccuracyAndIsReproducible) {
  Rng rng(20);
  const auto data = synth::separable(rng, 200);
  MiraConfig config;
  config.seed = 42;
  const auto a = mira_train(data, Stream::words, {}, config);
  const auto b = mira_train(data, Stream::words, {}, config);
  EXPECT_EQ(serialize(a), serialize(b));
  for (const auto& ex : data) ASSERT_EQ(viterbi(ex.instance, a).tags, ex.gold);
}

TEST(Mira, GapAndSourceStreams) {
  Rng rng(21);
  std::vector<TrainingExample> gaps, source;
  for (int i = 0; i < 100; ++i) {
    TrainingExample ex;
    ex.instance.mt = synth::sentence(rng, 8, 2, 8);
    ex.instance.src = ex.instance.mt;
    for (std::size_t j = 0; j < ex.instance.mt.size(); ++j) ex.instance.alignment.push_back({j, j});
    // A gap is BAD exactly when the word on its left is w0.
    TrainingExample g = ex;
    g.gold.push_back(O);
    for (const auto& w : ex.instance.mt) g.gold.push_back(w == "w0" ? B : O);
    gaps.push_back(g);
    TrainingExample s = ex;
    for (const auto& w : ex.instance.src) s.gold.push_back(w == "w1" ? B : O);
    source.push_back(s);
  }
  const auto mg = mira_train(gaps, Stream::gaps, {}, {});
  const auto ms = mira_train(source, Stream::source, {}, {});
  for (const auto& ex : gaps) ASSERT_EQ(viterbi(ex.instance, mg).tags, ex.gold);
  for (const auto& ex : source) ASSERT_EQ(viterbi(ex.instance, ms).tags, ex.gold);
}

TEST(Mira, PerfectStackedSystemDrivesDevF1) {
  Rng rng(22);
  std::vector<TrainingExample> train, dev;
  for (int i = 0; i < 300; ++i) {
    TrainingExample ex;
    ex.instance.mt = synth::sentence(rng, 50, 3, 12);
    ex.gold = synth::tags(rng, ex.instance.mt.size(), 0.3);
    StackedSystem perfect{"oracle", {}, {}, {}};
    for (Tag t : ex.gold) perfect.words.push_back(t == B ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.3));
    ex.instance.stacked.push_back(perfect);
    (i < 200 ? train : dev).push_back(std::move(ex));
  }
  const auto m = mira_train(train, Stream::words, {}, {});
  TagSequence g, p;
  for (const auto& ex : dev) {
    const auto d = viterbi(ex.instance, m).tags;
    g.insert(g.end(), ex.gold.begin(), ex.gold.end());
    p.insert(p.end(), d.begin(), d.end());
  }
  EXPECT_GE(metrics::f1_mult(g, p).f1_mult, 0.99);
}

TEST(Jackknife, PartitionAndLeaveOneOut) {
  std::vector<int> data{10, 20, 30, 40, 50};
  // The "model" is the list of training items; each item records it.
  const auto out = jackknife(
      std::span<const int>(data), 5, [](std::span<const int> part) { return std::vector<int>(part.begin(), part.end()); },
      [](const std::vector<int>& model, const int& item) {
        return std::make_pair(item, std::find(model.begin(), model.end(), item) == model.end() && model.size() == 4);
      });
  ASSERT_EQ(out.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(out[i].first, data[i]);
    EXPECT_TRUE(out[i].second);
  }
}

TEST(Jackknife, ConstantTrainer) {
  std::vector<int> data(7, 0);
  const auto out = jackknife(
      std::span<const int>(data), 3, [](std::span<const int>) { return 0.25; },
      [](double model, const int&) { return model; }, 3);
  for (double v : out) EXPECT_EQ(v, 0.25);
}

TEST(Jackknife, LinearIsDeterministicAcrossJobs) {
  Rng rng(23);
  const auto data = synth::separable(rng, 40);
  MiraConfig config;
  config.epochs = 3;
  const auto a = jackknife_linear(data, 4, Stream::words, {}, config, 1.0, 1);
  const auto b = jackknife_linear(data, 4, Stream::words, {}, config, 1.0, 4);
  ASSERT_EQ(a.size(), data.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tags, b[i].tags);
    EXPECT_EQ(a[i].probs, b[i].probs);
  }
}

TEST(ModelIo, RoundTrip) {
  Rng rng(24);
  const auto data = synth::separable(rng, 30);
  auto m = mira_train(data, Stream::words, {}, {});
  m.gamma = 0.7;
  TempDir dir;
  save_model(dir / "m.model", m);
  const auto back = load_model(dir / "m.model");
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.gamma, m.gamma);
  EXPECT_EQ(back.templates, m.templates);
  EXPECT_EQ(serialize(back), serialize(m));
}
