#pragma once

// First-order sequential OK/BAD tagger with sparse unigram and bigram
// features, exact two-state Viterbi decoding, max-marginal probabilities,
// averaged max-loss MIRA training and k-fold jackknifing.
//
// Each stream (MT words, gaps, source words) is an independent sequence
// model over its own positions. Features are label-conjoined observation
// strings hashed to 64-bit keys with FNV-1a.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "qestack/corpus.hpp"
#include "qestack/errors.hpp"
#include "qestack/folds.hpp"
#include "qestack/rng.hpp"
#include "qestack/text_io.hpp"

namespace qestack::linear {

using FeatureKey = std::uint64_t;
using FeatureVector = std::vector<FeatureKey>;

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

// Streaming FNV-1a: fnv1a(b, fnv1a(a)) == fnv1a(a + b).
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = kFnvOffset) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

// Probabilities from an upstream system, injected as binned features
// (stacked ensembling). Empty vector = stream not provided.
struct StackedSystem {
  std::string system_id;
  std::vector<double> words;
  std::vector<double> gaps;
  std::vector<double> source;

  const std::vector<double>& stream(Stream s) const {
    return s == Stream::words ? words : s == Stream::gaps ? gaps : source;
  }
};

struct SequenceInstance {
  Sentence mt;
  Sentence src;
  Alignment alignment;
  std::vector<std::vector<std::string>> extra_columns;  // [column][mt token]
  std::vector<StackedSystem> stacked;
};

inline std::size_t positions(const SequenceInstance& inst, Stream stream) {
  switch (stream) {
    case Stream::words: return inst.mt.size();
    case Stream::gaps: return inst.mt.size() + 1;
    case Stream::source: return inst.src.size();
  }
  return 0;
}

inline void validate(const SequenceInstance& inst) {
  for (const auto& column : inst.extra_columns) {
    if (column.size() != inst.mt.size()) throw LengthMismatch("extra column length differs from MT length");
  }
  for (const auto& p : inst.alignment) {
    if (p.src >= inst.src.size() || p.mt >= inst.mt.size()) throw IndexError("alignment point out of range");
  }
  for (const auto& s : inst.stacked) {
    for (Stream st : {Stream::words, Stream::gaps, Stream::source}) {
      const auto& probs = s.stream(st);
      if (!probs.empty() && probs.size() != positions(inst, st)) {
        throw LengthMismatch("stacked system " + s.system_id + ": " + std::string(stream_name(st)) +
                             " length mismatch");
      }
    }
  }
}

// Each template can be switched off independently.
struct TemplateConfig {
  bool bias = true;
  bool current_word = true;
  bool context_words = true;
  bool source_words = true;
  bool extra_columns = true;
  bool stacked = true;
  bool bigram = true;
  int bins = 10;

  bool operator==(const TemplateConfig&) const = default;
};

inline int stack_bin(double p, int bins) {
  const int b = static_cast<int>(std::floor(static_cast<double>(bins) * p));
  return std::clamp(b, 0, bins - 1);
}

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kNull = "<null>";

// Label-free observations at every position of `stream`.
inline std::vector<std::vector<std::string>> observations(const SequenceInstance& inst, Stream stream,
                                                          const TemplateConfig& tpl) {
  const std::size_t n = positions(inst, stream);
  std::vector<std::vector<std::string>> obs(n);
  auto word_at = [](const Sentence& s, std::ptrdiff_t i) -> std::string {
    if (i < 0) return std::string(kBos);
    if (static_cast<std::size_t>(i) >= s.size()) return std::string(kEos);
    return s[static_cast<std::size_t>(i)];
  };
  const auto mt_to_src = aligned_sources(inst.alignment, inst.mt.size());
  const auto src_to_mt = aligned_targets(inst.alignment, inst.src.size());

  for (std::size_t i = 0; i < n; ++i) {
    auto& o = obs[i];
    const auto pos = static_cast<std::ptrdiff_t>(i);
    if (tpl.bias) o.emplace_back("bias");
    switch (stream) {
      case Stream::words:
        if (tpl.current_word) o.push_back("w=" + inst.mt[i]);
        if (tpl.context_words) {
          o.push_back("w-1=" + word_at(inst.mt, pos - 1));
          o.push_back("w+1=" + word_at(inst.mt, pos + 1));
        }
        if (tpl.source_words) {
          if (mt_to_src[i].empty()) o.push_back("sw=" + std::string(kNull));
          for (std::size_t s : mt_to_src[i]) o.push_back("sw=" + inst.src[s]);
        }
        if (tpl.extra_columns) {
          for (std::size_t c = 0; c < inst.extra_columns.size(); ++c) {
            o.push_back("x" + std::to_string(c) + "=" + inst.extra_columns[c][i]);
          }
        }
        break;
      case Stream::gaps:
        if (tpl.current_word) {
          o.push_back("gl=" + word_at(inst.mt, pos - 1));
          o.push_back("gr=" + word_at(inst.mt, pos));
        }
        if (tpl.context_words) o.push_back("glr=" + word_at(inst.mt, pos - 1) + "|" + word_at(inst.mt, pos));
        break;
      case Stream::source:
        if (tpl.current_word) o.push_back("s=" + inst.src[i]);
        if (tpl.context_words) {
          o.push_back("s-1=" + word_at(inst.src, pos - 1));
          o.push_back("s+1=" + word_at(inst.src, pos + 1));
        }
        if (tpl.source_words) {
          if (src_to_mt[i].empty()) o.push_back("tw=" + std::string(kNull));
          for (std::size_t t : src_to_mt[i]) o.push_back("tw=" + inst.mt[t]);
        }
        break;
    }
    if (tpl.stacked) {
      for (const auto& sys : inst.stacked) {
        const auto& probs = sys.stream(stream);
        if (probs.empty()) continue;
        o.push_back("stack:" + sys.system_id + ":bin" + std::to_string(stack_bin(probs[i], tpl.bins)));
      }
    }
  }
  return obs;
}

inline std::string conjoin(std::string_view observation, Tag label) {
  return std::string(observation) + "^" + std::string(tag_name(label));
}

inline std::string bigram_observation(std::optional<Tag> prev) {
  return "prev=" + (prev ? std::string(tag_name(*prev)) : std::string("START"));
}

// Human-readable feature names at position i for label y with predecessor
// `prev` (nullopt = sentence start).
inline std::vector<std::string> feature_names(const SequenceInstance& inst, Stream stream, std::size_t i, Tag y,
                                              std::optional<Tag> prev, const TemplateConfig& tpl) {
  std::vector<std::string> names;
  const auto obs = observations(inst, stream, tpl);
  for (const auto& o : obs[i]) names.push_back(conjoin(o, y));
  if (tpl.bigram) names.push_back(conjoin(bigram_observation(prev), y));
  return names;
}

inline FeatureVector extract_features(const SequenceInstance& inst, Stream stream, std::size_t i, Tag y,
                                      std::optional<Tag> prev, const TemplateConfig& tpl) {
  FeatureVector keys;
  for (const auto& name : feature_names(inst, stream, i, y, prev, tpl)) keys.push_back(fnv1a(name));
  return keys;
}

inline constexpr std::size_t kStartState = 2;

inline std::size_t label_index(Tag t) { return t == Tag::bad ? 1 : 0; }
inline Tag label_of(std::size_t index) { return index == 1 ? Tag::bad : Tag::ok; }

// Feature keys of one sequence, precomputed for both labels.
struct EncodedSequence {
  std::vector<std::array<FeatureVector, 2>> unigram;  // [position][label]
  std::array<std::array<FeatureKey, 2>, 3> bigram{};  // [prev label or start][label]
  bool has_bigram = true;

  std::size_t size() const { return unigram.size(); }
};

inline EncodedSequence encode(const SequenceInstance& inst, Stream stream, const TemplateConfig& tpl) {
  EncodedSequence enc;
  const auto obs = observations(inst, stream, tpl);
  enc.unigram.resize(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (const auto& o : obs[i]) {
      const std::uint64_t state = fnv1a(o);
      enc.unigram[i][0].push_back(fnv1a("^OK", state));
      enc.unigram[i][1].push_back(fnv1a("^BAD", state));
    }
  }
  enc.has_bigram = tpl.bigram;
  for (std::size_t prev = 0; prev < 3; ++prev) {
    const std::string observation =
        prev == kStartState ? bigram_observation(std::nullopt) : bigram_observation(label_of(prev));
    for (std::size_t y = 0; y < 2; ++y) enc.bigram[prev][y] = fnv1a(conjoin(observation, label_of(y)));
  }
  return enc;
}

struct LinearModel {
  Stream stream = Stream::words;
  TemplateConfig templates;
  double C = 1.0;
  double gamma = 1.0;
  std::unordered_map<FeatureKey, double> weights;

  double weight(FeatureKey key) const {
    const auto it = weights.find(key);
    return it == weights.end() ? 0.0 : it->second;
  }

  bool finite() const {
    return std::all_of(weights.begin(), weights.end(), [](const auto& kv) { return std::isfinite(kv.second); });
  }
};

// Label scores at every position plus the transition scores.
struct ScoreTable {
  std::vector<std::array<double, 2>> unigram;
  std::array<std::array<double, 2>, 3> bigram{};

  std::size_t size() const { return unigram.size(); }
};

inline ScoreTable score_table(const EncodedSequence& enc, const LinearModel& model) {
  ScoreTable t;
  t.unigram.resize(enc.size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    for (std::size_t y = 0; y < 2; ++y) {
      double s = 0.0;
      for (FeatureKey k : enc.unigram[i][y]) s += model.weight(k);
      t.unigram[i][y] = s;
    }
  }
  if (enc.has_bigram) {
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t y = 0; y < 2; ++y) t.bigram[p][y] = model.weight(enc.bigram[p][y]);
    }
  }
  return t;
}

inline double sequence_score(const ScoreTable& t, std::span<const Tag> tags) {
  double s = 0.0;
  std::size_t prev = kStartState;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::size_t y = label_index(tags[i]);
    s += t.unigram[i][y] + t.bigram[prev][y];
    prev = y;
  }
  return s;
}

inline std::size_t hamming(std::span<const Tag> a, std::span<const Tag> b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i] ? 1 : 0;
  return d;
}

struct Decoding {
  TagSequence tags;
  double score = 0.0;      // model score w . phi
  double objective = 0.0;  // score plus Hamming cost when loss-augmented
};

// Exact argmax over label sequences. With `cost_gold`, each position whose
// label differs from the gold label earns +1 (loss-augmented decoding).
// Ties resolve toward OK.
inline Decoding viterbi(const ScoreTable& t, const TagSequence* cost_gold = nullptr) {
  const std::size_t n = t.size();
  Decoding out;
  if (n == 0) return out;
  if (cost_gold != nullptr && cost_gold->size() != n) throw LengthMismatch("viterbi: gold length differs");
  auto local = [&](std::size_t i, std::size_t y) {
    double s = t.unigram[i][y];
    if (cost_gold != nullptr && label_index((*cost_gold)[i]) != y) s += 1.0;
    return s;
  };
  std::vector<std::array<double, 2>> delta(n);
  std::vector<std::array<std::size_t, 2>> back(n);
  for (std::size_t y = 0; y < 2; ++y) delta[0][y] = local(0, y) + t.bigram[kStartState][y];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t y = 0; y < 2; ++y) {
      const double from_ok = delta[i - 1][0] + t.bigram[0][y];
      const double from_bad = delta[i - 1][1] + t.bigram[1][y];
      const std::size_t best = from_bad > from_ok ? 1 : 0;
      back[i][y] = best;
      delta[i][y] = (best == 1 ? from_bad : from_ok) + local(i, y);
    }
  }
  std::size_t y = delta[n - 1][1] > delta[n - 1][0] ? 1 : 0;
  out.objective = delta[n - 1][y];
  out.tags.assign(n, Tag::ok);
  for (std::size_t i = n; i-- > 0;) {
    out.tags[i] = label_of(y);
    if (i > 0) y = back[i][y];
  }
  out.score = sequence_score(t, out.tags);
  return out;
}

inline Decoding viterbi(const SequenceInstance& inst, const LinearModel& model, const TagSequence* cost_gold = nullptr) {
  return viterbi(score_table(encode(inst, model.stream, model.templates), model), cost_gold);
}

// max-marginal(BAD at i) - max-marginal(OK at i), via max-product
// forward-backward.
inline std::vector<double> max_marginal_margins(const ScoreTable& t) {
  const std::size_t n = t.size();
  std::vector<double> margins(n);
  if (n == 0) return margins;
  std::vector<std::array<double, 2>> alpha(n), beta(n);
  for (std::size_t y = 0; y < 2; ++y) alpha[0][y] = t.unigram[0][y] + t.bigram[kStartState][y];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t y = 0; y < 2; ++y) {
      alpha[i][y] = std::max(alpha[i - 1][0] + t.bigram[0][y], alpha[i - 1][1] + t.bigram[1][y]) + t.unigram[i][y];
    }
  }
  beta[n - 1] = {0.0, 0.0};
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t y = 0; y < 2; ++y) {
      beta[i][y] = std::max(t.bigram[y][0] + t.unigram[i + 1][0] + beta[i + 1][0],
                            t.bigram[y][1] + t.unigram[i + 1][1] + beta[i + 1][1]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) margins[i] = (alpha[i][1] + beta[i][1]) - (alpha[i][0] + beta[i][0]);
  return margins;
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// P(BAD) per position = logistic(gamma * max-marginal margin).
inline std::vector<double> predict_probs(const ScoreTable& t, double gamma) {
  std::vector<double> probs = max_marginal_margins(t);
  for (double& p : probs) p = logistic(gamma * p);
  return probs;
}

inline std::vector<double> predict_probs(const SequenceInstance& inst, const LinearModel& model, double gamma) {
  return predict_probs(score_table(encode(inst, model.stream, model.templates), model), gamma);
}

inline std::vector<double> predict_probs(const SequenceInstance& inst, const LinearModel& model) {
  return predict_probs(inst, model, model.gamma);
}

// phi(gold) - phi(guess) with zero entries removed, in key order.
inline std::map<FeatureKey, double> feature_difference(const EncodedSequence& enc, std::span<const Tag> gold,
                                                       std::span<const Tag> guess) {
  std::map<FeatureKey, double> diff;
  std::size_t prev_gold = kStartState;
  std::size_t prev_guess = kStartState;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const std::size_t g = label_index(gold[i]);
    const std::size_t h = label_index(guess[i]);
    for (FeatureKey k : enc.unigram[i][g]) diff[k] += 1.0;
    for (FeatureKey k : enc.unigram[i][h]) diff[k] -= 1.0;
    if (enc.has_bigram) {
      diff[enc.bigram[prev_gold][g]] += 1.0;
      diff[enc.bigram[prev_guess][h]] -= 1.0;
    }
    prev_gold = g;
    prev_guess = h;
  }
  for (auto it = diff.begin(); it != diff.end();) {
    it = it->second == 0.0 ? diff.erase(it) : std::next(it);
  }
  return diff;
}

struct MiraConfig {
  int epochs = 10;
  double C = 1.0;
  std::uint64_t seed = 1;
  bool average = true;
};

struct TrainingExample {
  SequenceInstance instance;
  TagSequence gold;  // gold tags of the stream being trained
};

struct MiraTrace {
  std::size_t updates = 0;
  std::size_t degenerate = 0;  // skipped: phi(gold) == phi(guess)
  double max_tau = 0.0;
  std::vector<double> epoch_loss;  // summed Hamming loss of loss-augmented guesses
};

// Averaged max-loss MIRA. Per example: decode the loss-augmented argmax;
// if it violates the margin, move the weights by
// tau = min(C, (score(guess) - score(gold) + loss) / |dphi|^2).
// With averaging the result is the mean of the weight vectors after every
// example visit.
inline LinearModel mira_train(std::span<const TrainingExample> data, Stream stream, const TemplateConfig& tpl,
                              const MiraConfig& config, MiraTrace* trace = nullptr) {
  if (config.epochs < 1) throw DegenerateInput("MIRA needs at least one epoch");
  if (!(config.C > 0.0)) throw DegenerateInput("MIRA aggressiveness C must be positive");

  std::vector<EncodedSequence> encoded;
  encoded.reserve(data.size());
  for (const auto& ex : data) {
    validate(ex.instance);
    if (ex.gold.size() != positions(ex.instance, stream)) {
      throw LengthMismatch("training example gold length differs from its " + std::string(stream_name(stream)) +
                           " positions");
    }
    encoded.push_back(encode(ex.instance, stream, tpl));
  }

  LinearModel model;
  model.stream = stream;
  model.templates = tpl;
  model.C = config.C;
  std::unordered_map<FeatureKey, double> scaled_sum;  // sum of step * update
  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double step = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      step += 1.0;
      const auto& enc = encoded[idx];
      const auto& gold = data[idx].gold;
      const ScoreTable table = score_table(enc, model);
      const Decoding guess = viterbi(table, &gold);
      const double loss = static_cast<double>(hamming(guess.tags, gold));
      epoch_loss += loss;
      const double gold_score = sequence_score(table, gold);
      const double violation = guess.score - gold_score + loss;
      if (loss == 0.0 || violation <= 0.0) continue;
      const auto diff = feature_difference(enc, gold, guess.tags);
      double norm2 = 0.0;
      for (const auto& [k, v] : diff) norm2 += v * v;
      if (norm2 == 0.0) {
        if (trace != nullptr) ++trace->degenerate;
        continue;
      }
      const double tau = std::min(config.C, violation / norm2);
      for (const auto& [k, v] : diff) {
        model.weights[k] += tau * v;
        if (config.average) scaled_sum[k] += step * tau * v;
      }
      if (trace != nullptr) {
        ++trace->updates;
        trace->max_tau = std::max(trace->max_tau, tau);
      }
    }
    if (trace != nullptr) trace->epoch_loss.push_back(epoch_loss);
  }

  if (config.average && step > 0.0) {
    for (auto& [k, w] : model.weights) {
      const auto it = scaled_sum.find(k);
      const double u = it == scaled_sum.end() ? 0.0 : it->second;
      w = ((step + 1.0) * w - u) / step;
    }
  }
  return model;
}

// Out-of-fold predictions over a contiguous k-fold split: fold i is
// predicted by a model trained on the other k-1 folds. `train` receives the
// training items; `predict(model, item)` produces one output per item.
template <typename Item, typename Train, typename Predict>
auto jackknife(std::span<const Item> data, std::size_t k, Train&& train, Predict&& predict, std::size_t jobs = 1) {
  using Model = std::invoke_result_t<Train&, std::span<const Item>>;
  using Output = std::invoke_result_t<Predict&, const Model&, const Item&>;
  const FoldPlan plan(data.size(), k);
  std::vector<Output> out(data.size());
  parallel_for(plan.k(), jobs, [&](std::size_t f) {
    std::vector<Item> training;
    for (std::size_t i : plan.training(f)) training.push_back(data[i]);
    const Model model = train(std::span<const Item>(training));
    const auto [begin, end] = plan.fold(f);
    for (std::size_t i = begin; i < end; ++i) out[i] = predict(model, data[i]);
  });
  return out;
}

struct TaggedPrediction {
  TagSequence tags;
  std::vector<double> probs;
};

inline TaggedPrediction predict(const SequenceInstance& inst, const LinearModel& model) {
  const ScoreTable table = score_table(encode(inst, model.stream, model.templates), model);
  return {viterbi(table).tags, predict_probs(table, model.gamma)};
}

inline std::vector<TaggedPrediction> jackknife_linear(std::span<const TrainingExample> data, std::size_t k, Stream stream,
                                                      const TemplateConfig& tpl, const MiraConfig& config,
                                                      double gamma = 1.0, std::size_t jobs = 1) {
  return jackknife(
      data, k,
      [&](std::span<const TrainingExample> part) {
        LinearModel m = mira_train(part, stream, tpl, config);
        m.gamma = gamma;
        return m;
      },
      [](const LinearModel& m, const TrainingExample& ex) { return predict(ex.instance, m); }, jobs);
}

// ---------------------------------------------------------------------------
// Model files: "#key=value" header lines, then "featurekey<TAB>weight" rows
// sorted by key (16 hex digits).

inline std::string template_list(const TemplateConfig& t) {
  std::vector<std::string> on;
  if (t.bias) on.emplace_back("bias");
  if (t.current_word) on.emplace_back("current_word");
  if (t.context_words) on.emplace_back("context_words");
  if (t.source_words) on.emplace_back("source_words");
  if (t.extra_columns) on.emplace_back("extra_columns");
  if (t.stacked) on.emplace_back("stacked");
  if (t.bigram) on.emplace_back("bigram");
  return text::join(on, ",", [](const std::string& s) { return s; });
}

inline TemplateConfig parse_template_list(std::string_view list, int bins) {
  TemplateConfig t{false, false, false, false, false, false, false, bins};
  for (auto name : text::split(list, ',')) {
    name = text::trim(name);
    if (name.empty()) continue;
    if (name == "bias") t.bias = true;
    else if (name == "current_word") t.current_word = true;
    else if (name == "context_words") t.context_words = true;
    else if (name == "source_words") t.source_words = true;
    else if (name == "extra_columns") t.extra_columns = true;
    else if (name == "stacked") t.stacked = true;
    else if (name == "bigram") t.bigram = true;
    else throw ParseError("unknown feature template '" + std::string(name) + "'");
  }
  return t;
}

inline std::string hex_key(FeatureKey key) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[key & 0xF];
    key >>= 4;
  }
  return s;
}

inline std::string serialize(const LinearModel& model) {
  std::string out = "#qestack-linear-model=1\n";
  out += "#stream=" + std::string(stream_name(model.stream)) + "\n";
  out += "#C=" + text::format_double(model.C) + "\n";
  out += "#gamma=" + text::format_double(model.gamma) + "\n";
  out += "#bins=" + std::to_string(model.templates.bins) + "\n";
  out += "#templates=" + template_list(model.templates) + "\n";
  std::vector<std::pair<FeatureKey, double>> rows(model.weights.begin(), model.weights.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [k, w] : rows) {
    if (w == 0.0) continue;
    out += hex_key(k) + "\t" + text::format_double(w) + "\n";
  }
  return out;
}

inline void save_model(const std::filesystem::path& path, const LinearModel& model) {
  text::write_file(path, serialize(model));
}

inline LinearModel load_model(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  LinearModel model;
  int bins = 10;
  std::string templates = template_list(TemplateConfig{});
  bool magic = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = line.substr(1, eq - 1);
      const auto value = line.substr(eq + 1);
      double d = 0.0;
      if (key == "qestack-linear-model") {
        magic = true;
      } else if (key == "stream") {
        auto s = parse_stream(value);
        if (!s) throw ParseError(path.string(), i + 1, "unknown stream");
        model.stream = *s;
      } else if (key == "C" && text::parse_double(value, d)) {
        model.C = d;
      } else if (key == "gamma" && text::parse_double(value, d)) {
        model.gamma = d;
      } else if (key == "bins" && text::parse_double(value, d)) {
        bins = static_cast<int>(d);
      } else if (key == "templates") {
        templates = std::string(value);
      } else {
        throw ParseError(path.string(), i + 1, "bad header line");
      }
      continue;
    }
    const auto fields = text::split(line, '\t');
    double w = 0.0;
    if (fields.size() != 2 || fields[0].size() != 16 || !text::parse_double(fields[1], w)) {
      throw ParseError(path.string(), i + 1, "expected featurekey<TAB>weight");
    }
    FeatureKey key = 0;
    for (char c : fields[0]) {
      int v = c >= '0' && c <= '9' ? c - '0' : c >= 'a' && c <= 'f' ? c - 'a' + 10 : -1;
      if (v < 0) throw ParseError(path.string(), i + 1, "bad feature key");
      key = (key << 4) | static_cast<FeatureKey>(v);
    }
    model.weights[key] = w;
  }
  if (!magic) throw ParseError(path.string(), 1, "not a linear model file");
  model.templates = parse_template_list(templates, bins);
  return model;
}

}  // namespace qestack::linear
