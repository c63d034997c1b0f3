#pragma once

// System ensembling.
//
// Word level: a convex combination of per-token BAD probabilities, with
// weights found by Powell search that maximizes F1-MULT on a development
// set, plus the k-fold protocol that estimates its held-out performance.
// Sentence level: l2-regularized linear regression over sentence scores and
// per-sentence averages of the word-level streams.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qestack/corpus.hpp"
#include "qestack/errors.hpp"
#include "qestack/folds.hpp"
#include "qestack/linearqe.hpp"
#include "qestack/metrics.hpp"
#include "qestack/powell.hpp"
#include "qestack/rng.hpp"
#include "qestack/text_io.hpp"

namespace qestack::ensemble {

// Nonnegative weights over the systems that provide `stream`. The
// combination uses weights / sum(weights).
struct WeightVector {
  Stream stream = Stream::words;
  std::vector<std::string> system_ids;
  std::vector<double> weights;
  double threshold = 0.5;
};

// Systems in `preds` are matched to weights by position.
inline ProbMatrix combine_word(std::span<const PredictionSet> preds, const WeightVector& w) {
  if (preds.size() != w.weights.size()) {
    throw LengthMismatch(std::to_string(w.weights.size()) + " weights for " + std::to_string(preds.size()) + " systems");
  }
  double total = 0.0;
  for (double v : w.weights) {
    if (!(v >= 0.0)) throw RangeError("ensemble weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw ZeroWeights("ensemble weights sum to zero");
  for (const auto& p : preds) {
    if (!p.has(w.stream)) {
      throw MissingStream("system " + p.system_id + " has no " + std::string(stream_name(w.stream)) + " predictions");
    }
  }
  const ProbMatrix& first = *preds.front().stream(w.stream);
  ProbMatrix out(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    out[i].assign(first[i].size(), 0.0);
    for (std::size_t s = 0; s < preds.size(); ++s) {
      const auto& rows = *preds[s].stream(w.stream);
      if (rows.size() != first.size() || rows[i].size() != first[i].size()) {
        throw LengthMismatch("system " + preds[s].system_id + " sentence " + std::to_string(i + 1) +
                             ": stream length differs");
      }
      const double share = w.weights[s] / total;
      for (std::size_t j = 0; j < rows[i].size(); ++j) out[i][j] += share * rows[i][j];
    }
    for (double& p : out[i]) p = std::clamp(p, 0.0, 1.0);
  }
  return out;
}

// Flattened token-level view of one stream over a subset of sentences; the
// Powell objective is evaluated on this.
struct StreamData {
  std::vector<std::string> system_ids;
  std::vector<std::vector<double>> probs;  // [system][token]
  TagSequence gold;

  std::size_t systems() const { return probs.size(); }
  std::size_t tokens() const { return gold.size(); }
};

// Systems lacking the stream are skipped. `sentences` selects and orders
// sentences; empty means all.
inline StreamData make_stream_data(std::span<const PredictionSet> preds, std::span<const TagSequence> gold, Stream stream,
                                   std::span<const std::size_t> sentences = {}) {
  std::vector<std::size_t> all;
  if (sentences.empty()) {
    all.resize(gold.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    sentences = all;
  }
  StreamData data;
  for (const auto& p : preds) {
    if (!p.has(stream)) continue;
    const auto& rows = *p.stream(stream);
    if (rows.size() != gold.size()) throw LengthMismatch("system " + p.system_id + ": sentence count differs from gold");
    std::vector<double> flat;
    for (std::size_t i : sentences) {
      if (rows[i].size() != gold[i].size()) {
        throw LengthMismatch("system " + p.system_id + " sentence " + std::to_string(i + 1) + ": length differs from gold");
      }
      flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    data.system_ids.push_back(p.system_id);
    data.probs.push_back(std::move(flat));
  }
  if (data.probs.empty()) throw MissingStream("no system provides " + std::string(stream_name(stream)) + " predictions");
  for (std::size_t i : sentences) data.gold.insert(data.gold.end(), gold[i].begin(), gold[i].end());
  return data;
}

// Thresholded combination scored against gold. Weights summing to zero
// score 0.
inline metrics::ContingencyTable ensemble_table(const StreamData& data, std::span<const double> weights, double threshold) {
  double total = 0.0;
  for (std::size_t s = 0; s < data.systems(); ++s) total += weights[s];
  metrics::ContingencyTable t;
  for (std::size_t i = 0; i < data.tokens(); ++i) {
    double p = 0.0;
    for (std::size_t s = 0; s < data.systems(); ++s) p += (weights[s] / total) * data.probs[s][i];
    const bool pred = std::clamp(p, 0.0, 1.0) >= threshold;
    const bool gold = data.gold[i] == Tag::bad;
    if (gold && pred) ++t.tp;
    else if (!gold && pred) ++t.fp;
    else if (gold) ++t.fn;
    else ++t.tn;
  }
  return t;
}

inline double ensemble_f1(const StreamData& data, std::span<const double> weights, double threshold) {
  double total = 0.0;
  for (std::size_t s = 0; s < data.systems(); ++s) total += weights[s];
  if (!(total > 0.0)) return 0.0;
  return metrics::f1_mult(ensemble_table(data, weights, threshold)).f1_mult;
}

struct WordEnsembleConfig {
  PowellOptions powell;
  double threshold = 0.5;
  bool optimize_threshold = false;  // search the threshold as an extra coordinate
};

inline WeightVector fit_word_ensemble(const StreamData& data, Stream stream, const WordEnsembleConfig& config = {}) {
  const std::size_t n = data.systems();
  // Start from the best single system (one-hot); the search can only
  // improve on it.
  std::size_t best = 0;
  double best_f1 = -1.0;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> onehot(n, 0.0);
    onehot[s] = 1.0;
    const double f1 = ensemble_f1(data, onehot, config.threshold);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = s;
    }
  }
  std::vector<double> init(n, 0.0);
  init[best] = 1.0;
  if (config.optimize_threshold) init.push_back(config.threshold);

  auto objective = [&](const std::vector<double>& x) {
    const double t = config.optimize_threshold ? x.back() : config.threshold;
    return -ensemble_f1(data, std::span<const double>(x.data(), n), t);
  };
  WeightVector w;
  w.stream = stream;
  w.system_ids = data.system_ids;
  w.threshold = config.threshold;
  if (n == 1 && !config.optimize_threshold) {
    w.weights = {1.0};
    return w;
  }
  // The objective is piecewise constant, so a single run can stall on a
  // plateau. Later starts (remaining one-hots, then the uniform mix) only
  // replace the result when strictly better.
  std::vector<std::vector<double>> starts{init};
  for (std::size_t s = 0; s < n; ++s) {
    if (s == best) continue;
    std::vector<double> p(init.size(), 0.0);
    p[s] = 1.0;
    if (config.optimize_threshold) p.back() = config.threshold;
    starts.push_back(std::move(p));
  }
  if (n > 1) {
    std::vector<double> p(init.size(), 1.0 / static_cast<double>(n));
    if (config.optimize_threshold) p.back() = config.threshold;
    starts.push_back(std::move(p));
  }
  PowellResult r = powell_optimize(objective, starts.front(), config.powell);
  for (std::size_t i = 1; i < starts.size(); ++i) {
    PowellResult alt = powell_optimize(objective, starts[i], config.powell);
    if (alt.value < r.value) r = std::move(alt);
  }
  w.weights.assign(r.point.begin(), r.point.begin() + static_cast<std::ptrdiff_t>(n));
  if (config.optimize_threshold) w.threshold = r.point.back();
  return w;
}

inline WeightVector fit_word_ensemble(std::span<const PredictionSet> preds, std::span<const TagSequence> gold, Stream stream,
                                      const WordEnsembleConfig& config = {}) {
  return fit_word_ensemble(make_stream_data(preds, gold, stream), stream, config);
}

// Systems of `preds` that carry `w`'s stream, in weight order.
inline std::vector<PredictionSet> participating(std::span<const PredictionSet> preds, const WeightVector& w) {
  std::vector<PredictionSet> out;
  for (const auto& id : w.system_ids) {
    const auto it = std::find_if(preds.begin(), preds.end(), [&](const PredictionSet& p) { return p.system_id == id; });
    if (it == preds.end()) throw MissingStream("system " + id + " named in the weights is not available");
    out.push_back(*it);
  }
  return out;
}

struct KFoldEstimate {
  double f1_mult = 0.0;
  std::vector<WeightVector> fold_weights;
  TagSequence predictions;  // held-out predictions, concatenated in sentence order
};

// For each fold, fits weights on the remaining folds and predicts the fold
// with them; F1-MULT is computed over the concatenation of held-out
// predictions.
inline KFoldEstimate kfold_estimate(std::span<const PredictionSet> preds, std::span<const TagSequence> gold,
                                    const FoldPlan& plan, Stream stream, const WordEnsembleConfig& config = {},
                                    std::size_t jobs = 1) {
  if (plan.size() != gold.size()) throw LengthMismatch("fold plan does not match the number of sentences");
  KFoldEstimate est;
  est.fold_weights.resize(plan.k());
  std::vector<TagSequence> fold_preds(plan.k());
  parallel_for(plan.k(), jobs, [&](std::size_t f) {
    const auto train_idx = plan.training(f);
    const auto test_idx = plan.held_out(f);
    const StreamData train = make_stream_data(preds, gold, stream, train_idx);
    est.fold_weights[f] = fit_word_ensemble(train, stream, config);
    const StreamData test = make_stream_data(preds, gold, stream, test_idx);
    const auto& w = est.fold_weights[f];
    double total = std::accumulate(w.weights.begin(), w.weights.end(), 0.0);
    for (std::size_t i = 0; i < test.tokens(); ++i) {
      double p = 0.0;
      for (std::size_t s = 0; s < test.systems(); ++s) p += (w.weights[s] / total) * test.probs[s][i];
      fold_preds[f].push_back(std::clamp(p, 0.0, 1.0) >= w.threshold ? Tag::bad : Tag::ok);
    }
  });
  for (const auto& p : fold_preds) est.predictions.insert(est.predictions.end(), p.begin(), p.end());
  const TagSequence all_gold = metrics::flatten(gold);
  est.f1_mult = metrics::f1_mult(all_gold, est.predictions).f1_mult;
  return est;
}

// Copies each system's probabilities into the instances as stacked features.
inline void attach_stacked(std::span<linear::SequenceInstance> instances, std::span<const PredictionSet> preds) {
  for (const auto& p : preds) {
    for (std::size_t i = 0; i < instances.size(); ++i) {
      linear::StackedSystem s;
      s.system_id = p.system_id;
      if (p.words) s.words = p.words->at(i);
      if (p.gaps) s.gaps = p.gaps->at(i);
      if (p.source) s.source = p.source->at(i);
      instances[i].stacked.push_back(std::move(s));
    }
  }
}

// Held-out F1-MULT of the stacked linear ensemble: base-system predictions
// enter the linear model as features, and out-of-fold decoding over the
// same contiguous split provides the estimate.
inline double stacked_linear_estimate(std::span<const linear::TrainingExample> examples, std::size_t k, Stream stream,
                                      const linear::TemplateConfig& tpl, const linear::MiraConfig& mira,
                                      std::size_t jobs = 1) {
  const auto oof = linear::jackknife_linear(examples, k, stream, tpl, mira, 1.0, jobs);
  TagSequence gold, pred;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    gold.insert(gold.end(), examples[i].gold.begin(), examples[i].gold.end());
    pred.insert(pred.end(), oof[i].tags.begin(), oof[i].tags.end());
  }
  return metrics::f1_mult(gold, pred).f1_mult;
}

// ---------------------------------------------------------------------------
// Sentence level.

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
};

// Per sentence and system: the sentence score (if any) and the mean BAD
// probability of every stream the system provides. Streams a system lacks
// are omitted for all sentences.
inline FeatureMatrix sentence_features(std::span<const PredictionSet> preds) {
  if (preds.empty()) throw EmptyInput("sentence features need at least one system");
  FeatureMatrix fm;
  std::optional<std::size_t> count;
  auto check = [&](std::size_t n, const std::string& what) {
    if (!count) count = n;
    else if (*count != n) throw LengthMismatch(what + ": sentence count differs between systems");
  };
  for (const auto& p : preds) {
    if (p.sentence_scores) check(p.sentence_scores->size(), p.system_id);
    for (Stream s : {Stream::words, Stream::gaps, Stream::source}) {
      if (p.has(s)) check(p.stream(s)->size(), p.system_id);
    }
  }
  if (!count) throw MissingStream("no system provides any sentence-level signal");
  fm.rows.assign(*count, {});
  for (const auto& p : preds) {
    if (p.sentence_scores) {
      fm.names.push_back(p.system_id + ":score");
      for (std::size_t i = 0; i < *count; ++i) fm.rows[i].push_back((*p.sentence_scores)[i]);
    }
    for (Stream s : {Stream::words, Stream::gaps, Stream::source}) {
      if (!p.has(s)) continue;
      fm.names.push_back(p.system_id + ":" + std::string(stream_name(s)));
      for (std::size_t i = 0; i < *count; ++i) {
        const auto& row = (*p.stream(s))[i];
        double sum = 0.0;
        for (double v : row) sum += v;
        fm.rows[i].push_back(row.empty() ? 0.0 : sum / static_cast<double>(row.size()));
      }
    }
  }
  return fm;
}

struct RidgeModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  bool fit_intercept = true;
  std::vector<std::string> feature_names;

  double predict(std::span<const double> row) const {
    if (row.size() != coefficients.size()) throw LengthMismatch("ridge: row has the wrong number of features");
    double y = intercept;
    for (std::size_t j = 0; j < row.size(); ++j) y += coefficients[j] * row[j];
    return y;
  }

  std::vector<double> predict(const std::vector<std::vector<double>>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(predict(r));
    return out;
  }
};

// Solves (X'X + lambda I) beta = X'y, leaving the intercept unpenalized.
// With an intercept the problem is solved on centred data, which is the
// same solution and better conditioned.
inline RidgeModel ridge_fit(const std::vector<std::vector<double>>& X, std::span<const double> y, double lambda,
                            bool fit_intercept = true, std::vector<std::string> names = {}) {
  const std::size_t n = X.size();
  if (n != y.size()) throw LengthMismatch("ridge: " + std::to_string(n) + " rows, " + std::to_string(y.size()) + " targets");
  if (n < 2) throw DegenerateInput("ridge needs at least two rows");
  if (!(lambda >= 0.0)) throw RangeError("ridge lambda must be nonnegative");
  const std::size_t d = X.front().size();
  for (const auto& r : X) {
    if (r.size() != d) throw LengthMismatch("ridge: ragged design matrix");
  }
  if (!names.empty() && names.size() != d) throw LengthMismatch("ridge: feature name count differs from columns");

  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
    b(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
  double y_mean = 0.0;
  if (fit_intercept) {
    x_mean = A.colwise().mean();
    y_mean = b.mean();
    A.rowwise() -= x_mean;
    b.array() -= y_mean;
  }

  RidgeModel model;
  model.lambda = lambda;
  model.fit_intercept = fit_intercept;
  if (names.empty()) {
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  }
  model.feature_names = std::move(names);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  if (d > 0) {
    Eigen::MatrixXd gram = A.transpose() * A;
    gram.diagonal().array() += lambda;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) throw SingularSystem("ridge normal equations are singular (lambda = " + text::format_double(lambda) + ")");
    beta = lu.solve(A.transpose() * b);
  }
  model.coefficients.assign(beta.data(), beta.data() + beta.size());
  model.intercept = fit_intercept ? y_mean - (x_mean * beta)(0) : 0.0;
  if (fit_intercept && d == 0) model.intercept = y_mean;
  return model;
}

struct RidgeCvResult {
  double lambda = 0.0;
  RidgeModel model;
  std::vector<double> cv_errors;  // mean held-out squared error per grid value
};

// Picks the lambda minimizing mean held-out squared error over k folds of a
// seeded row permutation (ties go to the larger lambda), then refits on all
// rows.
inline RidgeCvResult ridge_cv(const std::vector<std::vector<double>>& X, std::span<const double> y,
                              std::span<const double> lambda_grid, std::size_t k, std::uint64_t seed,
                              bool fit_intercept = true, std::vector<std::string> names = {}) {
  if (lambda_grid.empty()) throw EmptyInput("ridge_cv needs a non-empty lambda grid");
  if (X.size() != y.size()) throw LengthMismatch("ridge_cv: rows and targets differ");
  std::vector<std::size_t> perm(X.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  const FoldPlan plan(X.size(), k);

  RidgeCvResult result;
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : lambda_grid) {
    double err_sum = 0.0;
    for (std::size_t f = 0; f < plan.k(); ++f) {
      std::vector<std::vector<double>> Xtr;
      std::vector<double> ytr;
      for (std::size_t i : plan.training(f)) {
        Xtr.push_back(X[perm[i]]);
        ytr.push_back(y[perm[i]]);
      }
      double fold_err = 0.0;
      try {
        const RidgeModel m = ridge_fit(Xtr, ytr, lambda, fit_intercept);
        const auto held = plan.held_out(f);
        for (std::size_t i : held) {
          const double r = m.predict(X[perm[i]]) - y[perm[i]];
          fold_err += r * r;
        }
        fold_err /= static_cast<double>(held.size());
      } catch (const SingularSystem&) {
        fold_err = std::numeric_limits<double>::infinity();
      }
      err_sum += fold_err;
    }
    const double err = err_sum / static_cast<double>(plan.k());
    result.cv_errors.push_back(err);
    if (err < best_err || (err == best_err && lambda > result.lambda)) {
      best_err = err;
      result.lambda = lambda;
    }
  }
  if (!std::isfinite(best_err)) result.lambda = *std::max_element(lambda_grid.begin(), lambda_grid.end());
  result.model = ridge_fit(X, y, result.lambda, fit_intercept, std::move(names));
  return result;
}

// Ridge predictions clamped to [0,1] (the HTER range).
inline std::vector<double> predict_sentence_scores(const RidgeModel& model, const FeatureMatrix& features) {
  if (features.names != model.feature_names) {
    throw LengthMismatch("sentence features do not match the model's features");
  }
  std::vector<double> out = model.predict(features.rows);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Files.
//
// Manifest: one line per (system, stream): "system_id<TAB>stream<TAB>path",
// stream one of words, gaps, source, target (interleaved), sentence.
// Relative paths are resolved against the manifest's directory; lines
// starting with '#' are comments.

inline std::vector<PredictionPaths> load_manifest(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  std::vector<PredictionPaths> systems;
  const auto base = path.parent_path();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto trimmed = text::trim(lines[i]);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = text::split_ws(lines[i]);
    if (fields.size() != 3) throw ParseError(path.string(), i + 1, "expected system_id, stream and path");
    const std::string id(fields[0]);
    auto it = std::find_if(systems.begin(), systems.end(), [&](const PredictionPaths& p) { return p.system_id == id; });
    if (it == systems.end()) {
      systems.push_back(PredictionPaths{id, {}, {}, {}, {}, {}});
      it = std::prev(systems.end());
    }
    std::filesystem::path file{std::string(fields[2])};
    if (file.is_relative()) file = base / file;
    const std::string_view stream = fields[1];
    std::optional<std::filesystem::path>* slot = nullptr;
    if (stream == "words") slot = &it->words;
    else if (stream == "gaps") slot = &it->gaps;
    else if (stream == "source") slot = &it->source;
    else if (stream == "target") slot = &it->target;
    else if (stream == "sentence") slot = &it->sentence;
    else throw ParseError(path.string(), i + 1, "unknown stream '" + std::string(stream) + "'");
    if (slot->has_value()) throw ParseError(path.string(), i + 1, "duplicate stream for system " + id);
    *slot = file;
  }
  if (systems.empty()) throw EmptyInput(path.string() + ": manifest lists no systems");
  return systems;
}

inline std::vector<PredictionSet> load_systems(const std::filesystem::path& manifest, const TaggedCorpus& corpus) {
  std::vector<PredictionSet> out;
  for (const auto& p : load_manifest(manifest)) out.push_back(load_predictions(p, corpus));
  return out;
}

// "# stream=<s> threshold=<t>" header, then "system_id<TAB>weight" lines.
inline void save_weights(const std::filesystem::path& path, const WeightVector& w) {
  std::string out = "# stream=" + std::string(stream_name(w.stream)) + " threshold=" + text::format_double(w.threshold) + "\n";
  for (std::size_t s = 0; s < w.weights.size(); ++s) {
    out += w.system_ids[s] + "\t" + text::format_double(w.weights[s]) + "\n";
  }
  text::write_file(path, out);
}

inline WeightVector load_weights(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  WeightVector w;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.front() == '#') {
      for (auto field : text::split_ws(line.substr(1))) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (key == "stream") {
          auto s = parse_stream(value);
          if (!s) throw ParseError(path.string(), i + 1, "unknown stream");
          w.stream = *s;
        } else if (key == "threshold") {
          if (!text::parse_double(value, w.threshold)) throw ParseError(path.string(), i + 1, "bad threshold");
        }
      }
      continue;
    }
    const auto fields = text::split(line, '\t');
    double v = 0.0;
    if (fields.size() != 2 || !text::parse_double(fields[1], v)) {
      throw ParseError(path.string(), i + 1, "expected system_id<TAB>weight");
    }
    w.system_ids.emplace_back(fields[0]);
    w.weights.push_back(v);
  }
  if (w.weights.empty()) throw EmptyInput(path.string() + ": no weights");
  return w;
}

inline std::string serialize(const RidgeModel& m) {
  std::string out = "#qestack-ridge-model=1\n";
  out += "#lambda=" + text::format_double(m.lambda) + "\n";
  out += "#fit_intercept=" + std::string(m.fit_intercept ? "1" : "0") + "\n";
  out += "#intercept=" + text::format_double(m.intercept) + "\n";
  for (std::size_t j = 0; j < m.coefficients.size(); ++j) {
    out += m.feature_names[j] + "\t" + text::format_double(m.coefficients[j]) + "\n";
  }
  return out;
}

inline void save_ridge(const std::filesystem::path& path, const RidgeModel& m) { text::write_file(path, serialize(m)); }

inline RidgeModel load_ridge(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  RidgeModel m;
  bool magic = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = line.substr(1, eq - 1);
      const auto value = line.substr(eq + 1);
      double d = 0.0;
      if (key == "qestack-ridge-model") magic = true;
      else if (key == "lambda" && text::parse_double(value, d)) m.lambda = d;
      else if (key == "intercept" && text::parse_double(value, d)) m.intercept = d;
      else if (key == "fit_intercept") m.fit_intercept = value == "1";
      else throw ParseError(path.string(), i + 1, "bad header line");
      continue;
    }
    const auto fields = text::split(line, '\t');
    double v = 0.0;
    if (fields.size() != 2 || !text::parse_double(fields[1], v)) {
      throw ParseError(path.string(), i + 1, "expected feature<TAB>coefficient");
    }
    m.feature_names.emplace_back(fields[0]);
    m.coefficients.push_back(v);
  }
  if (!magic) throw ParseError(path.string(), 1, "not a ridge model file");
  return m;
}

}  // namespace qestack::ensemble
