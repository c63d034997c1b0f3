#pragma once

// Command-line front end. `run` parses arguments, resolves the effective
// configuration and dispatches to the library; it never exits the process,
// so it can be driven from tests.
//
// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qestack/config.hpp"
#include "qestack/corpus.hpp"
#include "qestack/doclevel.hpp"
#include "qestack/ensemble.hpp"
#include "qestack/errors.hpp"
#include "qestack/folds.hpp"
#include "qestack/labeler.hpp"
#include "qestack/linearqe.hpp"
#include "qestack/metrics.hpp"
#include "qestack/text_io.hpp"

#ifndef QESTACK_VERSION
#define QESTACK_VERSION "0.1.0"
#endif

namespace qestack::cli {

namespace fs = std::filesystem;

using Report = std::vector<std::pair<std::string, std::string>>;

struct Context {
  std::ostream& out;
  std::ostream& err;
  RunConfig config;
  std::map<std::string, std::string> overrides;  // from flags, applied after the file
  std::vector<std::string> sets;                  // --set key=value
  std::string config_path;
  std::string format = "table";
  std::string command;

  void print(const Report& report) const {
    if (format == "kv") {
      for (const auto& [k, v] : report) out << k << "=" << v << "\n";
      return;
    }
    std::size_t width = 0;
    for (const auto& [k, v] : report) width = std::max(width, k.size());
    for (const auto& [k, v] : report) out << k << std::string(width - k.size() + 2, ' ') << v << "\n";
  }

  void snapshot(const fs::path& output) const {
    text::write_file(fs::path(output.string() + ".run.cfg"), config.snapshot(command));
  }

  std::size_t jobs() const { return static_cast<std::size_t>(config.get_int("jobs")); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(config.get_int("seed")); }
  TagLayout layout() const { return config.get("layout") == "words_only" ? TagLayout::words_only : TagLayout::interleaved; }

  linear::TemplateConfig templates() const {
    return linear::parse_template_list(config.get("templates"), static_cast<int>(config.get_int("bins")));
  }

  linear::MiraConfig mira() const {
    linear::MiraConfig m;
    m.epochs = static_cast<int>(config.get_int("epochs"));
    m.C = config.get_real("C");
    m.seed = seed();
    m.average = config.get_bool("average");
    return m;
  }

  ensemble::WordEnsembleConfig word_ensemble() const {
    ensemble::WordEnsembleConfig c;
    c.powell.tol = config.get_real("powell.tol");
    c.powell.max_cycles = static_cast<int>(config.get_int("powell.max_cycles"));
    c.powell.line_samples = static_cast<int>(config.get_int("powell.line_samples"));
    c.threshold = config.get_real("threshold");
    c.optimize_threshold = config.get_bool("optimize_threshold");
    return c;
  }

  doc::MqmWeights mqm_weights() const {
    return {config.get_real("mqm.minor"), config.get_real("mqm.major"), config.get_real("mqm.critical")};
  }

  std::optional<double> mqm_floor() const {
    if (config.get("mqm.floor") == "none") return std::nullopt;
    return config.get_real("mqm.floor");
  }
};

inline std::string fmt(double v) { return text::format_fixed(v, 6); }

inline Stream require_stream(const std::string& name) {
  const auto s = parse_stream(name);
  if (!s) throw ConfigError("unknown stream '" + name + "' (expected words, gaps or source)");
  return *s;
}

inline std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

inline std::string key_flag_name(std::string_view key) {
  std::string name = "--";
  for (char c : key) name += (c == '.' || c == '_') ? '-' : c;
  return name;
}

// Registers a flag that overrides config key `key`.
inline void key_flag(CLI::App* app, Context& ctx, std::string_view key) {
  const KeySpec* spec = find_key(key);
  const std::string k(key);
  app->add_option_function<std::string>(
      key_flag_name(key), [&ctx, k](const std::string& v) { ctx.overrides[k] = v; },
      spec ? std::string(spec->help) + " (config key " + k + ")" : k);
}

// Words and gaps of one target line in the given layout.
inline TargetTags split_target(std::span<const Tag> line, TagLayout layout) {
  return layout == TagLayout::interleaved ? deinterleave(line) : TargetTags{TagSequence(line.begin(), line.end()), {}};
}

inline std::vector<Sentence> read_extra_column(const fs::path& path, const TaggedCorpus& corpus) {
  const auto lines = text::read_lines(path);
  if (lines.size() != corpus.size()) {
    throw LengthMismatch(path.string(), std::min(lines.size(), corpus.size()) + 1,
                         "file has " + std::to_string(lines.size()) + " lines, expected " +
                             std::to_string(corpus.size()));
  }
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Sentence row;
    for (auto f : text::split_ws(lines[i])) row.emplace_back(f);
    if (row.size() != corpus[i].mt.size()) {
      throw LengthMismatch(path.string(), i + 1,
                           std::to_string(row.size()) + " values for " + std::to_string(corpus[i].mt.size()) +
                               " MT tokens");
    }
    out.push_back(std::move(row));
  }
  return out;
}

struct CorpusArgs {
  std::string src, mt, pe, tags, source_tags, hter, align;

  TaggedCorpus load(TagLayout layout) const {
    CorpusPaths p;
    p.src = opt_path(src);
    p.mt = opt_path(mt);
    p.pe = opt_path(pe);
    p.tags = opt_path(tags);
    p.source_tags = opt_path(source_tags);
    p.hter = opt_path(hter);
    p.align = opt_path(align);
    return load_corpus(p, layout);
  }
};

struct LinearArgs {
  CorpusArgs corpus;
  std::vector<std::string> extra;
  std::string stack;
  std::string stream = "words";
  std::string model;
  std::string out_prefix;
};

inline std::vector<linear::SequenceInstance> build_instances(const LinearArgs& a, const TaggedCorpus& corpus) {
  std::vector<linear::SequenceInstance> instances(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    instances[i].mt = corpus[i].mt;
    instances[i].src = corpus[i].src;
    if (corpus[i].alignment) instances[i].alignment = *corpus[i].alignment;
  }
  for (const auto& path : a.extra) {
    const auto column = read_extra_column(path, corpus);
    for (std::size_t i = 0; i < corpus.size(); ++i) instances[i].extra_columns.push_back(column[i]);
  }
  if (!a.stack.empty()) {
    const auto systems = ensemble::load_systems(a.stack, corpus);
    ensemble::attach_stacked(instances, systems);
  }
  return instances;
}

inline std::vector<linear::TrainingExample> training_examples(const LinearArgs& a, const TaggedCorpus& corpus,
                                                              Stream stream) {
  auto instances = build_instances(a, corpus);
  const auto gold = gold_tags(corpus, stream);
  std::vector<linear::TrainingExample> out;
  for (std::size_t i = 0; i < instances.size(); ++i) out.push_back({std::move(instances[i]), gold[i]});
  return out;
}

inline void write_tagged(const std::string& prefix, const std::vector<linear::TaggedPrediction>& preds) {
  std::vector<TagSequence> tags;
  ProbMatrix probs;
  for (const auto& p : preds) {
    tags.push_back(p.tags);
    probs.push_back(p.probs);
  }
  write_tags(prefix + ".tags", tags);
  write_probs(prefix + ".probs", probs);
}

inline std::vector<TagSequence> split_flat(const TagSequence& flat, std::span<const std::size_t> lengths) {
  std::vector<TagSequence> out;
  std::size_t pos = 0;
  for (std::size_t n : lengths) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return out;
}

inline std::vector<std::size_t> doc_target_lengths(std::span<const doc::Document> docs, TagLayout layout) {
  std::vector<std::size_t> lengths;
  for (const auto& d : docs) {
    for (const auto& toks : d.token_offsets) {
      lengths.push_back(layout == TagLayout::interleaved ? 2 * toks.size() + 1 : toks.size());
    }
  }
  return lengths;
}

// Per-document tags from a concatenated target file (tags or probabilities).
inline std::vector<std::vector<TargetTags>> load_doc_tags(const fs::path& path, std::span<const doc::Document> docs,
                                                          TagLayout layout, double threshold) {
  const auto lengths = doc_target_lengths(docs, layout);
  const ProbMatrix rows = load_prob_stream(path, lengths);
  std::vector<std::vector<TargetTags>> out;
  std::size_t line = 0;
  for (const auto& d : docs) {
    std::vector<TargetTags> tags;
    for (std::size_t s = 0; s < d.sentences.size(); ++s, ++line) {
      tags.push_back(split_target(metrics::threshold(rows[line], threshold), layout));
    }
    out.push_back(std::move(tags));
  }
  return out;
}

inline doc::AnnotationSet annotations_for(const doc::AnnotationSet& set, std::span<const doc::Document> docs,
                                          const std::string& file) {
  for (const auto& [id, anns] : set) {
    if (std::none_of(docs.begin(), docs.end(), [&](const doc::Document& d) { return d.id == id; })) {
      throw SpanOutOfBounds(file + ": unknown document " + id);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Subcommands.

inline void cmd_evaluate(Context& ctx, const std::string& gold_path, const std::string& pred_path,
                         const std::string& stream_name, const std::string& out) {
  Report report;
  if (stream_name == "sentence") {
    const auto gold = load_scores(gold_path);
    const auto pred = load_scores(pred_path, gold.size());
    report.emplace_back("pearson", fmt(metrics::pearson(gold, pred)));
    report.emplace_back("sentences", std::to_string(gold.size()));
  } else {
    if (stream_name != "target" && !parse_stream(stream_name)) {
      throw ConfigError("unknown stream '" + stream_name + "' (expected target, words, gaps, source or sentence)");
    }
    const TagLayout layout = stream_name == "source" ? TagLayout::words_only : ctx.layout();
    const auto gold_lines = text::read_lines(gold_path);
    std::vector<TagSequence> gold;
    std::vector<std::size_t> lengths;
    for (std::size_t i = 0; i < gold_lines.size(); ++i) {
      gold.push_back(detail::parse_tag_line(gold_lines[i], gold_path, i + 1));
      if (layout == TagLayout::interleaved && gold.back().size() % 2 == 0) {
        throw LengthMismatch(gold_path, i + 1, "interleaved tag line must have 2N+1 entries");
      }
      lengths.push_back(gold.back().size());
    }
    const bool sub_stream = stream_name == "words" || stream_name == "gaps";
    if (sub_stream && layout == TagLayout::words_only && stream_name == "gaps") {
      throw MissingStream("gap tags are not available in words_only layout");
    }
    std::vector<TagSequence> gold_rows;
    for (const auto& gi : gold) {
      if (!sub_stream) {
        gold_rows.push_back(gi);
        continue;
      }
      const TargetTags gt = split_target(gi, layout);
      gold_rows.push_back(stream_name == "words" ? gt.words : gt.gaps);
    }
    // Sub-stream predictions may cover the whole target line or just the
    // requested stream; the first line decides which.
    bool stream_only = false;
    if (sub_stream && layout == TagLayout::interleaved && !gold.empty()) {
      const auto first = text::read_lines(pred_path);
      stream_only = !first.empty() && text::split_ws(first.front()).size() == gold_rows.front().size();
    }
    std::vector<std::size_t> pred_lengths;
    for (std::size_t i = 0; i < gold.size(); ++i) pred_lengths.push_back(stream_only ? gold_rows[i].size() : lengths[i]);
    const ProbMatrix pred_rows = load_prob_stream(pred_path, pred_lengths);
    const double t = ctx.config.get_real("threshold");
    TagSequence g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      TagSequence pi = metrics::threshold(pred_rows[i], t);
      if (sub_stream && !stream_only) {
        const TargetTags pt = split_target(pi, layout);
        pi = stream_name == "words" ? pt.words : pt.gaps;
      }
      g.insert(g.end(), gold_rows[i].begin(), gold_rows[i].end());
      p.insert(p.end(), pi.begin(), pi.end());
    }
    const auto r = metrics::evaluate_tags(g, p);
    report.emplace_back("f1_mult", fmt(r.f1.f1_mult));
    report.emplace_back("f1_ok", fmt(r.f1.f1_ok));
    report.emplace_back("f1_bad", fmt(r.f1.f1_bad));
    report.emplace_back("mcc", fmt(r.mcc));
    report.emplace_back("tp", std::to_string(r.table.tp));
    report.emplace_back("fp", std::to_string(r.table.fp));
    report.emplace_back("tn", std::to_string(r.table.tn));
    report.emplace_back("fn", std::to_string(r.table.fn));
  }
  ctx.print(report);
  if (!out.empty()) {
    std::string body;
    for (const auto& [k, v] : report) body += k + "=" + v + "\n";
    text::write_file(out, body);
    ctx.snapshot(out);
  }
}

inline void cmd_make_labels(Context& ctx, const CorpusArgs& args, const std::string& prefix) {
  const TaggedCorpus corpus = args.load(TagLayout::interleaved);
  const bool cap = ctx.config.get_bool("hter_cap");
  const bool with_source = !args.src.empty() && !args.align.empty();
  std::vector<labeler::Labels> labels(corpus.size());
  parallel_for(corpus.size(), ctx.jobs(), [&](std::size_t i) {
    const auto& e = corpus[i];
    labels[i] = labeler::make_labels(e.mt, *e.pe, cap, with_source ? &e.src : nullptr,
                                     with_source ? &*e.alignment : nullptr);
  });
  std::vector<TargetTags> target;
  std::vector<TagSequence> source;
  std::vector<double> hter;
  std::size_t bad_words = 0, words = 0, bad_gaps = 0, gaps = 0;
  for (const auto& l : labels) {
    target.push_back(l.target);
    hter.push_back(l.hter);
    if (l.source) source.push_back(*l.source);
    words += l.target.words.size();
    gaps += l.target.gaps.size();
    bad_words += static_cast<std::size_t>(std::count(l.target.words.begin(), l.target.words.end(), Tag::bad));
    bad_gaps += static_cast<std::size_t>(std::count(l.target.gaps.begin(), l.target.gaps.end(), Tag::bad));
  }
  write_tags(prefix + ".tags", target, ctx.layout());
  write_scores(prefix + ".hter", hter);
  if (with_source) write_tags(prefix + ".source_tags", source);
  ctx.snapshot(prefix);

  double mean = 0.0;
  for (double h : hter) mean += h;
  mean /= static_cast<double>(std::max<std::size_t>(hter.size(), 1));
  ctx.print({{"sentences", std::to_string(corpus.size())},
             {"mean_hter", fmt(mean)},
             {"bad_word_rate", fmt(static_cast<double>(bad_words) / static_cast<double>(std::max<std::size_t>(words, 1)))},
             {"bad_gap_rate", fmt(static_cast<double>(bad_gaps) / static_cast<double>(std::max<std::size_t>(gaps, 1)))}});
}

inline double tagged_f1(const std::vector<linear::TaggedPrediction>& preds, std::span<const TagSequence> gold) {
  TagSequence g, p;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    g.insert(g.end(), gold[i].begin(), gold[i].end());
    p.insert(p.end(), preds[i].tags.begin(), preds[i].tags.end());
  }
  return metrics::f1_mult(g, p).f1_mult;
}

inline void cmd_linear_train(Context& ctx, const LinearArgs& a) {
  const Stream stream = require_stream(a.stream);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto examples = training_examples(a, corpus, stream);
  linear::MiraTrace trace;
  linear::LinearModel model = linear::mira_train(examples, stream, ctx.templates(), ctx.mira(), &trace);
  model.gamma = ctx.config.get_real("gamma");
  linear::save_model(a.model, model);
  ctx.snapshot(a.model);

  std::vector<linear::TaggedPrediction> preds;
  std::vector<TagSequence> gold;
  for (const auto& ex : examples) {
    preds.push_back(linear::predict(ex.instance, model));
    gold.push_back(ex.gold);
  }
  ctx.print({{"sentences", std::to_string(examples.size())},
             {"features", std::to_string(model.weights.size())},
             {"updates", std::to_string(trace.updates)},
             {"train_f1_mult", fmt(tagged_f1(preds, gold))}});
}

inline void cmd_linear_predict(Context& ctx, const LinearArgs& a) {
  const linear::LinearModel model = linear::load_model(a.model);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto instances = build_instances(a, corpus);
  std::vector<linear::TaggedPrediction> preds(instances.size());
  parallel_for(instances.size(), ctx.jobs(), [&](std::size_t i) { preds[i] = linear::predict(instances[i], model); });
  write_tagged(a.out_prefix, preds);
  ctx.snapshot(a.out_prefix);
  ctx.print({{"sentences", std::to_string(preds.size())}, {"stream", std::string(stream_name(model.stream))}});
}

inline void cmd_linear_jackknife(Context& ctx, const LinearArgs& a) {
  const Stream stream = require_stream(a.stream);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto examples = training_examples(a, corpus, stream);
  const auto k = static_cast<std::size_t>(ctx.config.get_int("k"));
  const auto preds = linear::jackknife_linear(examples, k, stream, ctx.templates(), ctx.mira(),
                                              ctx.config.get_real("gamma"), ctx.jobs());
  write_tagged(a.out_prefix, preds);
  ctx.snapshot(a.out_prefix);
  std::vector<TagSequence> gold;
  for (const auto& ex : examples) gold.push_back(ex.gold);
  ctx.print({{"sentences", std::to_string(preds.size())}, {"k", std::to_string(k)},
             {"heldout_f1_mult", fmt(tagged_f1(preds, gold))}});
}

struct EnsembleArgs {
  CorpusArgs corpus;
  std::string systems;
  std::string stream = "words";
  std::string weights;
  std::string model;
  std::string out;
};

inline void cmd_word_fit(Context& ctx, const EnsembleArgs& a) {
  const Stream stream = require_stream(a.stream);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto systems = ensemble::load_systems(a.systems, corpus);
  const auto gold = gold_tags(corpus, stream);
  const auto data = ensemble::make_stream_data(systems, gold, stream);
  const auto w = ensemble::fit_word_ensemble(data, stream, ctx.word_ensemble());
  ensemble::save_weights(a.weights, w);
  ctx.snapshot(a.weights);

  Report report;
  for (std::size_t s = 0; s < data.systems(); ++s) {
    std::vector<double> one(data.systems(), 0.0);
    one[s] = 1.0;
    report.emplace_back("single_f1_mult." + data.system_ids[s], fmt(ensemble::ensemble_f1(data, one, ctx.config.get_real("threshold"))));
  }
  for (std::size_t s = 0; s < w.system_ids.size(); ++s) report.emplace_back("weight." + w.system_ids[s], fmt(w.weights[s]));
  report.emplace_back("threshold", fmt(w.threshold));
  report.emplace_back("dev_f1_mult", fmt(ensemble::ensemble_f1(data, w.weights, w.threshold)));
  ctx.print(report);
}

inline void cmd_word_apply(Context& ctx, const EnsembleArgs& a) {
  const ensemble::WeightVector w = ensemble::load_weights(a.weights);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto systems = ensemble::participating(ensemble::load_systems(a.systems, corpus), w);
  const ProbMatrix probs = ensemble::combine_word(systems, w);
  std::vector<TagSequence> tags;
  for (const auto& row : probs) tags.push_back(metrics::threshold(row, w.threshold));
  write_probs(a.out + ".probs", probs);
  write_tags(a.out + ".tags", tags);
  ctx.snapshot(a.out);
  ctx.print({{"sentences", std::to_string(probs.size())}, {"stream", std::string(stream_name(w.stream))}});
}

inline void cmd_word_kfold(Context& ctx, const EnsembleArgs& a) {
  const Stream stream = require_stream(a.stream);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto systems = ensemble::load_systems(a.systems, corpus);
  const auto gold = gold_tags(corpus, stream);
  const FoldPlan plan(corpus.size(), static_cast<std::size_t>(ctx.config.get_int("k")));
  const auto config = ctx.word_ensemble();
  const auto est = ensemble::kfold_estimate(systems, gold, plan, stream, config, ctx.jobs());
  const auto data = ensemble::make_stream_data(systems, gold, stream);
  const auto full = ensemble::fit_word_ensemble(data, stream, config);
  const double full_f1 = ensemble::ensemble_f1(data, full.weights, full.threshold);
  write_tags(a.out + ".tags", split_flat(est.predictions, stream_lengths(corpus, stream)));
  ctx.snapshot(a.out);
  ctx.print({{"k", std::to_string(plan.k())},
             {"kfold_f1_mult", fmt(est.f1_mult)},
             {"full_dev_f1_mult", fmt(full_f1)},
             {"overfitting_gap", fmt(full_f1 - est.f1_mult)}});
}

inline void cmd_sent_fit(Context& ctx, const EnsembleArgs& a) {
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto systems = ensemble::load_systems(a.systems, corpus);
  std::vector<double> y;
  for (const auto& e : corpus.entries) {
    if (!e.hter) throw MissingStream("sentence ensemble needs gold HTER (--hter)");
    y.push_back(*e.hter);
  }
  const auto features = ensemble::sentence_features(systems);
  const auto grid = ctx.config.get_reals("lambda_grid");
  const auto cv = ensemble::ridge_cv(features.rows, y, grid, static_cast<std::size_t>(ctx.config.get_int("k")), ctx.seed(),
                                     true, features.names);
  ensemble::save_ridge(a.model, cv.model);
  ctx.snapshot(a.model);
  const auto pred = ensemble::predict_sentence_scores(cv.model, features);
  Report report{{"lambda", text::format_double(cv.lambda)}, {"features", std::to_string(features.names.size())}};
  for (std::size_t i = 0; i < grid.size(); ++i) report.emplace_back("cv_mse." + text::format_double(grid[i]), fmt(cv.cv_errors[i]));
  try {
    report.emplace_back("train_pearson", fmt(metrics::pearson(y, pred)));
  } catch (const DegenerateInput&) {
    report.emplace_back("train_pearson", "undefined");
  }
  ctx.print(report);
}

inline void cmd_sent_apply(Context& ctx, const EnsembleArgs& a) {
  const ensemble::RidgeModel model = ensemble::load_ridge(a.model);
  const TaggedCorpus corpus = a.corpus.load(ctx.layout());
  const auto systems = ensemble::load_systems(a.systems, corpus);
  const auto pred = ensemble::predict_sentence_scores(model, ensemble::sentence_features(systems));
  write_scores(a.out, pred);
  ctx.snapshot(a.out);
  ctx.print({{"sentences", std::to_string(pred.size())}});
}

struct DocArgs {
  std::string docs;
  std::string annotations;
  std::string tags;
  std::string sentence_mqm;
  std::string features;
  std::string gold;
  std::string pred;
  std::string gold_mqm;
  std::string pred_mqm;
  std::string model;
  std::string out;
  std::string level = "doc";
  bool cv = false;
};

inline void cmd_doc_tags(Context& ctx, const DocArgs& a) {
  const auto docs = doc::load_documents(a.docs);
  const auto set = annotations_for(doc::read_annotations(a.annotations), docs, a.annotations);
  std::vector<TargetTags> tags;
  std::vector<Sentence> tokens;
  for (const auto& d : docs) {
    const auto it = set.find(d.id);
    const std::vector<doc::Annotation> none;
    const auto t = doc::annotations_to_tags(d, it == set.end() ? none : it->second);
    tags.insert(tags.end(), t.begin(), t.end());
    for (std::size_t s = 0; s < d.sentences.size(); ++s) tokens.push_back(d.tokens(s));
  }
  write_tags(a.out + ".tags", tags, ctx.layout());
  write_sentences(a.out + ".mt", tokens);
  ctx.snapshot(a.out);
  ctx.print({{"documents", std::to_string(docs.size())}, {"sentences", std::to_string(tags.size())}});
}

inline void cmd_doc_spans(Context& ctx, const DocArgs& a) {
  const auto docs = doc::load_documents(a.docs);
  const auto tags = load_doc_tags(a.tags, docs, ctx.layout(), ctx.config.get_real("threshold"));
  const doc::Severity severity = *doc::parse_severity(ctx.config.get("severity"));
  doc::AnnotationSet set;
  std::size_t total = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto anns = doc::tags_to_annotations(docs[i], tags[i], severity);
    total += anns.size();
    if (!anns.empty()) set[docs[i].id] = std::move(anns);
  }
  doc::write_annotations(a.out, set);
  ctx.snapshot(a.out);
  ctx.print({{"documents", std::to_string(docs.size())}, {"annotations", std::to_string(total)}});
}

inline void cmd_doc_mqm(Context& ctx, const DocArgs& a) {
  const auto docs = doc::load_documents(a.docs);
  const auto set = annotations_for(doc::read_annotations(a.annotations), docs, a.annotations);
  const auto weights = ctx.mqm_weights();
  const auto floor = ctx.mqm_floor();
  if (a.level == "doc") {
    doc::DocValues values;
    for (const auto& d : docs) {
      const auto it = set.find(d.id);
      doc::SeverityCounts counts;
      if (it != set.end()) counts = doc::count_severities(it->second);
      values.emplace_back(d.id, std::vector<double>{doc::mqm_closed_form(counts, d.word_count(), weights, floor)});
    }
    doc::write_doc_values(a.out, values);
  } else if (a.level == "sentence") {
    // An annotation counts once in every sentence it has a span in.
    std::vector<double> scores;
    for (const auto& d : docs) {
      std::vector<doc::SeverityCounts> counts(d.sentences.size());
      if (const auto it = set.find(d.id); it != set.end()) {
        for (const auto& ann : it->second) {
          std::vector<std::size_t> sents;
          for (const auto& sp : ann.spans) {
            doc::check_span(d, sp);
            if (std::find(sents.begin(), sents.end(), sp.sent_idx) == sents.end()) sents.push_back(sp.sent_idx);
          }
          for (std::size_t s : sents) {
            auto& c = counts[s];
            (ann.severity == doc::Severity::minor ? c.minor : ann.severity == doc::Severity::major ? c.major : c.critical)++;
          }
        }
      }
      for (std::size_t s = 0; s < d.sentences.size(); ++s) {
        scores.push_back(doc::mqm_closed_form(counts[s], d.token_offsets[s].size(), weights, floor));
      }
    }
    write_scores(a.out, scores);
  } else {
    throw ConfigError("--level must be doc or sentence");
  }
  ctx.snapshot(a.out);
  ctx.print({{"documents", std::to_string(docs.size())}, {"level", a.level}});
}

inline void cmd_doc_features(Context& ctx, const DocArgs& a) {
  const auto docs = doc::load_documents(a.docs);
  const auto tags = load_doc_tags(a.tags, docs, ctx.layout(), ctx.config.get_real("threshold"));
  std::size_t total = 0;
  for (const auto& d : docs) total += d.sentences.size();
  const auto mqm = load_scores(a.sentence_mqm, total);
  doc::DocValues values;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::size_t n = docs[i].sentences.size();
    const auto f = doc::doc_mqm_features(tags[i], std::span<const double>(mqm).subspan(offset, n));
    offset += n;
    values.emplace_back(docs[i].id, std::vector<double>(f.begin(), f.end()));
  }
  doc::write_doc_values(a.out, values);
  ctx.snapshot(a.out);
  ctx.print({{"documents", std::to_string(docs.size())}});
}

// Gold values aligned to feature rows by document id.
inline std::vector<double> align_gold(const doc::DocValues& features, const doc::DocValues& gold, const std::string& file) {
  std::map<std::string, double> by_id;
  for (const auto& [id, v] : gold) by_id[id] = v.front();
  std::vector<double> y;
  for (const auto& [id, v] : features) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw LengthMismatch(file + ": no gold score for document " + id);
    y.push_back(it->second);
  }
  return y;
}

inline std::vector<std::array<double, 4>> feature_rows(const doc::DocValues& values) {
  std::vector<std::array<double, 4>> rows;
  for (const auto& [id, v] : values) rows.push_back({v[0], v[1], v[2], v[3]});
  return rows;
}

inline void cmd_doc_fit(Context& ctx, const DocArgs& a) {
  const auto features = doc::read_doc_values(a.features, 4);
  const auto y = align_gold(features, doc::read_doc_values(a.gold, 1), a.gold);
  const auto rows = feature_rows(features);
  ensemble::RidgeModel model;
  if (a.cv) {
    const auto grid = ctx.config.get_reals("lambda_grid");
    model = doc::fit_doc_mqm_cv(rows, y, grid, static_cast<std::size_t>(ctx.config.get_int("k")), ctx.seed()).model;
  } else {
    model = doc::fit_doc_mqm(rows, y, ctx.config.get_real("doc.lambda"));
  }
  ensemble::save_ridge(a.model, model);
  ctx.snapshot(a.model);
  double sse = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double r = doc::predict_doc_mqm(model, rows[i]) - y[i];
    sse += r * r;
  }
  ctx.print({{"documents", std::to_string(rows.size())},
             {"lambda", text::format_double(model.lambda)},
             {"train_rmse", fmt(std::sqrt(sse / static_cast<double>(rows.size())))}});
}

inline void cmd_doc_predict(Context& ctx, const DocArgs& a) {
  const auto model = ensemble::load_ridge(a.model);
  const auto features = doc::read_doc_values(a.features, 4);
  doc::DocValues out;
  for (const auto& [id, v] : features) {
    out.emplace_back(id, std::vector<double>{doc::predict_doc_mqm(model, {v[0], v[1], v[2], v[3]})});
  }
  doc::write_doc_values(a.out, out);
  ctx.snapshot(a.out);
  ctx.print({{"documents", std::to_string(out.size())}});
}

inline void cmd_doc_eval(Context& ctx, const DocArgs& a) {
  Report report;
  if (!a.gold.empty()) {
    const auto gold = doc::read_annotations(a.gold);
    const auto st = doc::annotation_stats(gold);
    report.emplace_back("annotations", std::to_string(st.total));
    report.emplace_back("multi_span", std::to_string(st.multi_span));
    report.emplace_back("cross_sentence", std::to_string(st.cross_sentence));
    report.emplace_back("major_pct", text::format_fixed(st.percent(st.severities.major), 2));
    report.emplace_back("minor_pct", text::format_fixed(st.percent(st.severities.minor), 2));
    report.emplace_back("critical_pct", text::format_fixed(st.percent(st.severities.critical), 2));
    if (!a.pred.empty()) {
      if (a.docs.empty()) throw ConfigError("annotation F1 needs --docs");
      const auto docs = doc::load_documents(a.docs);
      const auto c = doc::annotation_counts(docs, gold, doc::read_annotations(a.pred));
      report.emplace_back("f1_ann", fmt(c.f1()));
      report.emplace_back("precision", fmt(c.precision()));
      report.emplace_back("recall", fmt(c.recall()));
    }
  }
  if (!a.gold_mqm.empty() || !a.pred_mqm.empty()) {
    if (a.gold_mqm.empty() || a.pred_mqm.empty()) throw ConfigError("MQM correlation needs --gold-mqm and --pred-mqm");
    const auto pred = doc::read_doc_values(a.pred_mqm, 1);
    const auto gold = align_gold(pred, doc::read_doc_values(a.gold_mqm, 1), a.gold_mqm);
    std::vector<double> p;
    for (const auto& [id, v] : pred) p.push_back(v.front());
    report.emplace_back("mqm_pearson", fmt(metrics::pearson(gold, p)));
  }
  if (report.empty()) throw ConfigError("doc eval needs --gold annotations and/or --gold-mqm/--pred-mqm");
  ctx.print(report);
  if (!a.out.empty()) {
    std::string body;
    for (const auto& [k, v] : report) body += k + "=" + v + "\n";
    text::write_file(a.out, body);
    ctx.snapshot(a.out);
  }
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Context ctx{out, err, RunConfig{}, {}, {}, {}, "table", {}};
  CLI::App app{"Quality estimation toolkit: labels, linear tagger, ensembles, document MQM", "qe-stack"};
  app.set_version_flag("--version", std::string("qe-stack ") + QESTACK_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", ctx.config_path, "key=value configuration file");
  app.add_option("--format", ctx.format, "output format: table or kv")->check(CLI::IsMember({"table", "kv"}));
  app.add_option("--set", ctx.sets, "override any configuration key (key=value)");
  key_flag(&app, ctx, "seed");
  key_flag(&app, ctx, "jobs");

  std::vector<std::pair<CLI::App*, std::function<void()>>> actions;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, const std::string& command,
                  std::function<void()> action) {
    CLI::App* sub = parent->add_subcommand(name, help);
    sub->fallthrough();
    actions.emplace_back(sub, [&ctx, command, action] {
      ctx.command = command;
      action();
    });
    return sub;
  };
  auto corpus_flags = [](CLI::App* sub, CorpusArgs& c, bool need_mt) {
    auto* mt = sub->add_option("--mt", c.mt, "tokenized MT sentences");
    if (need_mt) mt->required();
    sub->add_option("--src", c.src, "tokenized source sentences");
    sub->add_option("--align", c.align, "source-MT alignments (i-j pairs)");
  };

  // evaluate
  std::string eval_gold, eval_pred, eval_stream = "target", eval_out;
  {
    auto* sub = leaf(&app, "evaluate", "score predicted tags or sentence scores against gold", "evaluate",
                     [&] { cmd_evaluate(ctx, eval_gold, eval_pred, eval_stream, eval_out); });
    sub->add_option("--gold", eval_gold, "gold tags (or scores for --stream sentence)")->required();
    sub->add_option("--pred", eval_pred, "predicted tags or probabilities")->required();
    sub->add_option("--stream", eval_stream, "target, words, gaps, source or sentence");
    sub->add_option("--out", eval_out, "also write the report to this file");
    key_flag(sub, ctx, "threshold");
    key_flag(sub, ctx, "layout");
  }

  // make-labels
  CorpusArgs label_args;
  std::string label_prefix;
  {
    auto* sub = leaf(&app, "make-labels", "derive word, gap and source tags and HTER from post-edits", "make-labels",
                     [&] { cmd_make_labels(ctx, label_args, label_prefix); });
    corpus_flags(sub, label_args, true);
    sub->add_option("--pe", label_args.pe, "post-edited sentences")->required();
    sub->add_option("--out-prefix", label_prefix, "writes <prefix>.tags, .hter and .source_tags")->required();
    key_flag(sub, ctx, "hter_cap");
    key_flag(sub, ctx, "layout");
  }

  // linear
  LinearArgs lin;
  {
    CLI::App* linear = app.add_subcommand("linear", "linear sequential tagger");
    linear->require_subcommand(1);
    linear->fallthrough();
    auto common = [&](CLI::App* sub) {
      corpus_flags(sub, lin.corpus, true);
      sub->add_option("--extra", lin.extra, "extra per-token annotation column (repeatable)");
      sub->add_option("--stack", lin.stack, "system manifest whose predictions become stacked features");
      key_flag(sub, ctx, "layout");
    };
    auto training = [&](CLI::App* sub) {
      sub->add_option("--tags", lin.corpus.tags, "gold target tags");
      sub->add_option("--source-tags", lin.corpus.source_tags, "gold source tags");
      sub->add_option("--stream", lin.stream, "words, gaps or source");
      for (const char* k : {"epochs", "C", "average", "gamma", "bins", "templates"}) key_flag(sub, ctx, k);
    };
    auto* train = leaf(linear, "train", "train a model with averaged max-loss MIRA", "linear train",
                       [&] { cmd_linear_train(ctx, lin); });
    common(train);
    training(train);
    train->add_option("--model", lin.model, "output model file")->required();

    auto* predict = leaf(linear, "predict", "tag sentences with a trained model", "linear predict",
                         [&] { cmd_linear_predict(ctx, lin); });
    common(predict);
    predict->add_option("--model", lin.model, "model file")->required();
    predict->add_option("--out-prefix", lin.out_prefix, "writes <prefix>.tags and <prefix>.probs")->required();

    auto* jack = leaf(linear, "jackknife", "out-of-fold predictions over contiguous folds", "linear jackknife",
                      [&] { cmd_linear_jackknife(ctx, lin); });
    common(jack);
    training(jack);
    key_flag(jack, ctx, "k");
    jack->add_option("--out-prefix", lin.out_prefix, "writes <prefix>.tags and <prefix>.probs")->required();
  }

  // ensemble-word / ensemble-sent
  EnsembleArgs ens;
  {
    CLI::App* word = app.add_subcommand("ensemble-word", "word-level convex-combination ensemble");
    word->require_subcommand(1);
    word->fallthrough();
    auto common = [&](CLI::App* sub) {
      corpus_flags(sub, ens.corpus, true);
      sub->add_option("--systems", ens.systems, "system manifest: system_id stream path")->required();
      sub->add_option("--stream", ens.stream, "words, gaps or source");
      key_flag(sub, ctx, "layout");
    };
    auto search = [&](CLI::App* sub) {
      sub->add_option("--tags", ens.corpus.tags, "gold target tags");
      sub->add_option("--source-tags", ens.corpus.source_tags, "gold source tags");
      for (const char* k : {"threshold", "optimize_threshold", "powell.tol", "powell.max_cycles", "powell.line_samples"}) {
        key_flag(sub, ctx, k);
      }
    };
    auto* fit = leaf(word, "fit", "fit weights by Powell search on F1-MULT", "ensemble-word fit",
                     [&] { cmd_word_fit(ctx, ens); });
    common(fit);
    search(fit);
    fit->add_option("--weights", ens.weights, "output weights file")->required();

    auto* apply = leaf(word, "apply", "combine system probabilities with fitted weights", "ensemble-word apply",
                       [&] { cmd_word_apply(ctx, ens); });
    common(apply);
    apply->add_option("--weights", ens.weights, "weights file")->required();
    apply->add_option("--out-prefix", ens.out, "writes <prefix>.probs and <prefix>.tags")->required();

    auto* kfold = leaf(word, "kfold", "k-fold estimate of ensemble F1-MULT", "ensemble-word kfold",
                       [&] { cmd_word_kfold(ctx, ens); });
    common(kfold);
    search(kfold);
    key_flag(kfold, ctx, "k");
    kfold->add_option("--out-prefix", ens.out, "writes held-out <prefix>.tags")->required();

    CLI::App* sent = app.add_subcommand("ensemble-sent", "sentence-level ridge stacking");
    sent->require_subcommand(1);
    sent->fallthrough();
    auto* sfit = leaf(sent, "fit", "fit ridge regression with cross-validated lambda", "ensemble-sent fit",
                      [&] { cmd_sent_fit(ctx, ens); });
    corpus_flags(sfit, ens.corpus, true);
    sfit->add_option("--systems", ens.systems, "system manifest")->required();
    sfit->add_option("--hter", ens.corpus.hter, "gold sentence HTER")->required();
    sfit->add_option("--model", ens.model, "output model file")->required();
    for (const char* k : {"lambda_grid", "k"}) key_flag(sfit, ctx, k);

    auto* sapply = leaf(sent, "apply", "predict sentence scores", "ensemble-sent apply", [&] { cmd_sent_apply(ctx, ens); });
    corpus_flags(sapply, ens.corpus, true);
    sapply->add_option("--systems", ens.systems, "system manifest")->required();
    sapply->add_option("--model", ens.model, "model file")->required();
    sapply->add_option("--out", ens.out, "output scores file")->required();
  }

  // doc
  DocArgs da;
  {
    CLI::App* d = app.add_subcommand("doc", "document-level annotations and MQM");
    d->require_subcommand(1);
    d->fallthrough();
    auto* tags = leaf(d, "tags", "convert annotations to token and gap tags", "doc tags", [&] { cmd_doc_tags(ctx, da); });
    tags->add_option("--docs", da.docs, "document manifest: doc_id path")->required();
    tags->add_option("--annotations", da.annotations, "annotation file")->required();
    tags->add_option("--out-prefix", da.out, "writes <prefix>.tags and <prefix>.mt")->required();
    key_flag(tags, ctx, "layout");

    auto* spans = leaf(d, "spans", "convert predicted tags to annotations", "doc spans", [&] { cmd_doc_spans(ctx, da); });
    spans->add_option("--docs", da.docs, "document manifest")->required();
    spans->add_option("--tags", da.tags, "predicted tags or probabilities, all documents concatenated")->required();
    spans->add_option("--out", da.out, "output annotation file")->required();
    for (const char* k : {"severity", "threshold", "layout"}) key_flag(spans, ctx, k);

    auto* mqm = leaf(d, "mqm", "closed-form MQM from annotations", "doc mqm", [&] { cmd_doc_mqm(ctx, da); });
    mqm->add_option("--docs", da.docs, "document manifest")->required();
    mqm->add_option("--annotations", da.annotations, "annotation file")->required();
    mqm->add_option("--level", da.level, "doc or sentence");
    mqm->add_option("--out", da.out, "output scores")->required();
    for (const char* k : {"mqm.minor", "mqm.major", "mqm.critical", "mqm.floor"}) key_flag(mqm, ctx, k);

    auto* feats = leaf(d, "features", "document regression features", "doc features", [&] { cmd_doc_features(ctx, da); });
    feats->add_option("--docs", da.docs, "document manifest")->required();
    feats->add_option("--tags", da.tags, "predicted tags or probabilities, all documents concatenated")->required();
    feats->add_option("--sentence-mqm", da.sentence_mqm, "predicted sentence MQM, one per line")->required();
    feats->add_option("--out", da.out, "output feature file")->required();
    for (const char* k : {"threshold", "layout"}) key_flag(feats, ctx, k);

    auto* fit = leaf(d, "fit", "fit the document MQM regression", "doc fit", [&] { cmd_doc_fit(ctx, da); });
    fit->add_option("--features", da.features, "feature file")->required();
    fit->add_option("--gold", da.gold, "gold document MQM: doc_id score")->required();
    fit->add_option("--model", da.model, "output model file")->required();
    fit->add_flag("--cv", da.cv, "choose lambda from lambda_grid by cross-validation");
    for (const char* k : {"doc.lambda", "lambda_grid", "k"}) key_flag(fit, ctx, k);

    auto* pred = leaf(d, "predict", "predict document MQM", "doc predict", [&] { cmd_doc_predict(ctx, da); });
    pred->add_option("--model", da.model, "model file")->required();
    pred->add_option("--features", da.features, "feature file")->required();
    pred->add_option("--out", da.out, "output scores")->required();

    auto* ev = leaf(d, "eval", "annotation F1, annotation statistics and MQM correlation", "doc eval",
                    [&] { cmd_doc_eval(ctx, da); });
    ev->add_option("--docs", da.docs, "document manifest");
    ev->add_option("--gold", da.gold, "gold annotations");
    ev->add_option("--pred", da.pred, "predicted annotations");
    ev->add_option("--gold-mqm", da.gold_mqm, "gold document MQM");
    ev->add_option("--pred-mqm", da.pred_mqm, "predicted document MQM");
    ev->add_option("--out", da.out, "also write the report to this file");
  }

  // Help for the most specific subcommand named on the command line.
  auto deepest_help = [&app] {
    const CLI::App* deepest = &app;
    while (!deepest->get_subcommands().empty()) deepest = deepest->get_subcommands().front();
    return deepest->help();
  };
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << deepest_help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << deepest_help();
    return 1;
  }

  try {
    if (!ctx.config_path.empty()) ctx.config.merge_file(ctx.config_path);
    for (const auto& s : ctx.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      ctx.config.set(s.substr(0, eq), s.substr(eq + 1), "--set");
    }
    for (const auto& [k, v] : ctx.overrides) ctx.config.set(k, v, key_flag_name(k));
    for (auto& [sub, action] : actions) {
      if (sub->parsed()) {
        action();
        return 0;
      }
    }
    err << app.help();
    return 1;
  } catch (const IoError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "IoError: " << e.what() << "\n";
    return 2;
  } catch (const QeError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qestack::cli
