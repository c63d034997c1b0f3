#pragma once

// Document-level quality estimation: conversion between character-span
// error annotations and token/gap tags, closed-form MQM, the document MQM
// regression features, and character-level annotation F1.
//
// Character offsets count Unicode code points of the UTF-8 sentence text,
// 0-based, end exclusive.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qestack/corpus.hpp"
#include "qestack/ensemble.hpp"
#include "qestack/errors.hpp"
#include "qestack/text_io.hpp"

namespace qestack::doc {

enum class Severity : std::uint8_t { minor, major, critical };

inline std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::minor: return "minor";
    case Severity::major: return "major";
    case Severity::critical: return "critical";
  }
  return "major";
}

inline std::optional<Severity> parse_severity(std::string_view s) {
  std::string lower(s);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "minor") return Severity::minor;
  if (lower == "major") return Severity::major;
  if (lower == "critical") return Severity::critical;
  return std::nullopt;
}

struct Span {
  std::size_t sent_idx = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool empty() const { return char_start == char_end; }
  auto operator<=>(const Span&) const = default;
};

struct Annotation {
  Severity severity = Severity::major;
  std::vector<Span> spans;  // sorted by (sent_idx, char_start), non-overlapping

  bool operator==(const Annotation&) const = default;
};

struct TokenOffset {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const TokenOffset&) const = default;
};

// ---------------------------------------------------------------------------
// UTF-8.

inline std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw ParseError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size()) throw ParseError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) throw ParseError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

// Unicode White_Space, including the no-break spaces common in French text.
inline bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

// Maximal runs of non-whitespace code points.
inline std::vector<TokenOffset> tokenize_with_offsets(std::string_view sentence) {
  const auto cps = decode_utf8(sentence);
  std::vector<TokenOffset> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_unicode_space(cps[i])) ++i;
    const std::size_t start = i;
    while (i < cps.size() && !is_unicode_space(cps[i])) ++i;
    if (i > start) out.push_back({start, i});
  }
  return out;
}

// Byte offset of every code point boundary (size = code points + 1).
inline std::vector<std::size_t> code_point_bytes(std::string_view s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) out.push_back(i);
  }
  out.push_back(s.size());
  return out;
}

struct Document {
  std::string id;
  std::vector<std::string> sentences;
  std::vector<std::vector<TokenOffset>> token_offsets;
  std::vector<std::size_t> lengths;  // code points per sentence

  static Document from_sentences(std::string id, std::vector<std::string> sentences) {
    Document d;
    d.id = std::move(id);
    d.sentences = std::move(sentences);
    for (const auto& s : d.sentences) {
      d.lengths.push_back(decode_utf8(s).size());
      d.token_offsets.push_back(tokenize_with_offsets(s));
    }
    return d;
  }

  // Token strings of sentence s.
  std::vector<std::string> tokens(std::size_t s) const {
    const auto bytes = code_point_bytes(sentences[s]);
    std::vector<std::string> out;
    for (const auto& t : token_offsets[s]) out.push_back(sentences[s].substr(bytes[t.start], bytes[t.end] - bytes[t.start]));
    return out;
  }

  std::size_t word_count() const {
    std::size_t n = 0;
    for (const auto& t : token_offsets) n += t.size();
    return n;
  }

  // Character borders of gap g in sentence s: from the end of token g-1
  // (or sentence start) to the start of token g (or sentence end).
  TokenOffset gap_border(std::size_t s, std::size_t g) const {
    const auto& toks = token_offsets[s];
    const std::size_t left = g == 0 ? 0 : toks[g - 1].end;
    const std::size_t right = g == toks.size() ? lengths[s] : toks[g].start;
    return {left, right};
  }
};

inline void check_span(const Document& doc, const Span& span) {
  if (span.sent_idx >= doc.sentences.size()) {
    throw SpanOutOfBounds(doc.id + ": span refers to sentence " + std::to_string(span.sent_idx) + " of " +
                          std::to_string(doc.sentences.size()));
  }
  if (span.char_start > span.char_end || span.char_end > doc.lengths[span.sent_idx]) {
    throw SpanOutOfBounds(doc.id + ": span " + std::to_string(span.char_start) + "-" + std::to_string(span.char_end) +
                          " outside sentence " + std::to_string(span.sent_idx) + " of length " +
                          std::to_string(doc.lengths[span.sent_idx]));
  }
  if (span.empty()) {
    for (const auto& t : doc.token_offsets[span.sent_idx]) {
      if (t.start < span.char_start && span.char_start < t.end) {
        throw SpanOutOfBounds(doc.id + ": zero-width span at " + std::to_string(span.char_start) +
                              " falls inside a token of sentence " + std::to_string(span.sent_idx));
      }
    }
  }
}

// Token BAD iff any span character falls inside it. Gap g BAD iff some span
// starts exactly at its left border and ends exactly at its right border.
inline std::vector<TargetTags> annotations_to_tags(const Document& doc, std::span<const Annotation> annotations) {
  std::vector<TargetTags> tags;
  for (const auto& toks : doc.token_offsets) {
    tags.push_back({TagSequence(toks.size(), Tag::ok), TagSequence(toks.size() + 1, Tag::ok)});
  }
  for (const auto& ann : annotations) {
    for (const auto& span : ann.spans) {
      check_span(doc, span);
      const auto& toks = doc.token_offsets[span.sent_idx];
      auto& t = tags[span.sent_idx];
      if (!span.empty()) {
        for (std::size_t i = 0; i < toks.size(); ++i) {
          if (span.char_start < toks[i].end && toks[i].start < span.char_end) t.words[i] = Tag::bad;
        }
      }
      for (std::size_t g = 0; g <= toks.size(); ++g) {
        const TokenOffset border = doc.gap_border(span.sent_idx, g);
        if (span.char_start == border.start && span.char_end == border.end) t.gaps[g] = Tag::bad;
      }
    }
  }
  return tags;
}

// Each maximal run of BAD tokens becomes one single-span annotation from
// the run's first character to its last; each BAD gap becomes its own
// annotation over the gap border (zero-width when no whitespace separates
// the neighbours). No merging across runs.
inline std::vector<Annotation> tags_to_annotations(const Document& doc, std::span<const TargetTags> tags,
                                                   Severity default_severity = Severity::major) {
  if (tags.size() != doc.sentences.size()) {
    throw LengthMismatch(doc.id + ": " + std::to_string(tags.size()) + " tag lines for " +
                         std::to_string(doc.sentences.size()) + " sentences");
  }
  std::vector<Annotation> out;
  for (std::size_t s = 0; s < tags.size(); ++s) {
    const auto& toks = doc.token_offsets[s];
    const auto& t = tags[s];
    if (t.words.size() != toks.size() || (t.gaps.size() != toks.size() + 1 && !t.gaps.empty())) {
      throw LengthMismatch(doc.id + " sentence " + std::to_string(s) + ": tag counts do not match tokens");
    }
    for (std::size_t i = 0; i < toks.size();) {
      if (t.words[i] != Tag::bad) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < toks.size() && t.words[j] == Tag::bad) ++j;
      out.push_back({default_severity, {Span{s, toks[i].start, toks[j - 1].end}}});
      i = j;
    }
    for (std::size_t g = 0; g < t.gaps.size(); ++g) {
      if (t.gaps[g] != Tag::bad) continue;
      const TokenOffset border = doc.gap_border(s, g);
      out.push_back({default_severity, {Span{s, border.start, border.end}}});
    }
  }
  std::sort(out.begin(), out.end(), [](const Annotation& a, const Annotation& b) { return a.spans < b.spans; });
  return out;
}

// ---------------------------------------------------------------------------
// MQM.

struct SeverityCounts {
  std::size_t minor = 0;
  std::size_t major = 0;
  std::size_t critical = 0;
};

struct MqmWeights {
  double minor = 1.0;
  double major = 5.0;
  double critical = 10.0;
};

inline SeverityCounts count_severities(std::span<const Annotation> annotations) {
  SeverityCounts c;
  for (const auto& a : annotations) {
    switch (a.severity) {
      case Severity::minor: ++c.minor; break;
      case Severity::major: ++c.major; break;
      case Severity::critical: ++c.critical; break;
    }
  }
  return c;
}

// 100 * (1 - weighted error count / words), optionally floored.
inline double mqm_closed_form(const SeverityCounts& counts, std::size_t n_words, const MqmWeights& weights = {},
                              std::optional<double> floor = std::nullopt) {
  if (n_words == 0) throw DegenerateInput("MQM needs at least one word");
  const double penalty = weights.minor * static_cast<double>(counts.minor) +
                         weights.major * static_cast<double>(counts.major) +
                         weights.critical * static_cast<double>(counts.critical);
  double score = 100.0 * (1.0 - penalty / static_cast<double>(n_words));
  if (floor) score = std::max(score, *floor);
  return score;
}

// [mean sentence MQM (unweighted), BAD fraction of token tags, of gap tags,
// of all tags].
inline std::array<double, 4> doc_mqm_features(std::span<const TargetTags> tags, std::span<const double> sentence_mqm) {
  if (tags.empty()) throw EmptyInput("document has no sentences");
  if (tags.size() != sentence_mqm.size()) throw LengthMismatch("one sentence MQM per sentence is required");
  double mean = 0.0;
  for (double v : sentence_mqm) mean += v;
  mean /= static_cast<double>(sentence_mqm.size());
  std::size_t words = 0, words_bad = 0, gaps = 0, gaps_bad = 0;
  for (const auto& t : tags) {
    words += t.words.size();
    gaps += t.gaps.size();
    words_bad += static_cast<std::size_t>(std::count(t.words.begin(), t.words.end(), Tag::bad));
    gaps_bad += static_cast<std::size_t>(std::count(t.gaps.begin(), t.gaps.end(), Tag::bad));
  }
  auto frac = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); };
  return {mean, frac(words_bad, words), frac(gaps_bad, gaps), frac(words_bad + gaps_bad, words + gaps)};
}

inline const std::vector<std::string>& doc_feature_names() {
  static const std::vector<std::string> names = {"mean_sentence_mqm", "bad_tokens", "bad_gaps", "bad_all"};
  return names;
}

inline std::vector<std::vector<double>> as_rows(std::span<const std::array<double, 4>> features) {
  std::vector<std::vector<double>> rows;
  for (const auto& f : features) rows.emplace_back(f.begin(), f.end());
  return rows;
}

inline constexpr std::size_t kMinDocumentsToFit = 5;

// Linear regression from the four document features to gold MQM; plain
// least squares unless lambda > 0.
inline ensemble::RidgeModel fit_doc_mqm(std::span<const std::array<double, 4>> features, std::span<const double> gold,
                                        double lambda = 0.0) {
  if (features.size() < kMinDocumentsToFit) {
    throw DegenerateInput("document MQM regression needs at least " + std::to_string(kMinDocumentsToFit) + " documents");
  }
  return ensemble::ridge_fit(as_rows(features), gold, lambda, true, doc_feature_names());
}

inline ensemble::RidgeCvResult fit_doc_mqm_cv(std::span<const std::array<double, 4>> features, std::span<const double> gold,
                                              std::span<const double> lambda_grid, std::size_t k, std::uint64_t seed) {
  if (features.size() < kMinDocumentsToFit) {
    throw DegenerateInput("document MQM regression needs at least " + std::to_string(kMinDocumentsToFit) + " documents");
  }
  return ensemble::ridge_cv(as_rows(features), gold, lambda_grid, k, seed, true, doc_feature_names());
}

inline double predict_doc_mqm(const ensemble::RidgeModel& model, const std::array<double, 4>& features) {
  return model.predict(std::span<const double>(features.data(), features.size()));
}

// ---------------------------------------------------------------------------
// Annotation F1: every character is a unit, positive when covered by a
// non-empty span; a zero-width span adds its border position as one more
// unit. Counts are micro-averaged over documents.

struct CharCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  CharCounts& operator+=(const CharCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  // Nothing annotated on either side counts as perfect agreement.
  double f1() const {
    if (tp + fp + fn == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
};

namespace detail {

// Positive units per sentence: characters [0, len) then borders [len, 2len+1).
inline std::vector<std::vector<bool>> coverage(const Document& doc, std::span<const Annotation> annotations) {
  std::vector<std::vector<bool>> cov;
  for (std::size_t len : doc.lengths) cov.emplace_back(2 * len + 1, false);
  for (const auto& a : annotations) {
    for (const auto& span : a.spans) {
      check_span(doc, span);
      auto& c = cov[span.sent_idx];
      if (span.empty()) {
        c[doc.lengths[span.sent_idx] + span.char_start] = true;
      } else {
        for (std::size_t i = span.char_start; i < span.char_end; ++i) c[i] = true;
      }
    }
  }
  return cov;
}

}  // namespace detail

inline CharCounts annotation_counts(const Document& doc, std::span<const Annotation> gold, std::span<const Annotation> pred) {
  const auto g = detail::coverage(doc, gold);
  const auto p = detail::coverage(doc, pred);
  CharCounts c;
  for (std::size_t s = 0; s < g.size(); ++s) {
    for (std::size_t i = 0; i < g[s].size(); ++i) {
      if (g[s][i] && p[s][i]) ++c.tp;
      else if (p[s][i]) ++c.fp;
      else if (g[s][i]) ++c.fn;
    }
  }
  return c;
}

inline double annotation_f1(const Document& doc, std::span<const Annotation> gold, std::span<const Annotation> pred) {
  return annotation_counts(doc, gold, pred).f1();
}

using AnnotationSet = std::map<std::string, std::vector<Annotation>>;  // by document id

inline CharCounts annotation_counts(std::span<const Document> docs, const AnnotationSet& gold, const AnnotationSet& pred) {
  CharCounts total;
  static const std::vector<Annotation> none;
  auto find = [&](const AnnotationSet& set, const std::string& id) -> const std::vector<Annotation>& {
    const auto it = set.find(id);
    return it == set.end() ? none : it->second;
  };
  for (const auto& d : docs) total += annotation_counts(d, find(gold, d.id), find(pred, d.id));
  for (const auto* set : {&gold, &pred}) {
    for (const auto& [id, anns] : *set) {
      if (!anns.empty() && std::none_of(docs.begin(), docs.end(), [&](const Document& d) { return d.id == id; })) {
        throw SpanOutOfBounds("annotations refer to unknown document " + id);
      }
    }
  }
  return total;
}

inline double annotation_f1(std::span<const Document> docs, const AnnotationSet& gold, const AnnotationSet& pred) {
  return annotation_counts(docs, gold, pred).f1();
}

struct AnnotationStats {
  std::size_t total = 0;
  std::size_t multi_span = 0;
  std::size_t cross_sentence = 0;  // multi-span with spans in different sentences
  SeverityCounts severities;

  double percent(std::size_t count) const {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
  }
};

inline AnnotationStats annotation_stats(std::span<const Annotation> annotations) {
  AnnotationStats st;
  for (const auto& a : annotations) {
    ++st.total;
    if (a.spans.size() >= 2) {
      ++st.multi_span;
      const bool crosses = std::any_of(a.spans.begin(), a.spans.end(),
                                       [&](const Span& s) { return s.sent_idx != a.spans.front().sent_idx; });
      if (crosses) ++st.cross_sentence;
    }
  }
  st.severities = count_severities(annotations);
  return st;
}

inline AnnotationStats annotation_stats(const AnnotationSet& set) {
  std::vector<Annotation> all;
  for (const auto& [id, anns] : set) all.insert(all.end(), anns.begin(), anns.end());
  return annotation_stats(all);
}

// ---------------------------------------------------------------------------
// Files.
//
// Annotations: "doc_id<TAB>severity<TAB>sent:start-end[,sent:start-end...]".
// Documents: a manifest of "doc_id<TAB>path" lines; each path holds one raw
// sentence per line. Relative paths resolve against the manifest directory.

inline void sort_and_check(Annotation& a, const std::string& where) {
  if (a.spans.empty()) throw ParseError(where + ": annotation without spans");
  std::sort(a.spans.begin(), a.spans.end());
  for (std::size_t i = 1; i < a.spans.size(); ++i) {
    const Span& p = a.spans[i - 1];
    const Span& c = a.spans[i];
    if (p == c || (p.sent_idx == c.sent_idx && p.char_end > c.char_start && !p.empty() && !c.empty())) {
      throw ParseError(where + ": overlapping spans within one annotation");
    }
  }
}

inline AnnotationSet read_annotations(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  AnnotationSet set;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto fields = text::split(lines[i], '\t');
    if (fields.size() != 3) throw ParseError(path.string(), i + 1, "expected doc_id<TAB>severity<TAB>spans");
    const auto severity = parse_severity(fields[1]);
    if (!severity) throw ParseError(path.string(), i + 1, "unknown severity '" + std::string(fields[1]) + "'");
    Annotation a{*severity, {}};
    for (auto item : text::split(fields[2], ',')) {
      const auto colon = item.find(':');
      const auto dash = item.find('-', colon == std::string_view::npos ? 0 : colon);
      Span s;
      if (colon == std::string_view::npos || dash == std::string_view::npos ||
          !text::parse_size(item.substr(0, colon), s.sent_idx) ||
          !text::parse_size(item.substr(colon + 1, dash - colon - 1), s.char_start) ||
          !text::parse_size(item.substr(dash + 1), s.char_end) || s.char_start > s.char_end) {
        throw ParseError(path.string(), i + 1, "bad span '" + std::string(item) + "'");
      }
      a.spans.push_back(s);
    }
    sort_and_check(a, where);
    set[std::string(fields[0])].push_back(std::move(a));
  }
  return set;
}

inline std::string format_annotation(const std::string& doc_id, const Annotation& a) {
  return doc_id + "\t" + std::string(severity_name(a.severity)) + "\t" +
         text::join(a.spans, ",", [](const Span& s) {
           return std::to_string(s.sent_idx) + ":" + std::to_string(s.char_start) + "-" + std::to_string(s.char_end);
         });
}

inline void write_annotations(const std::filesystem::path& path, const AnnotationSet& set) {
  std::string out;
  for (const auto& [id, anns] : set) {
    for (const auto& a : anns) out += format_annotation(id, a) + "\n";
  }
  text::write_file(path, out);
}

inline std::vector<Document> load_documents(const std::filesystem::path& manifest) {
  const auto lines = text::read_lines(manifest);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = text::split_ws(lines[i]);
    if (fields.size() != 2) throw ParseError(manifest.string(), i + 1, "expected doc_id<TAB>path");
    std::filesystem::path file{std::string(fields[1])};
    if (file.is_relative()) file = manifest.parent_path() / file;
    std::string id(fields[0]);
    for (const auto& d : docs) {
      if (d.id == id) throw ParseError(manifest.string(), i + 1, "duplicate document id " + id);
    }
    docs.push_back(Document::from_sentences(std::move(id), text::read_lines(file)));
  }
  if (docs.empty()) throw EmptyInput(manifest.string() + ": no documents");
  return docs;
}

// Per-document values: "doc_id<TAB>v1[<TAB>v2...]", `columns` values each.
using DocValues = std::vector<std::pair<std::string, std::vector<double>>>;

inline DocValues read_doc_values(const std::filesystem::path& path, std::size_t columns) {
  const auto lines = text::read_lines(path);
  DocValues out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = text::split_ws(lines[i]);
    if (fields.size() != columns + 1) {
      throw LengthMismatch(path.string(), i + 1,
                           std::to_string(fields.size() - 1) + " values, expected " + std::to_string(columns));
    }
    std::vector<double> values;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      double v = 0.0;
      if (!text::parse_double(fields[c], v)) throw ParseError(path.string(), i + 1, "bad number '" + std::string(fields[c]) + "'");
      values.push_back(v);
    }
    out.emplace_back(std::string(fields[0]), std::move(values));
  }
  return out;
}

inline void write_doc_values(const std::filesystem::path& path, const DocValues& values) {
  std::string out;
  for (const auto& [id, row] : values) {
    out += id;
    for (double v : row) out += "\t" + text::format_double(v);
    out += "\n";
  }
  text::write_file(path, out);
}

}  // namespace qestack::doc
