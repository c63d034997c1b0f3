#pragma once

// Data model and WMT-style text I/O for word-level quality estimation.
//
// File formats (one segment per line, tokens separated by whitespace):
//   *.src / *.mt / *.pe   tokenized sentences
//   *.tags                target tags, interleaved g0 w1 g1 ... wN gN (2N+1)
//   *.source_tags         one tag per source token
//   *.hter / scores       one decimal per line
//   *.probs               one P(BAD) per token
//   *.align               "i-j" pairs, 0-based, i = source, j = MT
// Empty lines are rejected everywhere.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qestack/errors.hpp"
#include "qestack/text_io.hpp"

namespace qestack {

enum class Tag : std::uint8_t { ok = 0, bad = 1 };

inline std::string_view tag_name(Tag tag) { return tag == Tag::bad ? "BAD" : "OK"; }

inline std::optional<Tag> parse_tag(std::string_view s) {
  if (s == "OK") return Tag::ok;
  if (s == "BAD") return Tag::bad;
  return std::nullopt;
}

inline Tag flip(Tag tag) { return tag == Tag::bad ? Tag::ok : Tag::bad; }

enum class Stream : std::uint8_t { words, gaps, source };

inline std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::words: return "words";
    case Stream::gaps: return "gaps";
    case Stream::source: return "source";
  }
  return "words";
}

inline std::optional<Stream> parse_stream(std::string_view s) {
  if (s == "words") return Stream::words;
  if (s == "gaps") return Stream::gaps;
  if (s == "source") return Stream::source;
  return std::nullopt;
}

using Sentence = std::vector<std::string>;
using TagSequence = std::vector<Tag>;
using SourceTags = TagSequence;
using ProbMatrix = std::vector<std::vector<double>>;

// Word tags and gap tags kept apart; the 2N+1 interleaving only exists in
// files. `gaps` is empty when the corpus was loaded in words-only layout.
struct TargetTags {
  TagSequence words;
  TagSequence gaps;

  bool operator==(const TargetTags&) const = default;
};

enum class TagLayout : std::uint8_t { interleaved, words_only };

inline TagSequence interleave(const TargetTags& tags) {
  TagSequence out;
  out.reserve(tags.words.size() + tags.gaps.size());
  if (tags.gaps.empty()) return tags.words;
  for (std::size_t i = 0; i < tags.words.size(); ++i) {
    out.push_back(tags.gaps[i]);
    out.push_back(tags.words[i]);
  }
  out.push_back(tags.gaps.back());
  return out;
}

// Inverse of interleave; `seq` must have odd length.
inline TargetTags deinterleave(std::span<const Tag> seq) {
  TargetTags out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    (i % 2 == 0 ? out.gaps : out.words).push_back(seq[i]);
  }
  return out;
}

struct AlignmentPoint {
  std::size_t src = 0;
  std::size_t mt = 0;

  auto operator<=>(const AlignmentPoint&) const = default;
};

// Sorted, duplicate-free set of alignment points.
using Alignment = std::vector<AlignmentPoint>;

inline void normalize(Alignment& alignment) {
  std::sort(alignment.begin(), alignment.end());
  alignment.erase(std::unique(alignment.begin(), alignment.end()), alignment.end());
}

// For every MT token, the sorted source indices aligned to it.
inline std::vector<std::vector<std::size_t>> aligned_sources(const Alignment& alignment, std::size_t mt_len) {
  std::vector<std::vector<std::size_t>> out(mt_len);
  for (const auto& p : alignment) {
    if (p.mt < mt_len) out[p.mt].push_back(p.src);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

inline std::vector<std::vector<std::size_t>> aligned_targets(const Alignment& alignment, std::size_t src_len) {
  std::vector<std::vector<std::size_t>> out(src_len);
  for (const auto& p : alignment) {
    if (p.src < src_len) out[p.src].push_back(p.mt);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

struct CorpusEntry {
  Sentence src;
  Sentence mt;
  std::optional<Sentence> pe;
  std::optional<TargetTags> target_tags;
  std::optional<SourceTags> source_tags;
  std::optional<double> hter;
  std::optional<Alignment> alignment;
};

struct TaggedCorpus {
  std::vector<CorpusEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const CorpusEntry& operator[](std::size_t i) const { return entries[i]; }
};

// Number of labelled positions of `stream` in one entry.
inline std::size_t stream_length(const CorpusEntry& entry, Stream stream) {
  switch (stream) {
    case Stream::words: return entry.mt.size();
    case Stream::gaps: return entry.mt.size() + 1;
    case Stream::source: return entry.src.size();
  }
  return 0;
}

inline std::vector<std::size_t> stream_lengths(const TaggedCorpus& corpus, Stream stream) {
  std::vector<std::size_t> out;
  out.reserve(corpus.size());
  for (const auto& e : corpus.entries) out.push_back(stream_length(e, stream));
  return out;
}

// Gold tags of one stream for every sentence.
inline std::vector<TagSequence> gold_tags(const TaggedCorpus& corpus, Stream stream) {
  std::vector<TagSequence> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& e = corpus.entries[i];
    if (stream == Stream::source) {
      if (!e.source_tags) throw MissingStream("corpus has no source tags");
      out.push_back(*e.source_tags);
    } else {
      if (!e.target_tags) throw MissingStream("corpus has no target tags");
      if (stream == Stream::gaps && e.target_tags->gaps.empty()) {
        throw MissingStream("corpus was loaded without gap tags");
      }
      out.push_back(stream == Stream::words ? e.target_tags->words : e.target_tags->gaps);
    }
  }
  return out;
}

struct CorpusPaths {
  std::optional<std::filesystem::path> src{};
  std::optional<std::filesystem::path> mt{};
  std::optional<std::filesystem::path> pe{};
  std::optional<std::filesystem::path> tags{};
  std::optional<std::filesystem::path> source_tags{};
  std::optional<std::filesystem::path> hter{};
  std::optional<std::filesystem::path> align{};
};

namespace detail {

inline Sentence parse_sentence(std::string_view line) {
  Sentence out;
  for (auto tok : text::split_ws(line)) out.emplace_back(tok);
  return out;
}

inline TagSequence parse_tag_line(std::string_view line, const std::string& file, std::size_t lineno) {
  TagSequence out;
  for (auto field : text::split_ws(line)) {
    auto tag = parse_tag(field);
    if (!tag) throw ParseError(file, lineno, "invalid tag '" + std::string(field) + "'");
    out.push_back(*tag);
  }
  return out;
}

inline double parse_score(std::string_view field, const std::string& file, std::size_t lineno) {
  double value = 0.0;
  if (!text::parse_double(field, value) || !std::isfinite(value)) {
    throw ParseError(file, lineno, "invalid number '" + std::string(field) + "'");
  }
  return value;
}

inline Alignment parse_alignment_line(std::string_view line, const std::string& file, std::size_t lineno) {
  Alignment out;
  for (auto field : text::split_ws(line)) {
    const auto dash = field.find('-');
    std::size_t i = 0;
    std::size_t j = 0;
    if (dash == std::string_view::npos || !text::parse_size(field.substr(0, dash), i) ||
        !text::parse_size(field.substr(dash + 1), j)) {
      throw ParseError(file, lineno, "invalid alignment point '" + std::string(field) + "'");
    }
    out.push_back({i, j});
  }
  normalize(out);
  return out;
}

class LineTable {
 public:
  explicit LineTable(const std::filesystem::path& path) : name_(path.string()), lines_(text::read_lines(path)) {}

  const std::string& name() const { return name_; }
  std::size_t size() const { return lines_.size(); }
  const std::string& operator[](std::size_t i) const { return lines_[i]; }

  void expect_count(std::size_t count) const {
    if (lines_.size() != count) {
      throw LengthMismatch(name_, std::min(lines_.size(), count) + 1,
                           "file has " + std::to_string(lines_.size()) + " lines, expected " +
                               std::to_string(count));
    }
  }

 private:
  std::string name_;
  std::vector<std::string> lines_;
};

}  // namespace detail

// Loads whichever columns are present and validates every cross-file
// length invariant. Sentences are never reordered.
inline TaggedCorpus load_corpus(const CorpusPaths& paths, TagLayout layout = TagLayout::interleaved) {
  using detail::LineTable;
  std::optional<LineTable> src, mt, pe, tags, stags, hter, align;
  std::optional<std::size_t> count;
  auto open = [&](const std::optional<std::filesystem::path>& p, std::optional<LineTable>& table) {
    if (!p) return;
    table.emplace(*p);
    if (count) {
      table->expect_count(*count);
    } else {
      count = table->size();
    }
  };
  open(paths.src, src);
  open(paths.mt, mt);
  open(paths.pe, pe);
  open(paths.tags, tags);
  open(paths.source_tags, stags);
  open(paths.hter, hter);
  open(paths.align, align);
  if (!count) throw ParseError("no corpus files given");
  if (tags && !mt) throw ParseError("target tags require the MT file");
  if (stags && !src) throw ParseError("source tags require the source file");
  if (align && !(src && mt)) throw ParseError("alignments require both source and MT files");

  TaggedCorpus corpus;
  corpus.entries.resize(*count);
  for (std::size_t i = 0; i < *count; ++i) {
    const std::size_t lineno = i + 1;
    auto& e = corpus.entries[i];
    if (src) e.src = detail::parse_sentence((*src)[i]);
    if (mt) e.mt = detail::parse_sentence((*mt)[i]);
    if (pe) e.pe = detail::parse_sentence((*pe)[i]);
    if (tags) {
      TagSequence seq = detail::parse_tag_line((*tags)[i], tags->name(), lineno);
      const std::size_t n = e.mt.size();
      if (layout == TagLayout::interleaved) {
        if (seq.size() != 2 * n + 1) {
          throw LengthMismatch(tags->name(), lineno,
                               std::to_string(seq.size()) + " tags for " + std::to_string(n) +
                                   " MT tokens, expected " + std::to_string(2 * n + 1));
        }
        e.target_tags = deinterleave(seq);
      } else {
        if (seq.size() != n) {
          throw LengthMismatch(tags->name(), lineno,
                               std::to_string(seq.size()) + " tags for " + std::to_string(n) + " MT tokens");
        }
        e.target_tags = TargetTags{std::move(seq), {}};
      }
    }
    if (stags) {
      TagSequence seq = detail::parse_tag_line((*stags)[i], stags->name(), lineno);
      if (seq.size() != e.src.size()) {
        throw LengthMismatch(stags->name(), lineno,
                             std::to_string(seq.size()) + " tags for " + std::to_string(e.src.size()) +
                                 " source tokens");
      }
      e.source_tags = std::move(seq);
    }
    if (hter) {
      const auto fields = text::split_ws((*hter)[i]);
      if (fields.size() != 1) throw ParseError(hter->name(), lineno, "expected one score");
      const double v = detail::parse_score(fields[0], hter->name(), lineno);
      if (v < 0.0 || v > 1.0) throw RangeError(hter->name(), lineno, "HTER outside [0,1]");
      e.hter = v;
    }
    if (align) {
      Alignment a = detail::parse_alignment_line((*align)[i], align->name(), lineno);
      for (const auto& p : a) {
        if (p.src >= e.src.size() || p.mt >= e.mt.size()) {
          throw IndexError(LengthMismatch::locate(align->name(), lineno) + "alignment point " +
                           std::to_string(p.src) + "-" + std::to_string(p.mt) + " out of range");
        }
      }
      e.alignment = std::move(a);
    }
  }
  return corpus;
}

// Per-system predictions. Each stream is optional; a present stream covers
// every sentence.
struct PredictionSet {
  std::string system_id;
  std::optional<ProbMatrix> words;
  std::optional<ProbMatrix> gaps;
  std::optional<ProbMatrix> source;
  std::optional<std::vector<double>> sentence_scores;

  const std::optional<ProbMatrix>& stream(Stream s) const {
    switch (s) {
      case Stream::words: return words;
      case Stream::gaps: return gaps;
      case Stream::source: return source;
    }
    return words;
  }
  std::optional<ProbMatrix>& stream(Stream s) {
    return const_cast<std::optional<ProbMatrix>&>(std::as_const(*this).stream(s));
  }
  bool has(Stream s) const { return stream(s).has_value(); }
};

// `target` is an interleaved 2N+1 file that fills both words and gaps.
struct PredictionPaths {
  std::string system_id{};
  std::optional<std::filesystem::path> words{};
  std::optional<std::filesystem::path> gaps{};
  std::optional<std::filesystem::path> source{};
  std::optional<std::filesystem::path> target{};
  std::optional<std::filesystem::path> sentence{};
};

// Reads one probability stream. Fields are decimals in [0,1]; "OK"/"BAD"
// are accepted for tag-only systems and read as 0/1.
inline ProbMatrix load_prob_stream(const std::filesystem::path& path, std::span<const std::size_t> lengths) {
  detail::LineTable table(path);
  table.expect_count(lengths.size());
  ProbMatrix out(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto fields = text::split_ws(table[i]);
    if (fields.size() != lengths[i]) {
      throw LengthMismatch(table.name(), lineno,
                           std::to_string(fields.size()) + " values, expected " + std::to_string(lengths[i]));
    }
    out[i].reserve(fields.size());
    for (auto f : fields) {
      if (auto tag = parse_tag(f)) {
        out[i].push_back(*tag == Tag::bad ? 1.0 : 0.0);
        continue;
      }
      const double v = detail::parse_score(f, table.name(), lineno);
      if (v < 0.0 || v > 1.0) throw RangeError(table.name(), lineno, "probability " + std::string(f) + " outside [0,1]");
      out[i].push_back(v);
    }
  }
  return out;
}

inline std::vector<double> load_scores(const std::filesystem::path& path, std::optional<std::size_t> expected = std::nullopt) {
  detail::LineTable table(path);
  if (expected) table.expect_count(*expected);
  std::vector<double> out;
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto fields = text::split_ws(table[i]);
    if (fields.size() != 1) throw ParseError(table.name(), i + 1, "expected one score per line");
    out.push_back(detail::parse_score(fields[0], table.name(), i + 1));
  }
  return out;
}

inline PredictionSet load_predictions(const PredictionPaths& paths, const TaggedCorpus& corpus) {
  PredictionSet set;
  set.system_id = paths.system_id;
  if (paths.words) set.words = load_prob_stream(*paths.words, stream_lengths(corpus, Stream::words));
  if (paths.gaps) set.gaps = load_prob_stream(*paths.gaps, stream_lengths(corpus, Stream::gaps));
  if (paths.source) set.source = load_prob_stream(*paths.source, stream_lengths(corpus, Stream::source));
  if (paths.target) {
    std::vector<std::size_t> lengths;
    for (const auto& e : corpus.entries) lengths.push_back(2 * e.mt.size() + 1);
    ProbMatrix both = load_prob_stream(*paths.target, lengths);
    ProbMatrix words(both.size()), gaps(both.size());
    for (std::size_t i = 0; i < both.size(); ++i) {
      for (std::size_t j = 0; j < both[i].size(); ++j) (j % 2 == 0 ? gaps[i] : words[i]).push_back(both[i][j]);
    }
    if (!set.words) set.words = std::move(words);
    if (!set.gaps) set.gaps = std::move(gaps);
  }
  if (paths.sentence) set.sentence_scores = load_scores(*paths.sentence, corpus.size());
  return set;
}

// Checks a PredictionSet built in memory against corpus lengths.
inline void validate(const PredictionSet& set, const TaggedCorpus& corpus) {
  for (Stream s : {Stream::words, Stream::gaps, Stream::source}) {
    const auto& m = set.stream(s);
    if (!m) continue;
    if (m->size() != corpus.size()) {
      throw LengthMismatch(set.system_id + " " + std::string(stream_name(s)) + ": " +
                           std::to_string(m->size()) + " sentences, corpus has " + std::to_string(corpus.size()));
    }
    for (std::size_t i = 0; i < m->size(); ++i) {
      if ((*m)[i].size() != stream_length(corpus.entries[i], s)) {
        throw LengthMismatch(set.system_id + " " + std::string(stream_name(s)) + " sentence " +
                             std::to_string(i + 1) + ": length mismatch");
      }
      for (double p : (*m)[i]) {
        if (!(p >= 0.0 && p <= 1.0)) throw RangeError(set.system_id + ": probability outside [0,1]");
      }
    }
  }
  if (set.sentence_scores && set.sentence_scores->size() != corpus.size()) {
    throw LengthMismatch(set.system_id + " sentence scores: count differs from corpus");
  }
}

// ---------------------------------------------------------------------------
// Writers. Every writer is the exact inverse of the matching loader.

inline std::string format_tags(std::span<const Tag> tags) {
  return text::join(tags, " ", [](Tag t) { return std::string(tag_name(t)); });
}

inline void write_tags(const std::filesystem::path& path, std::span<const TargetTags> tags,
                       TagLayout layout = TagLayout::interleaved) {
  std::string out;
  for (const auto& t : tags) {
    out += layout == TagLayout::interleaved ? format_tags(interleave(t)) : format_tags(t.words);
    out += '\n';
  }
  text::write_file(path, out);
}

inline void write_tags(const std::filesystem::path& path, std::span<const TagSequence> tags) {
  std::string out;
  for (const auto& t : tags) {
    out += format_tags(t);
    out += '\n';
  }
  text::write_file(path, out);
}

inline void write_scores(const std::filesystem::path& path, std::span<const double> scores) {
  std::string out;
  for (double v : scores) {
    out += text::format_double(v);
    out += '\n';
  }
  text::write_file(path, out);
}

inline void write_probs(const std::filesystem::path& path, const ProbMatrix& probs) {
  std::string out;
  for (const auto& row : probs) {
    out += text::join(row, " ", [](double v) { return text::format_double(v); });
    out += '\n';
  }
  text::write_file(path, out);
}

inline void write_alignments(const std::filesystem::path& path, std::span<const Alignment> alignments) {
  std::string out;
  for (const auto& a : alignments) {
    out += text::join(a, " ", [](const AlignmentPoint& p) {
      return std::to_string(p.src) + "-" + std::to_string(p.mt);
    });
    out += '\n';
  }
  text::write_file(path, out);
}

inline void write_sentences(const std::filesystem::path& path, std::span<const Sentence> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    out += text::join(s, " ", [](const std::string& t) { return t; });
    out += '\n';
  }
  text::write_file(path, out);
}

}  // namespace qestack
