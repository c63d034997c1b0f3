#include <gtest/gtest.h>

#include "qestack/corpus.hpp"
#include "qestack/text_io.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace qestack;

namespace {

constexpr Tag O = Tag::ok;
constexpr Tag B = Tag::bad;

void put(const std::filesystem::path& p, const std::string& content) { text::write_file(p, content); }

}  // namespace

TEST(Interleave, SplitsWordsAndGaps) {
  const TagSequence seq{O, O, O, B, O};
  const TargetTags t = deinterleave(seq);
  EXPECT_EQ(t.words, (TagSequence{O, B}));
  EXPECT_EQ(t.gaps, (TagSequence{O, O, O}));
  EXPECT_EQ(interleave(t), seq);
}

TEST(LoadCorpus, InterleavedTags) {
  TempDir dir;
  put(dir / "x.mt", "ein Haus\n");
  put(dir / "x.tags", "OK OK OK BAD OK\n");
  const auto c = load_corpus({.mt = dir / "x.mt", .tags = dir / "x.tags"});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].target_tags->words, (TagSequence{O, B}));
  EXPECT_EQ(c[0].target_tags->gaps, (TagSequence{O, O, O}));
}

TEST(LoadCorpus, WrongTagCountNamesFileAndLine) {
  TempDir dir;
  put(dir / "x.mt", "a b\nein Haus\n");
  put(dir / "x.tags", "OK OK OK OK OK\nOK OK OK BAD\n");
  try {
    load_corpus({.mt = dir / "x.mt", .tags = dir / "x.tags"});
    FAIL() << "expected LengthMismatch";
  } catch (const LengthMismatch& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("x.tags"), std::string::npos);
  }
}

TEST(LoadCorpus, WordsOnlyLayout) {
  TempDir dir;
  put(dir / "x.mt", "a b\n");
  put(dir / "x.tags", "OK BAD\n");
  const auto c = load_corpus({.mt = dir / "x.mt", .tags = dir / "x.tags"}, TagLayout::words_only);
  EXPECT_EQ(c[0].target_tags->words, (TagSequence{O, B}));
  EXPECT_TRUE(c[0].target_tags->gaps.empty());
}

TEST(LoadCorpus, LineCountMismatch) {
  TempDir dir;
  put(dir / "x.src", "a\nb\n");
  put(dir / "x.mt", "a\n");
  EXPECT_THROW(load_corpus({.src = dir / "x.src", .mt = dir / "x.mt"}), LengthMismatch);
}

TEST(LoadCorpus, MalformedInputs) {
  TempDir dir;
  put(dir / "x.mt", "a\n");
  put(dir / "bad.tags", "OK MAYBE OK\n");
  EXPECT_THROW(load_corpus({.mt = dir / "x.mt", .tags = dir / "bad.tags"}), ParseError);
  put(dir / "x.hter", "1.5\n");
  EXPECT_THROW(load_corpus({.mt = dir / "x.mt", .hter = dir / "x.hter"}), RangeError);
  put(dir / "x.hter", "abc\n");
  EXPECT_THROW(load_corpus({.mt = dir / "x.mt", .hter = dir / "x.hter"}), ParseError);
  put(dir / "x.src", "s\n");
  put(dir / "x.align", "0-3\n");
  EXPECT_THROW(load_corpus({.src = dir / "x.src", .mt = dir / "x.mt", .align = dir / "x.align"}), IndexError);
  put(dir / "empty.mt", "a\n\nb\n");
  EXPECT_THROW(load_corpus({.mt = dir / "empty.mt"}), ParseError);
  EXPECT_THROW(load_corpus({.mt = dir / "missing.mt"}), IoError);
}

TEST(LoadPredictions, Streams) {
  TempDir dir;
  put(dir / "x.mt", "a b\n");
  const auto c = load_corpus({.mt = dir / "x.mt"});
  put(dir / "p.words", "0.1 0.9\n");
  PredictionPaths p{.system_id = "s", .words = dir / "p.words"};
  EXPECT_EQ(*load_predictions(p, c).words, (ProbMatrix{{0.1, 0.9}}));

  put(dir / "p.words", "0.1 0.9 0.2\n");
  EXPECT_THROW(load_predictions(p, c), LengthMismatch);
  put(dir / "p.words", "0.1 1.3\n");
  EXPECT_THROW(load_predictions(p, c), RangeError);
  put(dir / "p.words", "OK BAD\n");
  EXPECT_EQ(*load_predictions(p, c).words, (ProbMatrix{{0.0, 1.0}}));

  put(dir / "p.target", "0.1 0.2 0.3 0.4 0.5\n");
  PredictionPaths t{.system_id = "t", .target = dir / "p.target"};
  const auto set = load_predictions(t, c);
  EXPECT_EQ(*set.words, (ProbMatrix{{0.2, 0.4}}));
  EXPECT_EQ(*set.gaps, (ProbMatrix{{0.1, 0.3, 0.5}}));
}

TEST(WriteTags, Formats) {
  TempDir dir;
  const std::vector<TargetTags> t = {{{O, B}, {O, O, O}}};
  write_tags(dir / "t.tags", t);
  EXPECT_EQ(text::read_file(dir / "t.tags"), "OK OK OK BAD OK\n");
  const std::vector<TagSequence> s = {{B, O}};
  write_tags(dir / "s.tags", s);
  EXPECT_EQ(text::read_file(dir / "s.tags"), "BAD OK\n");
}

TEST(RoundTrip, RandomCorpora) {
  Rng rng(1234);
  TempDir dir;
  for (int trial = 0; trial < 1000; ++trial) {
    const TaggedCorpus c = synth::corpus(rng, 1 + rng.below(6));
    std::vector<Sentence> src, mt, pe;
    std::vector<TargetTags> tags;
    std::vector<TagSequence> stags;
    std::vector<double> hter;
    std::vector<Alignment> align;
    ProbMatrix probs;
    for (const auto& e : c.entries) {
      src.push_back(e.src);
      mt.push_back(e.mt);
      pe.push_back(*e.pe);
      tags.push_back(*e.target_tags);
      stags.push_back(*e.source_tags);
      hter.push_back(*e.hter);
      align.push_back(*e.alignment);
      std::vector<double> row;
      for (std::size_t j = 0; j < e.mt.size(); ++j) row.push_back(rng.uniform());
      probs.push_back(std::move(row));
    }
    write_sentences(dir / "c.src", src);
    write_sentences(dir / "c.mt", mt);
    write_sentences(dir / "c.pe", pe);
    write_tags(dir / "c.tags", tags);
    write_tags(dir / "c.source_tags", stags);
    write_scores(dir / "c.hter", hter);
    write_alignments(dir / "c.align", align);
    write_probs(dir / "c.probs", probs);

    const auto back = load_corpus({dir / "c.src", dir / "c.mt", dir / "c.pe", dir / "c.tags", dir / "c.source_tags",
                                   dir / "c.hter", dir / "c.align"});
    ASSERT_EQ(back.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& a = c.entries[i];
      const auto& b = back.entries[i];
      ASSERT_EQ(a.src, b.src);
      ASSERT_EQ(a.mt, b.mt);
      ASSERT_EQ(a.pe, b.pe);
      ASSERT_EQ(a.target_tags, b.target_tags);
      ASSERT_EQ(a.source_tags, b.source_tags);
      ASSERT_EQ(a.hter, b.hter);
      ASSERT_EQ(a.alignment, b.alignment);
      ASSERT_EQ(2 * b.mt.size() + 1, interleave(*b.target_tags).size());
    }
    const auto p = load_prob_stream(dir / "c.probs", stream_lengths(back, Stream::words));
    ASSERT_EQ(p, probs);
  }
}

TEST(GoldTags, MissingStream) {
  TaggedCorpus c;
  c.entries.push_back(CorpusEntry{});
  EXPECT_THROW(gold_tags(c, Stream::source), MissingStream);
  EXPECT_THROW(gold_tags(c, Stream::words), MissingStream);
}
