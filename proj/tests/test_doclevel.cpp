#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qestack/doclevel.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace qestack;
using namespace qestack::doc;

namespace {

constexpr Tag O = Tag::ok;
constexpr Tag B = Tag::bad;

Annotation major(std::size_t s, std::size_t a, std::size_t b) { return {Severity::major, {Span{s, a, b}}}; }

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize_with_offsets("ab cd"), (std::vector<TokenOffset>{{0, 2}, {3, 5}}));
  EXPECT_EQ(tokenize_with_offsets("  a  "), (std::vector<TokenOffset>{{2, 3}}));
  EXPECT_TRUE(tokenize_with_offsets("").empty());
  // Offsets count code points, and a no-break space separates tokens.
  EXPECT_EQ(tokenize_with_offsets("é ü"), (std::vector<TokenOffset>{{0, 1}, {2, 3}}));
  EXPECT_THROW(tokenize_with_offsets("\xff"), ParseError);
}

TEST(Tokenize, OffsetsRecoverTokens) {
  Rng rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = synth::document(rng, "d", 1);
    const auto cps = decode_utf8(d.sentences[0]);
    std::vector<bool> covered(cps.size(), false);
    std::size_t prev_end = 0;
    for (const auto& t : d.token_offsets[0]) {
      ASSERT_LT(t.start, t.end);
      ASSERT_GE(t.start, prev_end);
      for (std::size_t i = t.start; i < t.end; ++i) {
        ASSERT_FALSE(is_unicode_space(cps[i]));
        covered[i] = true;
      }
      prev_end = t.end;
    }
    for (std::size_t i = 0; i < cps.size(); ++i) ASSERT_EQ(covered[i], !is_unicode_space(cps[i]));
  }
}

TEST(AnnotationsToTags, Examples) {
  const auto d = Document::from_sentences("d", {"aa bb cc"});
  const std::vector<Annotation> tok2{major(0, 3, 5)};
  auto t = annotations_to_tags(d, tok2);
  EXPECT_EQ(t[0].words, (TagSequence{O, B, O}));
  EXPECT_EQ(t[0].gaps, (TagSequence{O, O, O, O}));

  const std::vector<Annotation> partial{major(0, 4, 5)};
  EXPECT_EQ(annotations_to_tags(d, partial)[0].words, (TagSequence{O, B, O}));

  const auto ab = Document::from_sentences("d", {"ab cd"});
  const std::vector<Annotation> gap{major(0, 2, 3)};
  t = annotations_to_tags(ab, gap);
  EXPECT_EQ(t[0].words, (TagSequence{O, O}));
  EXPECT_EQ(t[0].gaps, (TagSequence{O, B, O}));

  const std::vector<Annotation> ends{major(0, 0, 0), major(0, 5, 5)};
  EXPECT_EQ(annotations_to_tags(ab, ends)[0].gaps, (TagSequence{B, O, B}));

  const std::vector<Annotation> outside{major(0, 3, 9)};
  EXPECT_THROW(annotations_to_tags(ab, outside), SpanOutOfBounds);
  const std::vector<Annotation> no_sentence{major(2, 0, 1)};
  EXPECT_THROW(annotations_to_tags(ab, no_sentence), SpanOutOfBounds);
  const std::vector<Annotation> inside_token{major(0, 1, 1)};
  EXPECT_THROW(annotations_to_tags(ab, inside_token), SpanOutOfBounds);
}

TEST(AnnotationsToTags, CoveredCharactersNeverLeaveTokenOk) {
  Rng rng(52);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = synth::document(rng, "d", 1 + rng.below(3));
    std::vector<Annotation> anns;
    for (std::size_t s = 0; s < d.sentences.size(); ++s) {
      if (d.lengths[s] == 0) continue;
      const std::size_t a = rng.below(d.lengths[s]);
      const std::size_t b = a + 1 + rng.below(d.lengths[s] - a);
      anns.push_back(major(s, a, b));
    }
    const auto tags = annotations_to_tags(d, anns);
    for (const auto& an : anns) {
      for (const auto& sp : an.spans) {
        const auto& toks = d.token_offsets[sp.sent_idx];
        for (std::size_t i = 0; i < toks.size(); ++i) {
          if (sp.char_start < toks[i].end && toks[i].start < sp.char_end) {
            ASSERT_EQ(tags[sp.sent_idx].words[i], B);
          }
        }
      }
    }
  }
}

TEST(TagsToAnnotations, Examples) {
  const auto d = Document::from_sentences("d", {"w x y z"});
  const std::vector<TargetTags> run{{{O, B, B, O}, {}}};
  EXPECT_EQ(tags_to_annotations(d, run), (std::vector<Annotation>{major(0, 2, 5)}));

  const std::vector<TargetTags> split{{{B, O, B, O}, {}}};
  EXPECT_EQ(tags_to_annotations(d, split), (std::vector<Annotation>{major(0, 0, 1), major(0, 4, 5)}));

  const std::vector<TargetTags> gaps{{{O, O, O, O}, {B, O, B, O, O}}};
  EXPECT_EQ(tags_to_annotations(d, gaps), (std::vector<Annotation>{major(0, 0, 0), major(0, 3, 4)}));

  const std::vector<TargetTags> minor{{{B, O, O, O}, {}}};
  EXPECT_EQ(tags_to_annotations(d, minor, Severity::minor)[0].severity, Severity::minor);

  const std::vector<TargetTags> wrong{{{B, O}, {}}};
  EXPECT_THROW(tags_to_annotations(d, wrong), LengthMismatch);
}

TEST(TagsToAnnotations, MultiSpanSplitsIntoSeparateAnnotations) {
  // One minor annotation with two spans on non-adjacent words.
  const auto d = Document::from_sentences("d", {"les bandes sont parfaits"});
  const std::vector<Annotation> gold{{Severity::minor, {Span{0, 4, 10}, Span{0, 16, 24}}}};
  const auto back = tags_to_annotations(d, annotations_to_tags(d, gold));
  EXPECT_EQ(back, (std::vector<Annotation>{major(0, 4, 10), major(0, 16, 24)}));
}

TEST(TagsToAnnotations, RoundTripOnAlignedAnnotations) {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = synth::document(rng, "d", 1 + rng.below(4));
    const auto gold = synth::aligned_annotations(rng, d);
    ASSERT_EQ(tags_to_annotations(d, annotations_to_tags(d, gold)), gold);
  }
}

TEST(Mqm, WorkedExamples) {
  EXPECT_EQ(mqm_closed_form({}, 7), 100.0);
  EXPECT_EQ(mqm_closed_form({1, 2, 0}, 100), 89.0);
  EXPECT_EQ(mqm_closed_form({0, 0, 2}, 10), -100.0);
  EXPECT_EQ(mqm_closed_form({0, 0, 2}, 10, {}, 0.0), 0.0);
  EXPECT_THROW(mqm_closed_form({}, 0), DegenerateInput);
}

TEST(Mqm, AffineAndMonotone) {
  Rng rng(54);
  for (int trial = 0; trial < 1000; ++trial) {
    SeverityCounts c{rng.below(20), rng.below(20), rng.below(20)};
    const std::size_t n = 1 + rng.below(200);
    const double base = mqm_closed_form(c, n);
    SeverityCounts plus1 = c, plus2 = c;
    std::size_t* field1 = nullptr;
    std::size_t* field2 = nullptr;
    switch (rng.below(3)) {
      case 0: field1 = &plus1.minor; field2 = &plus2.minor; break;
      case 1: field1 = &plus1.major; field2 = &plus2.major; break;
      default: field1 = &plus1.critical; field2 = &plus2.critical; break;
    }
    *field1 += 1;
    *field2 += 2;
    const double s1 = mqm_closed_form(plus1, n), s2 = mqm_closed_form(plus2, n);
    ASSERT_NEAR(s2 - s1, s1 - base, 1e-9);
    ASSERT_LE(s1, base);
  }
}

TEST(DocFeatures, Examples) {
  const std::vector<TargetTags> ok{{{O, O}, {O, O, O}}, {{O}, {O, O}}};
  const std::vector<double> hundred{100.0, 100.0};
  EXPECT_EQ(doc_mqm_features(ok, hundred), (std::array<double, 4>{100.0, 0.0, 0.0, 0.0}));

  const std::vector<TargetTags> uneven{{{O}, {O, O}}, {{O, O, O, O, O}, {O, O, O, O, O, O}}};
  const std::vector<double> mixed{80.0, 100.0};
  EXPECT_EQ(doc_mqm_features(uneven, mixed)[0], 90.0);

  TagSequence words(10, O);
  words[3] = words[7] = B;
  const std::vector<TargetTags> counted{{words, TagSequence(11, O)}};
  const std::vector<double> one{50.0};
  const auto f = doc_mqm_features(counted, one);
  EXPECT_DOUBLE_EQ(f[1], 0.2);
  EXPECT_EQ(f[2], 0.0);
  EXPECT_DOUBLE_EQ(f[3], 2.0 / 21.0);

  EXPECT_THROW(doc_mqm_features(std::vector<TargetTags>{}, std::vector<double>{}), EmptyInput);
}

TEST(DocFit, ExactLinearAndConstant) {
  Rng rng(55);
  std::vector<std::array<double, 4>> feats;
  std::vector<double> linear, constant;
  for (int i = 0; i < 12; ++i) {
    feats.push_back({rng.uniform(40, 100), rng.uniform(), rng.uniform(), rng.uniform()});
    const auto& f = feats.back();
    linear.push_back(3.0 + 0.5 * f[0] - 20.0 * f[1] + 7.0 * f[2] - 4.0 * f[3]);
    constant.push_back(71.5);
  }
  const auto m = fit_doc_mqm(feats, linear);
  for (std::size_t i = 0; i < feats.size(); ++i) EXPECT_NEAR(predict_doc_mqm(m, feats[i]), linear[i], 1e-8);

  const auto c = fit_doc_mqm(feats, constant);
  for (double b : c.coefficients) EXPECT_NEAR(b, 0.0, 1e-9);
  EXPECT_NEAR(c.intercept, 71.5, 1e-9);

  const std::vector<std::array<double, 4>> few(4);
  EXPECT_THROW(fit_doc_mqm(few, std::vector<double>(4, 1.0)), DegenerateInput);
}

TEST(DocFit, MatchesNormalEquationOracle) {
  Rng rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::array<double, 4>> feats;
    std::vector<std::vector<double>> rows;
    std::vector<double> gold;
    for (int i = 0; i < 15; ++i) {
      feats.push_back({rng.uniform(40, 100), rng.uniform(), rng.uniform(), rng.uniform()});
      rows.emplace_back(feats.back().begin(), feats.back().end());
      gold.push_back(rng.uniform(0, 100));
    }
    const auto m = fit_doc_mqm(feats, gold);
    const auto ref = oracle::ridge_normal_equations(rows, gold, 0.0);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      double y = ref[0];
      for (std::size_t j = 0; j < 4; ++j) y += ref[j + 1] * rows[i][j];
      ASSERT_NEAR(predict_doc_mqm(m, feats[i]), y, 1e-8);
    }
  }
}

TEST(AnnotationF1, Examples) {
  const auto d = Document::from_sentences("d", {"abc defghi"});
  const std::vector<Annotation> gold{major(0, 0, 4)};
  const std::vector<Annotation> pred{major(0, 2, 6)};
  const auto c = annotation_counts(d, gold, pred);
  EXPECT_DOUBLE_EQ(c.precision(), 0.5);
  EXPECT_DOUBLE_EQ(c.recall(), 0.5);
  EXPECT_DOUBLE_EQ(c.f1(), 0.5);
  EXPECT_EQ(annotation_f1(d, gold, gold), 1.0);
  EXPECT_EQ(annotation_f1(d, gold, std::vector<Annotation>{}), 0.0);
  EXPECT_EQ(annotation_f1(d, std::vector<Annotation>{}, std::vector<Annotation>{}), 1.0);

  // A zero-width span counts as its border position.
  const std::vector<Annotation> border{major(0, 3, 3)};
  EXPECT_EQ(annotation_counts(d, border, border).tp, 1u);
  EXPECT_EQ(annotation_counts(d, gold, border).fp, 1u);
}

TEST(AnnotationF1, SelfIsOneAndSwapExchangesPrecisionRecall) {
  Rng rng(57);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = synth::document(rng, "d", 1 + rng.below(3));
    const auto g = synth::aligned_annotations(rng, d);
    const auto p = synth::aligned_annotations(rng, d);
    ASSERT_EQ(annotation_f1(d, g, g), 1.0);
    const auto a = annotation_counts(d, g, p), b = annotation_counts(d, p, g);
    ASSERT_EQ(a.precision(), b.recall());
    ASSERT_EQ(a.recall(), b.precision());
  }
}

TEST(AnnotationF1, CorpusLevelMicroAverage) {
  const std::vector<Document> docs{Document::from_sentences("a", {"abcd"}), Document::from_sentences("b", {"efgh"})};
  AnnotationSet gold{{"a", {major(0, 0, 4)}}, {"b", {major(0, 0, 2)}}};
  AnnotationSet pred{{"a", {major(0, 0, 2)}}};
  const auto c = annotation_counts(docs, gold, pred);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 0u);
  EXPECT_EQ(c.fn, 4u);
  pred["zzz"] = {major(0, 0, 1)};
  EXPECT_THROW(annotation_counts(docs, gold, pred), SpanOutOfBounds);
}

TEST(AnnotationStats, CountsAndEmpty) {
  EXPECT_EQ(annotation_stats(std::vector<Annotation>{}).total, 0u);
  EXPECT_EQ(annotation_stats(std::vector<Annotation>{}).percent(0), 0.0);
  const std::vector<Annotation> anns{
      {Severity::minor, {Span{0, 0, 1}, Span{0, 2, 3}}},
      {Severity::major, {Span{0, 0, 1}, Span{1, 2, 3}}},
      {Severity::major, {Span{0, 0, 1}}},
      {Severity::critical, {Span{2, 0, 1}}},
  };
  const auto st = annotation_stats(anns);
  EXPECT_EQ(st.total, 4u);
  EXPECT_EQ(st.multi_span, 2u);
  EXPECT_EQ(st.cross_sentence, 1u);
  EXPECT_EQ(st.severities.major, 2u);
  EXPECT_EQ(st.percent(st.severities.major), 50.0);
}

TEST(Files, AnnotationRoundTrip) {
  TempDir dir;
  AnnotationSet set{{"doc1", {{Severity::minor, {Span{0, 4, 10}, Span{1, 0, 3}}}, major(2, 5, 5)}},
                    {"doc2", {{Severity::critical, {Span{0, 0, 1}}}}}};
  write_annotations(dir / "a.tsv", set);
  EXPECT_EQ(read_annotations(dir / "a.tsv"), set);

  text::write_file(dir / "bad.tsv", "doc1\tsevere\t0:1-2\n");
  EXPECT_THROW(read_annotations(dir / "bad.tsv"), ParseError);
  text::write_file(dir / "bad.tsv", "doc1\tmajor\t0:3-2\n");
  EXPECT_THROW(read_annotations(dir / "bad.tsv"), ParseError);
}

TEST(Files, DocumentManifest) {
  TempDir dir;
  text::write_file(dir / "d1.txt", "ab cd\nef\n");
  text::write_file(dir / "manifest", "d1 d1.txt\n");
  const auto docs = load_documents(dir / "manifest");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].id, "d1");
  EXPECT_EQ(docs[0].word_count(), 3u);
  EXPECT_EQ(docs[0].tokens(0), (std::vector<std::string>{"ab", "cd"}));
  text::write_file(dir / "dup", "d1 d1.txt\nd1 d1.txt\n");
  EXPECT_THROW(load_documents(dir / "dup"), ParseError);
}
