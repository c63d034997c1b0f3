#pragma once

// Word- and sentence-level evaluation metrics. BAD is the positive class.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qestack/corpus.hpp"
#include "qestack/errors.hpp"

namespace qestack::metrics {

struct ContingencyTable {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }

  ContingencyTable& operator+=(const ContingencyTable& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ContingencyTable&) const = default;
};

// BAD iff prob >= t, so ties go to BAD.
inline TagSequence threshold(std::span<const double> probs, double t) {
  TagSequence out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(p >= t ? Tag::bad : Tag::ok);
  return out;
}

inline std::vector<double> flatten(const ProbMatrix& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline TagSequence flatten(std::span<const TagSequence> rows) {
  TagSequence out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline ContingencyTable contingency(std::span<const Tag> gold, std::span<const Tag> pred) {
  if (gold.size() != pred.size()) {
    throw LengthMismatch("gold has " + std::to_string(gold.size()) + " tags, prediction has " +
                         std::to_string(pred.size()));
  }
  ContingencyTable t;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool g = gold[i] == Tag::bad;
    const bool p = pred[i] == Tag::bad;
    if (g && p) ++t.tp;
    else if (!g && p) ++t.fp;
    else if (g && !p) ++t.fn;
    else ++t.tn;
  }
  return t;
}

// F1 of one class from its own true-positive / false-positive / false-negative
// counts. An absent class that is also never predicted scores 1; any zero
// denominator in precision or recall makes that quantity 0.
inline double class_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fn == 0 && tp + fp == 0) return 1.0;
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

struct F1Scores {
  double f1_ok = 0.0;
  double f1_bad = 0.0;
  double f1_mult = 0.0;
};

inline F1Scores f1_mult(const ContingencyTable& t) {
  if (t.total() == 0) throw EmptyInput("F1-MULT of zero tags");
  F1Scores s;
  s.f1_bad = class_f1(t.tp, t.fp, t.fn);
  s.f1_ok = class_f1(t.tn, t.fn, t.fp);
  s.f1_mult = s.f1_ok * s.f1_bad;
  return s;
}

inline F1Scores f1_mult(std::span<const Tag> gold, std::span<const Tag> pred) {
  return f1_mult(contingency(gold, pred));
}

// Matthews correlation; 0 whenever a marginal is empty.
inline double mcc(const ContingencyTable& t) {
  if (t.total() == 0) throw EmptyInput("MCC of zero tags");
  const double tp = static_cast<double>(t.tp);
  const double fp = static_cast<double>(t.fp);
  const double tn = static_cast<double>(t.tn);
  const double fn = static_cast<double>(t.fn);
  const double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
  if (a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(a * b * c * d);
}

inline double mcc(std::span<const Tag> gold, std::span<const Tag> pred) { return mcc(contingency(gold, pred)); }

// Sample Pearson correlation, two-pass.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw LengthMismatch("pearson: vectors differ in length");
  if (x.size() < 2) throw DegenerateInput("pearson needs at least two points");
  auto constant = [](std::span<const double> v) {
    for (double e : v) {
      if (e != v.front()) return false;
    }
    return true;
  };
  if (constant(x) || constant(y)) throw DegenerateInput("pearson of a constant vector");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson of a constant vector");
  double r = sxy / std::sqrt(sxx * syy);
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

// The "Target" evaluation: gaps and words interleaved per sentence, then
// concatenated over the corpus.
inline TagSequence target_stream(std::span<const TargetTags> tags) {
  TagSequence out;
  for (const auto& t : tags) {
    const TagSequence seq = interleave(t);
    out.insert(out.end(), seq.begin(), seq.end());
  }
  return out;
}

struct WordReport {
  ContingencyTable table;
  F1Scores f1;
  double mcc = 0.0;
};

inline WordReport evaluate_tags(std::span<const Tag> gold, std::span<const Tag> pred) {
  WordReport r;
  r.table = contingency(gold, pred);
  r.f1 = f1_mult(r.table);
  r.mcc = mcc(r.table);
  return r;
}

}  // namespace qestack::metrics
