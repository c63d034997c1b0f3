#pragma once

// Powell's direction-set minimization over the unit box [0,1]^n.
//
// Line searches are grid-then-refine rather than bracketing: objectives such
// as F1-MULT of thresholded predictions are piecewise constant, and smooth
// line searches stall on flat regions. Along each direction the search
// samples `line_samples` points across the box section, then one pass at
// 10x resolution around the best sample. Among tied samples the centre of
// the longest tied run is taken, which keeps the iterate away from plateau
// edges.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <type_traits>
#include <utility>
#include <vector>

#include "qestack/errors.hpp"

namespace qestack {

struct PowellOptions {
  double tol = 1e-6;      // stop when a full cycle improves by less than this
  int max_cycles = 20;
  int line_samples = 101;  // grid points per line search, endpoints included
};

struct PowellResult {
  std::vector<double> point;
  double value = 0.0;
  int cycles = 0;
  std::size_t evaluations = 0;
};

namespace detail {

// Index at the centre of the longest run of minimal values (first run wins
// ties between runs).
inline std::size_t plateau_center(const std::vector<double>& values) {
  const double best = *std::min_element(values.begin(), values.end());
  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = 0; i < values.size();) {
    if (values[i] != best) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < values.size() && values[j] == best) ++j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  return best_start + (best_len - 1) / 2;
}

template <typename Objective>
class BoxSearch {
 public:
  BoxSearch(Objective& f, const PowellOptions& options) : f_(f), options_(options) {}

  double eval(const std::vector<double>& x) {
    const double v = f_(x);
    ++evaluations_;
    if (v < best_value_) {
      best_value_ = v;
      best_point_ = x;
    }
    return v;
  }

  // Moves x along d if that strictly lowers the objective; returns the new
  // value at x.
  double line_search(std::vector<double>& x, double fx, const std::vector<double>& d) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool moving = false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (std::abs(d[k]) < 1e-15) continue;
      moving = true;
      const double a = (0.0 - x[k]) / d[k];
      const double b = (1.0 - x[k]) / d[k];
      lo = std::max(lo, std::min(a, b));
      hi = std::min(hi, std::max(a, b));
    }
    if (!moving || !(hi > lo)) return fx;

    const int samples = std::max(options_.line_samples, 2);
    const double h = (hi - lo) / static_cast<double>(samples - 1);
    std::vector<double> ts, vs;
    for (int j = 0; j < samples; ++j) {
      const double t = j == samples - 1 ? hi : lo + h * static_cast<double>(j);
      ts.push_back(t);
      vs.push_back(eval(point_at(x, d, t)));
    }
    const std::size_t coarse = plateau_center(vs);
    const double centre = ts[coarse];

    std::vector<double> fine_t, fine_v;
    for (int j = -10; j <= 10; ++j) {
      const double t = centre + h * static_cast<double>(j) / 10.0;
      if (t < lo - 1e-12 || t > hi + 1e-12) continue;
      fine_t.push_back(std::clamp(t, lo, hi));
      fine_v.push_back(j == 0 ? vs[coarse] : eval(point_at(x, d, fine_t.back())));
    }
    const std::size_t fine = plateau_center(fine_v);
    if (fine_v[fine] < fx) {
      x = point_at(x, d, fine_t[fine]);
      return fine_v[fine];
    }
    return fx;
  }

  static std::vector<double> point_at(const std::vector<double>& x, const std::vector<double>& d, double t) {
    std::vector<double> p(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) p[k] = std::clamp(x[k] + t * d[k], 0.0, 1.0);
    return p;
  }

  std::size_t evaluations() const { return evaluations_; }
  const std::vector<double>& best_point() const { return best_point_; }
  double best_value() const { return best_value_; }

 private:
  Objective& f_;
  PowellOptions options_;
  std::size_t evaluations_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
  std::vector<double> best_point_;
};

}  // namespace detail

// Minimizes `objective` over [0,1]^n starting from `init` (clamped into the
// box). Directions start as the coordinate basis. After each cycle the
// direction of largest single decrease is replaced by the net displacement
// when Powell's acceptance test passes. Always returns the best point
// visited, so the result never exceeds objective(init).
template <typename Objective>
PowellResult powell_optimize(Objective&& objective, std::vector<double> init, const PowellOptions& options = {}) {
  const std::size_t n = init.size();
  if (n == 0) throw DegenerateInput("Powell search needs at least one coordinate");
  for (double& v : init) v = std::clamp(v, 0.0, 1.0);

  detail::BoxSearch<std::remove_reference_t<Objective>> search(objective, options);
  std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;

  std::vector<double> x = init;
  double fx = search.eval(x);
  int cycles = 0;
  while (cycles < options.max_cycles) {
    ++cycles;
    const std::vector<double> start = x;
    const double f_start = fx;
    std::size_t biggest = 0;
    double biggest_drop = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double before = fx;
      fx = search.line_search(x, fx, dirs[i]);
      if (before - fx > biggest_drop) {
        biggest_drop = before - fx;
        biggest = i;
      }
    }

    std::vector<double> displacement(n), extrapolated(n);
    bool moved = false, inside = true;
    for (std::size_t k = 0; k < n; ++k) {
      displacement[k] = x[k] - start[k];
      extrapolated[k] = 2.0 * x[k] - start[k];
      moved = moved || displacement[k] != 0.0;
      inside = inside && extrapolated[k] >= 0.0 && extrapolated[k] <= 1.0;
    }
    if (moved && inside) {
      const double fe = search.eval(extrapolated);
      if (fe < f_start) {
        const double a = f_start - fx - biggest_drop;
        const double test = 2.0 * (f_start - 2.0 * fx + fe) * a * a - biggest_drop * (f_start - fe) * (f_start - fe);
        if (test < 0.0) {
          fx = search.line_search(x, fx, displacement);
          dirs[biggest] = dirs.back();
          dirs.back() = displacement;
        }
      }
    }
    if (f_start - fx < options.tol) break;
  }

  PowellResult result;
  // Prefer the final iterate over an earlier point of equal value: it sits
  // at a plateau centre rather than on its edge.
  if (fx <= search.best_value()) {
    result.point = x;
    result.value = fx;
  } else {
    result.point = search.best_point();
    result.value = search.best_value();
  }
  result.cycles = cycles;
  result.evaluations = search.evaluations();
  return result;
}

}  // namespace qestack
