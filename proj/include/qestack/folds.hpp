#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "qestack/errors.hpp"

namespace qestack {

// Contiguous k-fold split of `n` items. Fold sizes differ by at most one;
// the first n % k folds hold the extra item.
class FoldPlan {
 public:
  FoldPlan(std::size_t n, std::size_t k) : n_(n), k_(k) {
    if (k < 2) throw DegenerateInput("k-fold split needs k >= 2");
    if (n < k) throw DegenerateInput("k-fold split of " + std::to_string(n) + " items into " + std::to_string(k) + " folds");
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = n / k + (f < n % k ? 1 : 0);
      bounds_.emplace_back(start, start + size);
      start += size;
    }
  }

  std::size_t k() const { return k_; }
  std::size_t size() const { return n_; }

  // Half-open [begin, end) range of fold f.
  std::pair<std::size_t, std::size_t> fold(std::size_t f) const { return bounds_[f]; }

  std::size_t fold_of(std::size_t item) const {
    for (std::size_t f = 0; f < k_; ++f) {
      if (item < bounds_[f].second) return f;
    }
    return k_ - 1;
  }

  std::vector<std::size_t> held_out(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = bounds_[f].first; i < bounds_[f].second; ++i) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> training(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bounds_[f].first || i >= bounds_[f].second) out.push_back(i);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t k_;
  std::vector<std::pair<std::size_t, std::size_t>> bounds_;
};

// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index writes
// to its own slot, so results do not depend on scheduling. The first
// exception (by index) is rethrown.
template <typename Body>
void parallel_for(std::size_t n, std::size_t jobs, Body&& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::mutex mutex;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mutex);
        if (next >= n) return;
        i = next++;
      }
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t count = std::min(jobs, n);
  for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace qestack
