#pragma once

// Word, gap and source labels plus HTER derived from a (pseudo-)post-edit,
// using a unit-cost Levenshtein alignment between MT and post-edit. Block
// shifts are not modelled.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qestack/corpus.hpp"
#include "qestack/errors.hpp"

namespace qestack::labeler {

enum class EditKind : std::uint8_t {
  match,
  substitute,
  insert_into_gap,  // token present only in the post-edit
  delete_from_mt,   // token present only in the MT
};

struct EditOp {
  EditKind kind = EditKind::match;
  std::optional<std::size_t> mt_index;
  std::optional<std::size_t> pe_index;

  bool operator==(const EditOp&) const = default;
};

struct EditScript {
  std::vector<EditOp> ops;

  std::size_t cost() const {
    return static_cast<std::size_t>(std::count_if(ops.begin(), ops.end(), [](const EditOp& op) {
      return op.kind != EditKind::match;
    }));
  }
  std::size_t count(EditKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(ops.begin(), ops.end(), [kind](const EditOp& op) { return op.kind == kind; }));
  }
};

// Minimum-cost script under unit costs. On the backtrace, ties prefer
// match, then substitution, then deletion from MT, then insertion.
inline EditScript align_edit(const Sentence& mt, const Sentence& pe) {
  const std::size_t n = mt.size();
  const std::size_t m = pe.size();
  const std::size_t width = m + 1;
  std::vector<std::size_t> dist((n + 1) * width);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * width + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (mt[i - 1] == pe[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  EditScript script;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = at(i, j);
    if (i > 0 && j > 0 && mt[i - 1] == pe[j - 1] && at(i - 1, j - 1) == here) {
      script.ops.push_back({EditKind::match, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && j > 0 && at(i - 1, j - 1) + 1 == here) {
      script.ops.push_back({EditKind::substitute, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && at(i - 1, j) + 1 == here) {
      script.ops.push_back({EditKind::delete_from_mt, i - 1, std::nullopt});
      --i;
    } else {
      script.ops.push_back({EditKind::insert_into_gap, std::nullopt, j - 1});
      --j;
    }
  }
  std::reverse(script.ops.begin(), script.ops.end());
  return script;
}

// MT word BAD iff substituted or deleted; gap g BAD iff at least one token
// is inserted between MT tokens g-1 and g (gap 0 precedes the first token).
inline TargetTags tags_from_edits(const EditScript& script, std::size_t n_mt) {
  TargetTags tags{TagSequence(n_mt, Tag::ok), TagSequence(n_mt + 1, Tag::ok)};
  std::size_t next_mt = 0;
  std::size_t next_pe = 0;
  for (const auto& op : script.ops) {
    const bool uses_mt = op.kind != EditKind::insert_into_gap;
    const bool uses_pe = op.kind != EditKind::delete_from_mt;
    if (uses_mt != op.mt_index.has_value() || uses_pe != op.pe_index.has_value()) {
      throw InconsistentScript("edit operation carries the wrong indices");
    }
    if (uses_pe) {
      if (*op.pe_index != next_pe) throw InconsistentScript("post-edit indices out of order");
      ++next_pe;
    }
    if (!uses_mt) {
      tags.gaps[next_mt] = Tag::bad;
      continue;
    }
    if (*op.mt_index != next_mt || next_mt >= n_mt) throw InconsistentScript("MT indices out of order");
    if (op.kind != EditKind::match) tags.words[next_mt] = Tag::bad;
    ++next_mt;
  }
  if (next_mt != n_mt) throw InconsistentScript("script covers " + std::to_string(next_mt) + " of " +
                                                std::to_string(n_mt) + " MT tokens");
  return tags;
}

inline double hter(const EditScript& script, std::size_t pe_len, bool cap = true) {
  if (pe_len == 0) throw DegenerateInput("HTER needs a non-empty post-edit");
  const double value = static_cast<double>(script.cost()) / static_cast<double>(pe_len);
  return cap ? std::min(value, 1.0) : value;
}

// Projects target tags onto the source through word alignments. A source
// token is BAD if aligned to a BAD MT word, or if it lies strictly between
// the rightmost source token aligned to MT token g-1 and the leftmost one
// aligned to MT token g for a BAD inner gap g. Unaligned tokens stay OK.
inline SourceTags source_tags_from_target(const TargetTags& target, const Alignment& alignment,
                                          std::size_t src_len) {
  const std::size_t n_mt = target.words.size();
  for (const auto& p : alignment) {
    if (p.src >= src_len || p.mt >= n_mt) {
      throw IndexError("alignment point " + std::to_string(p.src) + "-" + std::to_string(p.mt) + " out of range");
    }
  }
  SourceTags tags(src_len, Tag::ok);
  for (const auto& p : alignment) {
    if (target.words[p.mt] == Tag::bad) tags[p.src] = Tag::bad;
  }
  if (target.gaps.size() == n_mt + 1) {
    const auto sources = aligned_sources(alignment, n_mt);
    for (std::size_t g = 1; g < n_mt; ++g) {
      if (target.gaps[g] != Tag::bad) continue;
      const auto& left = sources[g - 1];
      const auto& right = sources[g];
      if (left.empty() || right.empty()) continue;
      const std::size_t lo = left.back();
      const std::size_t hi = right.front();
      for (std::size_t s = lo + 1; s < hi; ++s) tags[s] = Tag::bad;
    }
  }
  return tags;
}

struct Labels {
  TargetTags target;
  double hter = 0.0;
  std::optional<SourceTags> source;
};

inline Labels make_labels(const Sentence& mt, const Sentence& pe, bool cap_hter = true,
                          const Sentence* src = nullptr, const Alignment* alignment = nullptr) {
  const EditScript script = align_edit(mt, pe);
  Labels out;
  out.target = tags_from_edits(script, mt.size());
  out.hter = hter(script, pe.size(), cap_hter);
  if (src != nullptr && alignment != nullptr) {
    out.source = source_tags_from_target(out.target, *alignment, src->size());
  }
  return out;
}

}  // namespace qestack::labeler
