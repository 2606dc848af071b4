// Copyright 2026 The llm-bisect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Line-level diff annotation with three markers:
//
//   "+ "  line only in the new revision
//   "- "  line only in the old revision
//   "~ "  line present in both (after whitespace normalization) whose line
//         number changed
//   "  "  line present in both at the same line number
//
// Matching runs in two passes. A longest common subsequence over normalized
// lines gives the order-preserving backbone; the remaining lines are then
// paired by equal content, nearest displacement first. Every matched pair is
// tagged by comparing its old and new line numbers.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "llm_bisect/repo.hpp"

namespace llm_bisect {

enum class LineTag { Added, Deleted, Relocated, Unchanged };

struct AnnotatedLine {
  LineTag tag;
  std::string text;
  std::optional<std::size_t> old_index;
  std::optional<std::size_t> new_index;

  friend bool operator==(const AnnotatedLine&, const AnnotatedLine&) = default;
};

struct DiffStats {
  std::size_t added = 0;
  std::size_t deleted = 0;
  std::size_t relocated = 0;
  std::size_t unchanged = 0;

  void count(LineTag tag) {
    switch (tag) {
      case LineTag::Added: ++added; break;
      case LineTag::Deleted: ++deleted; break;
      case LineTag::Relocated: ++relocated; break;
      case LineTag::Unchanged: ++unchanged; break;
    }
  }
  DiffStats& operator+=(const DiffStats& o) {
    added += o.added;
    deleted += o.deleted;
    relocated += o.relocated;
    unchanged += o.unchanged;
    return *this;
  }
  friend bool operator==(const DiffStats&, const DiffStats&) = default;
};

struct AnnotatedFile {
  std::string path;
  std::vector<AnnotatedLine> lines;
  DiffStats stats;

  friend bool operator==(const AnnotatedFile&, const AnnotatedFile&) = default;
};

struct AnnotatedDiff {
  std::vector<AnnotatedFile> files;
  std::vector<std::string> binary_paths;
  DiffStats stats;

  bool empty() const noexcept { return files.empty(); }
  friend bool operator==(const AnnotatedDiff&, const AnnotatedDiff&) = default;
};

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

/// Collapses whitespace runs to one space and trims both ends.
inline std::string normalize(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool pending_space = false;
  for (char c : line) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

/// Lines that carry no identity of their own (blank, `}`, `);`, ...). They are
/// never paired across the gap between the LCS backbone and the residuals.
inline bool is_trivial_line(std::string_view normalized) {
  return std::all_of(normalized.begin(), normalized.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) || c == ' ';
  });
}

namespace detail {

using LinePairs = std::vector<std::pair<std::size_t, std::size_t>>;

// Above this many DP cells the linear-space variant takes over.
inline constexpr std::size_t kMaxDenseCells = std::size_t{1} << 24;

// Suffix-table LCS walk. At equal lines the match is taken; otherwise the
// larger suffix wins and ties consume the old side first.
inline void lcs_dense(const std::vector<std::uint32_t>& a, std::size_t a0, std::size_t a1,
                      const std::vector<std::uint32_t>& b, std::size_t b0, std::size_t b1,
                      LinePairs& out) {
  const std::size_t n = a1 - a0;
  const std::size_t m = b1 - b0;
  std::vector<std::uint32_t> table((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return table[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = a[a0 + i] == b[b0 + j] ? at(i + 1, j + 1) + 1
                                         : std::max(at(i + 1, j), at(i, j + 1));
    }
  }
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[a0 + i] == b[b0 + j]) {
      out.emplace_back(a0 + i, b0 + j);
      ++i;
      ++j;
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
}

// Forward LCS lengths of a[a0,a1) against every prefix of b[b0,b1).
inline std::vector<std::uint32_t> lcs_row(const std::vector<std::uint32_t>& a, std::size_t a0,
                                          std::size_t a1, const std::vector<std::uint32_t>& b,
                                          std::size_t b0, std::size_t b1, bool reverse) {
  const std::size_t m = b1 - b0;
  std::vector<std::uint32_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t ii = 0; ii < a1 - a0; ++ii) {
    std::size_t i = reverse ? a1 - 1 - ii : a0 + ii;
    for (std::size_t jj = 1; jj <= m; ++jj) {
      std::size_t j = reverse ? b1 - jj : b0 + jj - 1;
      cur[jj] = a[i] == b[j] ? prev[jj - 1] + 1 : std::max(prev[jj], cur[jj - 1]);
    }
    std::swap(prev, cur);
  }
  return prev;
}

// Hirschberg's divide and conquer for very large hunks.
inline void lcs_linear(const std::vector<std::uint32_t>& a, std::size_t a0, std::size_t a1,
                       const std::vector<std::uint32_t>& b, std::size_t b0, std::size_t b1,
                       LinePairs& out) {
  if (a1 <= a0 || b1 <= b0) return;
  if ((a1 - a0) * (b1 - b0) <= kMaxDenseCells) {
    lcs_dense(a, a0, a1, b, b0, b1, out);
    return;
  }
  std::size_t mid = a0 + (a1 - a0) / 2;
  auto left = lcs_row(a, a0, mid, b, b0, b1, false);
  auto right = lcs_row(a, mid, a1, b, b0, b1, true);
  const std::size_t m = b1 - b0;
  std::size_t best_k = 0;
  std::uint32_t best = 0;
  for (std::size_t k = 0; k <= m; ++k) {
    std::uint32_t v = left[k] + right[m - k];
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  lcs_linear(a, a0, mid, b, b0, b0 + best_k, out);
  lcs_linear(a, mid, a1, b, b0 + best_k, b1, out);
}

inline LinePairs lcs_pairs(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b) {
  LinePairs out;
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) {
    out.emplace_back(prefix, prefix);
    ++prefix;
  }
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
         a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
    ++suffix;
  }
  lcs_linear(a, prefix, a.size() - suffix, b, prefix, b.size() - suffix, out);
  for (std::size_t k = suffix; k-- > 0;) {
    out.emplace_back(a.size() - 1 - k, b.size() - 1 - k);
  }
  return out;
}

}  // namespace detail

inline AnnotatedFile annotate_file(std::string path, const std::vector<std::string>& old_lines,
                                   const std::vector<std::string>& new_lines) {
  const std::size_t n = old_lines.size();
  const std::size_t m = new_lines.size();

  // Intern normalized lines so the LCS compares integers.
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<std::string> norm_old(n), norm_new(m);
  std::vector<std::uint32_t> a(n), b(m);
  auto intern = [&](const std::string& s) {
    return ids.try_emplace(s, static_cast<std::uint32_t>(ids.size())).first->second;
  };
  for (std::size_t i = 0; i < n; ++i) a[i] = intern(norm_old[i] = normalize(old_lines[i]));
  for (std::size_t j = 0; j < m; ++j) b[j] = intern(norm_new[j] = normalize(new_lines[j]));

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> old_to_new(n, kNone), new_to_old(m, kNone);
  std::vector<bool> backbone_old(n, false);
  for (auto [i, j] : detail::lcs_pairs(a, b)) {
    old_to_new[i] = j;
    new_to_old[j] = i;
    backbone_old[i] = true;
  }

  // Residual pairing: equal non-trivial content, smallest displacement first,
  // then smaller old index.
  std::map<std::uint32_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < n; ++i)
    if (old_to_new[i] == kNone && !is_trivial_line(norm_old[i])) groups[a[i]].first.push_back(i);
  for (std::size_t j = 0; j < m; ++j)
    if (new_to_old[j] == kNone && !is_trivial_line(norm_new[j])) groups[b[j]].second.push_back(j);
  for (auto& [id, sides] : groups) {
    auto& [olds, news] = sides;
    if (olds.empty() || news.empty()) continue;
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> candidates;
    candidates.reserve(olds.size() * news.size());
    for (auto i : olds)
      for (auto j : news) candidates.emplace_back(i > j ? i - j : j - i, i, j);
    std::sort(candidates.begin(), candidates.end());
    for (auto [dist, i, j] : candidates) {
      if (old_to_new[i] != kNone || new_to_old[j] != kNone) continue;
      old_to_new[i] = j;
      new_to_old[j] = i;
    }
  }

  // Deleted lines are emitted right after the new-side position of the
  // nearest preceding backbone line, or at the top when there is none.
  std::vector<std::vector<std::size_t>> deleted_after(m);
  std::vector<std::size_t> deleted_first;
  std::size_t anchor = kNone;
  for (std::size_t i = 0; i < n; ++i) {
    if (backbone_old[i]) {
      anchor = old_to_new[i];
    } else if (old_to_new[i] == kNone) {
      (anchor == kNone ? deleted_first : deleted_after[anchor]).push_back(i);
    }
  }

  AnnotatedFile file;
  file.path = std::move(path);
  file.lines.reserve(n + m);
  auto emit_deleted = [&](std::size_t i) {
    file.lines.push_back({LineTag::Deleted, old_lines[i], i, std::nullopt});
  };
  for (auto i : deleted_first) emit_deleted(i);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t i = new_to_old[j];
    if (i == kNone) {
      file.lines.push_back({LineTag::Added, new_lines[j], std::nullopt, j});
    } else {
      file.lines.push_back({i == j ? LineTag::Unchanged : LineTag::Relocated, new_lines[j], i, j});
    }
    for (auto d : deleted_after[j]) emit_deleted(d);
  }
  for (const auto& line : file.lines) file.stats.count(line.tag);
  return file;
}

inline AnnotatedDiff annotate(const RawDiff& diff) {
  AnnotatedDiff out;
  out.binary_paths = diff.binary_paths;
  out.files.reserve(diff.files.size());
  for (const auto& f : diff.files) {
    out.files.push_back(annotate_file(f.path, f.old_lines, f.new_lines));
    out.stats += out.files.back().stats;
  }
  return out;
}

inline std::string_view tag_prefix(LineTag tag) {
  switch (tag) {
    case LineTag::Added: return "+ ";
    case LineTag::Deleted: return "- ";
    case LineTag::Relocated: return "~ ";
    case LineTag::Unchanged: return "  ";
  }
  return "  ";
}

/// Text form embedded into prompts. Part of prompt fixtures; keep stable.
inline std::string render(const AnnotatedDiff& diff) {
  std::string out;
  for (const auto& file : diff.files) {
    out += "=== ";
    out += file.path;
    out += '\n';
    for (const auto& line : file.lines) {
      out += tag_prefix(line.tag);
      out += line.text;
      out += '\n';
    }
  }
  return out;
}

}  // namespace llm_bisect
