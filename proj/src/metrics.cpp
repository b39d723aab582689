#include "s2st/metrics.hpp"

#include <cstdint>
#include <limits>

#include "s2st/textnorm.hpp"
#include "s2st/util.hpp"

namespace s2st::metrics {

namespace {

struct Counts {
  std::size_t s = 0, d = 0, i = 0;
  std::size_t cost() const { return s + d + i; }
};

enum : std::uint8_t { kFromDiag = 0, kFromDel = 1, kFromIns = 2 };

// Chooses the predecessor of cell (i, j), i >= 1, j >= 1. Candidates are tried
// in preference order and only a strictly cheaper one replaces the current pick.
inline std::uint8_t choose(const Counts& diag, bool equal, const Counts& up, const Counts& left,
                           Counts& out) {
  out = diag;
  if (!equal) ++out.s;
  std::uint8_t from = kFromDiag;
  if (up.cost() + 1 < out.cost()) {
    out = up;
    ++out.d;
    from = kFromDel;
  }
  if (left.cost() + 1 < out.cost()) {
    out = left;
    ++out.i;
    from = kFromIns;
  }
  return from;
}

// Two rows over the shorter sequence. `transposed` means the outer loop walks
// the hypothesis; cell semantics (ref index i, hyp index j) stay the same.
template <typename Seq>
WerScore edit_counts(const Seq& ref, const Seq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  Counts result;
  if (n >= m) {
    std::vector<Counts> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j].i = j;
    for (std::size_t i = 1; i <= n; ++i) {
      cur[0] = Counts{0, i, 0};
      for (std::size_t j = 1; j <= m; ++j) {
        choose(prev[j - 1], ref[i - 1] == hyp[j - 1], prev[j], cur[j - 1], cur[j]);
      }
      std::swap(prev, cur);
    }
    result = prev[m];
  } else {
    std::vector<Counts> prev(n + 1), cur(n + 1);
    for (std::size_t i = 0; i <= n; ++i) prev[i].d = i;
    for (std::size_t j = 1; j <= m; ++j) {
      cur[0] = Counts{0, 0, j};
      for (std::size_t i = 1; i <= n; ++i) {
        // up = (i-1, j) lives in cur; left = (i, j-1) lives in prev.
        choose(prev[i - 1], ref[i - 1] == hyp[j - 1], cur[i - 1], prev[i], cur[i]);
      }
      std::swap(prev, cur);
    }
    result = prev[n];
  }
  return WerScore{result.s, result.d, result.i, n};
}

}  // namespace

double WerScore::rate() const noexcept {
  if (ref_length == 0) return errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(errors()) / static_cast<double>(ref_length);
}

WerScore& WerScore::operator+=(const WerScore& o) noexcept {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

const char* to_string(EditOp op) noexcept {
  switch (op) {
    case EditOp::match: return "match";
    case EditOp::substitute: return "substitute";
    case EditOp::deletion: return "delete";
    case EditOp::insertion: return "insert";
  }
  return "?";
}

WerScore Alignment::score() const {
  WerScore s;
  for (const auto& op : ops) {
    switch (op.op) {
      case EditOp::match: ++s.ref_length; break;
      case EditOp::substitute: ++s.substitutions; ++s.ref_length; break;
      case EditOp::deletion: ++s.deletions; ++s.ref_length; break;
      case EditOp::insertion: ++s.insertions; break;
    }
  }
  return s;
}

WerScore word_error_rate(std::span<const std::string> ref, std::span<const std::string> hyp) {
  return edit_counts(ref, hyp);
}

WerScore word_error_rate(std::string_view ref_text, std::string_view hyp_text) {
  auto ref = text::split_words(ref_text);
  auto hyp = text::split_words(hyp_text);
  return edit_counts(ref, hyp);
}

WerScore char_error_rate(std::string_view ref_text, std::string_view hyp_text) {
  return edit_counts(utf8_to_u32(ref_text), utf8_to_u32(hyp_text));
}

Alignment align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t width = m + 1;
  std::vector<std::uint8_t> from((n + 1) * width, kFromDiag);
  std::vector<Counts> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    prev[j].i = j;
    from[j] = kFromIns;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = Counts{0, i, 0};
    from[i * width] = kFromDel;
    for (std::size_t j = 1; j <= m; ++j) {
      from[i * width + j] = choose(prev[j - 1], ref[i - 1] == hyp[j - 1], prev[j], cur[j - 1], cur[j]);
    }
    std::swap(prev, cur);
  }

  Alignment out;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    std::uint8_t f = from[i * width + j];
    if (i > 0 && j > 0 && f == kFromDiag) {
      EditOp op = ref[i - 1] == hyp[j - 1] ? EditOp::match : EditOp::substitute;
      out.ops.push_back({op, ref[i - 1], hyp[j - 1]});
      --i;
      --j;
    } else if (i > 0 && (f == kFromDel || j == 0)) {
      out.ops.push_back({EditOp::deletion, ref[i - 1], std::nullopt});
      --i;
    } else {
      out.ops.push_back({EditOp::insertion, std::nullopt, hyp[j - 1]});
      --j;
    }
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

WerScore corpus_wer(std::span<const std::pair<Tokens, Tokens>> pairs) {
  if (pairs.empty()) throw EmptyCorpusError();
  WerScore total;
  for (const auto& [ref, hyp] : pairs) total += word_error_rate(ref, hyp);
  return total;
}

}  // namespace s2st::metrics
