#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace s2st::metrics {

/// Edit counts of a minimum-cost alignment and the derived error rate.
struct WerScore {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }

  /// errors / ref_length. An empty reference gives 0 when there are no
  /// errors and +infinity otherwise.
  double rate() const noexcept;

  WerScore& operator+=(const WerScore& other) noexcept;
  bool operator==(const WerScore&) const = default;
};

enum class EditOp { match, substitute, deletion, insertion };

const char* to_string(EditOp op) noexcept;

struct AlignedToken {
  EditOp op;
  std::optional<std::string> ref;
  std::optional<std::string> hyp;

  bool operator==(const AlignedToken&) const = default;
};

struct Alignment {
  std::vector<AlignedToken> ops;

  /// Counts implied by the op sequence.
  WerScore score() const;
};

using Tokens = std::vector<std::string>;

// Among equal-cost alignments, the backtrace prefers
// match > substitute > deletion > insertion. Counts use O(min(|ref|, |hyp|)) memory.
WerScore word_error_rate(std::span<const std::string> ref, std::span<const std::string> hyp);

/// Whitespace-splits both (normalised) texts first.
WerScore word_error_rate(std::string_view ref_text, std::string_view hyp_text);

/// Same contract over Unicode code points, spaces included.
WerScore char_error_rate(std::string_view ref_text, std::string_view hyp_text);

Alignment align(std::span<const std::string> ref, std::span<const std::string> hyp);

class EmptyCorpusError : public std::invalid_argument {
 public:
  EmptyCorpusError() : std::invalid_argument("corpus WER needs at least one (ref, hyp) pair") {}
};

/// Pooled WER: counts are summed over the pairs before dividing, so long
/// utterances weigh more than short ones.
WerScore corpus_wer(std::span<const std::pair<Tokens, Tokens>> pairs);

}  // namespace s2st::metrics
