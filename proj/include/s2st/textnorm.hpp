#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace s2st::text {

/// Canonical composition, punctuation stripped, whitespace collapsed and
/// trimmed. Devanagari letters and combining marks pass through untouched.
std::string normalize_hindi(std::string_view text);

/// As normalize_hindi, plus lowercasing.
std::string normalize_english(std::string_view text);

/// True for code points removed by the normalisers: ASCII punctuation,
/// danda and double danda, typographic quotes and dashes.
bool is_stripped_punctuation(char32_t cp);

/// Whitespace split of already-normalised text.
std::vector<std::string> split_words(std::string_view text);

/// Unicode canonical composition (NFC).
std::string nfc(std::string_view text);

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CTC character vocabulary. Plain symbols are single code points in code
/// point order; the word delimiter, unknown and padding symbols follow.
class Vocab {
 public:
  static constexpr std::string_view kWordDelimiter = "|";
  static constexpr std::string_view kUnknown = "[UNK]";
  static constexpr std::string_view kPadding = "[PAD]";

  /// Symbols in id order. Validates the invariants.
  explicit Vocab(std::vector<std::string> symbols);

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  int id(std::string_view symbol) const;  // -1 when absent
  const std::string& symbol(int id) const;

  int word_delimiter_id() const noexcept { return delimiter_id_; }
  int unknown_id() const noexcept { return unknown_id_; }
  int padding_id() const noexcept { return padding_id_; }

  /// Spaces map to the word delimiter, characters outside the vocab to unknown.
  std::vector<int> encode(std::string_view text) const;
  /// Inverse of encode. Padding ids are dropped; unknown ids decode to U+FFFD.
  std::string decode(std::span<const int> ids) const;
  /// Greedy CTC collapse: merge repeated ids, drop padding (the blank), then decode.
  std::string ctc_greedy_decode(std::span<const int> frame_ids) const;

  /// JSON object symbol -> id, keys in id order.
  std::string to_json() const;
  static Vocab from_json(std::string_view json);

  /// SHA-256 of to_json().
  std::string digest() const;

  bool operator==(const Vocab& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int, std::less<>> ids_;
  int delimiter_id_ = -1;
  int unknown_id_ = -1;
  int padding_id_ = -1;
};

/// Distinct non-space code points across all transcripts, sorted, followed by
/// the three special symbols. Throws VocabError when no symbol is found.
Vocab build_ctc_vocab(std::span<const std::string> transcripts);

}  // namespace s2st::text
