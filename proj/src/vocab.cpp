#include <algorithm>
#include <set>

#include "json.hpp"
#include "s2st/textnorm.hpp"
#include "s2st/util.hpp"

namespace s2st::text {

Vocab::Vocab(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.empty()) throw VocabError("vocab symbol " + std::to_string(i) + " is empty");
    bool special = s == kWordDelimiter || s == kUnknown || s == kPadding;
    if (!special) {
      auto cps = utf8_to_u32(s);
      if (cps.size() != 1) throw VocabError("vocab symbol '" + s + "' is not a single character");
      if (cps[0] == U' ' || cps[0] == U'\t' || cps[0] == U'\n' || cps[0] == U'\r' || cps[0] == 0x00A0) {
        throw VocabError("whitespace cannot be a vocab symbol");
      }
    }
    if (!ids_.emplace(s, static_cast<int>(i)).second) {
      throw VocabError("duplicate vocab symbol '" + s + "'");
    }
  }
  delimiter_id_ = id(kWordDelimiter);
  unknown_id_ = id(kUnknown);
  padding_id_ = id(kPadding);
  if (delimiter_id_ < 0 || unknown_id_ < 0 || padding_id_ < 0) {
    throw VocabError("vocab lacks one of the special symbols | [UNK] [PAD]");
  }
}

int Vocab::id(std::string_view symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? -1 : it->second;
}

const std::string& Vocab::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw VocabError("vocab id out of range: " + std::to_string(id));
  }
  return symbols_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> out;
  for (char32_t cp : utf8_to_u32(text)) {
    if (cp == U' ') {
      out.push_back(delimiter_id_);
      continue;
    }
    int i = id(u32_to_utf8(std::u32string(1, cp)));
    out.push_back(i < 0 ? unknown_id_ : i);
  }
  return out;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (i == padding_id_) continue;
    if (i == delimiter_id_) {
      out.push_back(' ');
    } else if (i == unknown_id_) {
      out += "\xEF\xBF\xBD";
    } else {
      out += symbol(i);
    }
  }
  return out;
}

std::string Vocab::ctc_greedy_decode(std::span<const int> frame_ids) const {
  std::vector<int> collapsed;
  int prev = -1;
  for (int i : frame_ids) {
    if (i != prev && i != padding_id_) collapsed.push_back(i);
    prev = i;
  }
  // Word delimiters at the edges or in runs carry no words.
  std::string out;
  for (const auto& w : split_words(decode(collapsed))) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string Vocab::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < symbols_.size(); ++i) j[symbols_[i]] = i;
  return j.dump(2) + "\n";
}

Vocab Vocab::from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw VocabError(std::string("vocab JSON: ") + e.what());
  }
  if (!j.is_object()) throw VocabError("vocab JSON must be an object");
  std::vector<std::string> symbols(j.size());
  std::vector<bool> seen(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer()) throw VocabError("vocab id for '" + it.key() + "' is not an integer");
    auto id = it.value().get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= symbols.size() || seen[static_cast<std::size_t>(id)]) {
      throw VocabError("vocab ids must be contiguous from 0 and unique");
    }
    seen[static_cast<std::size_t>(id)] = true;
    symbols[static_cast<std::size_t>(id)] = it.key();
  }
  return Vocab(std::move(symbols));
}

std::string Vocab::digest() const { return sha256_hex(to_json()); }

Vocab build_ctc_vocab(std::span<const std::string> transcripts) {
  std::set<char32_t> chars;
  for (const auto& t : transcripts) {
    for (char32_t cp : utf8_to_u32(t)) {
      if (cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == 0x00A0) continue;
      if (cp == U'|') continue;  // reserved for the word delimiter
      chars.insert(cp);
    }
  }
  if (chars.empty()) throw VocabError("cannot build a vocab: transcripts contain no characters");
  std::vector<std::string> symbols;
  symbols.reserve(chars.size() + 3);
  for (char32_t cp : chars) symbols.push_back(u32_to_utf8(std::u32string(1, cp)));
  symbols.emplace_back(Vocab::kWordDelimiter);
  symbols.emplace_back(Vocab::kUnknown);
  symbols.emplace_back(Vocab::kPadding);
  return Vocab(std::move(symbols));
}

}  // namespace s2st::text
