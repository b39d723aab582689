#include "s2st/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "s2st/textnorm.hpp"
#include "s2st/util.hpp"

namespace s2st::corpus {

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::optional<std::string> non_empty(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

std::string clip_id_from_path(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

// Kahan-Babuska summation keeps hour totals exact to well below 1e-9 relative.
class Sum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    case Split::validated: return "validated";
    case Split::other: return "other";
  }
  return "other";
}

std::optional<Split> parse_split(std::string_view name) noexcept {
  for (Split s : {Split::train, Split::dev, Split::test, Split::validated, Split::other}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

Split split_from_filename(const std::filesystem::path& tsv) {
  return parse_split(tsv.stem().string()).value_or(Split::other);
}

ParseResult parse_clips_tsv(std::istream& in, Split default_split) {
  ParseResult result;
  std::string line;
  if (!std::getline(in, line)) throw CorpusError("TSV is empty: no header row");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);

  int col_path = -1, col_sentence = -1, col_id = -1, col_age = -1, col_gender = -1, col_accent = -1,
      col_split = -1;
  std::vector<int> extra_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& h = header[i];
    const int c = static_cast<int>(i);
    if (h == "path") col_path = c;
    else if (h == "sentence") col_sentence = c;
    else if (h == "clip_id") col_id = c;
    else if (h == "age") col_age = c;
    else if (h == "gender") col_gender = c;
    else if (h == "accent" || h == "accents") col_accent = c;
    else if (h == "split") col_split = c;
    else extra_cols.push_back(c);
  }
  std::vector<std::string> missing;
  if (col_path < 0) missing.emplace_back("path");
  if (col_sentence < 0) missing.emplace_back("sentence");
  if (!missing.empty()) {
    std::string msg = "TSV header lacks mandatory column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw CorpusError(msg);
  }

  std::unordered_set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      result.malformed.push_back({line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                               std::to_string(fields.size())});
      continue;
    }
    ClipRecord r;
    r.audio_path = fields[static_cast<std::size_t>(col_path)];
    r.sentence = fields[static_cast<std::size_t>(col_sentence)];
    if (r.audio_path.empty()) {
      result.malformed.push_back({line_no, "empty path"});
      continue;
    }
    r.clip_id = col_id >= 0 ? fields[static_cast<std::size_t>(col_id)] : clip_id_from_path(r.audio_path);
    if (r.clip_id.empty()) {
      result.malformed.push_back({line_no, "empty clip id"});
      continue;
    }
    if (col_age >= 0) r.age = non_empty(fields[static_cast<std::size_t>(col_age)]);
    if (col_gender >= 0) r.gender = non_empty(fields[static_cast<std::size_t>(col_gender)]);
    if (col_accent >= 0) r.accent = non_empty(fields[static_cast<std::size_t>(col_accent)]);
    r.split = default_split;
    if (col_split >= 0) {
      auto s = parse_split(fields[static_cast<std::size_t>(col_split)]);
      if (!s) {
        result.malformed.push_back({line_no, "unknown split '" + fields[static_cast<std::size_t>(col_split)] + "'"});
        continue;
      }
      r.split = *s;
    }
    for (int c : extra_cols) r.extra.emplace_back(header[static_cast<std::size_t>(c)], fields[static_cast<std::size_t>(c)]);
    if (!seen_ids.insert(r.clip_id).second) {
      result.malformed.push_back({line_no, "duplicate clip id '" + r.clip_id + "'"});
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

ParseResult parse_clips_tsv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open TSV: " + path.string());
  return parse_clips_tsv(in, split_from_filename(path));
}

std::string serialize_clips_tsv(std::span<const ClipRecord> records) {
  std::vector<std::string> extra_names;
  std::set<std::string> known;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.extra) {
      if (known.insert(k).second) extra_names.push_back(k);
    }
  }
  std::ostringstream out;
  out << "clip_id\tpath\tsentence\tage\tgender\taccent\tsplit";
  for (const auto& k : extra_names) out << '\t' << k;
  out << '\n';
  for (const auto& r : records) {
    out << r.clip_id << '\t' << r.audio_path << '\t' << r.sentence << '\t' << r.age.value_or("") << '\t'
        << r.gender.value_or("") << '\t' << r.accent.value_or("") << '\t' << to_string(r.split);
    for (const auto& k : extra_names) {
      auto it = std::find_if(r.extra.begin(), r.extra.end(), [&](const auto& kv) { return kv.first == k; });
      out << '\t' << (it == r.extra.end() ? std::string() : it->second);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ClipRecord> filter_split(std::span<const ClipRecord> records, Split split) {
  std::vector<ClipRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const ClipRecord& r) { return r.split == split; });
  return out;
}

CorpusStats corpus_stats(std::span<const ClipRecord> records, const DurationLookup& duration_of) {
  CorpusStats stats;
  Sum total, validated;
  for (const auto& r : records) {
    ++stats.clip_count;
    ++stats.per_split_counts[r.split];
    auto d = duration_of ? duration_of(r.clip_id) : std::nullopt;
    if (!d || !std::isfinite(*d) || *d < 0.0) {
      ++stats.unmeasured;
      continue;
    }
    total.add(*d);
    if (r.split == Split::validated) validated.add(*d);
  }
  stats.total_hours = total.value() / 3600.0;
  stats.validated_hours = validated.value() / 3600.0;
  return stats;
}

std::string Manifest::to_jsonl() const {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["clip_id"] = e.clip_id;
    j["audio_path"] = e.audio_path.string();
    j["text"] = e.text;
    out += j.dump() + "\n";
  }
  return out;
}

Manifest Manifest::from_jsonl(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      m.entries.push_back({j.at("clip_id").get<std::string>(), j.at("audio_path").get<std::string>(),
                           j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

std::string Manifest::digest() const { return sha256_hex(to_jsonl()); }

Manifest prepare_manifest(std::span<const ClipRecord> records, const std::filesystem::path& audio_root) {
  std::error_code ec;
  if (!std::filesystem::is_directory(audio_root, ec)) {
    throw CorpusError("audio root does not exist: " + audio_root.string());
  }
  const auto root = std::filesystem::absolute(audio_root).lexically_normal();

  Manifest m;
  std::vector<ManifestEntry> candidates;
  for (const auto& r : records) {
    auto resolved = (root / r.audio_path).lexically_normal();
    if (!std::filesystem::is_regular_file(resolved, ec)) {
      ++m.missing_audio;
      continue;
    }
    candidates.push_back({r.clip_id, resolved, text::normalize_hindi(r.sentence)});
  }
  std::sort(candidates.begin(), candidates.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.clip_id, a.audio_path, a.text) < std::tie(b.clip_id, b.audio_path, b.text);
  });
  for (auto& c : candidates) {
    if (!m.entries.empty() && m.entries.back().clip_id == c.clip_id) {
      ++m.duplicates;
      continue;
    }
    m.entries.push_back(std::move(c));
  }
  return m;
}

}  // namespace s2st::corpus
