#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace s2st::corpus {

enum class Split { train, dev, test, validated, other };

std::string_view to_string(Split split) noexcept;
std::optional<Split> parse_split(std::string_view name) noexcept;
/// "dev.tsv" -> dev and so on; unrecognised names map to `other`.
Split split_from_filename(const std::filesystem::path& tsv);

/// One Common Voice row.
struct ClipRecord {
  std::string clip_id;
  std::string audio_path;
  std::string sentence;
  std::optional<std::string> age;
  std::optional<std::string> gender;
  std::optional<std::string> accent;
  Split split = Split::validated;
  /// Columns not modelled above (client_id, up_votes, locale, ...), in header order.
  std::vector<std::pair<std::string, std::string>> extra;

  bool operator==(const ClipRecord&) const = default;
};

struct MalformedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<ClipRecord> records;
  std::vector<MalformedRow> malformed;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header-driven parse. `path` and `sentence` columns are mandatory (throws
/// CorpusError otherwise); damaged rows are skipped and reported in
/// ParseResult::malformed. A `split` column overrides `default_split`.
ParseResult parse_clips_tsv(std::istream& in, Split default_split = Split::validated);
ParseResult parse_clips_tsv_file(const std::filesystem::path& path);

/// Writes the columns parse_clips_tsv understands, plus the union of extra columns.
std::string serialize_clips_tsv(std::span<const ClipRecord> records);

std::vector<ClipRecord> filter_split(std::span<const ClipRecord> records, Split split);

struct CorpusStats {
  std::size_t clip_count = 0;
  double total_hours = 0.0;
  double validated_hours = 0.0;
  std::map<Split, std::size_t> per_split_counts;
  /// Records without a known duration; excluded from the hour sums.
  std::size_t unmeasured = 0;
};

using DurationLookup = std::function<std::optional<double>(const std::string& clip_id)>;

CorpusStats corpus_stats(std::span<const ClipRecord> records, const DurationLookup& duration_of);

struct ManifestEntry {
  std::string clip_id;
  std::filesystem::path audio_path;  // absolute
  std::string text;                  // normalised

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;  // sorted by clip_id
  std::optional<std::string> vocab_ref;
  std::size_t missing_audio = 0;
  std::size_t duplicates = 0;

  /// One JSON object per line: {"clip_id", "audio_path", "text"}.
  std::string to_jsonl() const;
  static Manifest from_jsonl(std::string_view text);
  std::string digest() const;
};

/// Resolves audio paths under `audio_root`, normalises transcripts, drops
/// records whose audio is missing. Entry order is by clip_id, independent of
/// input order; for duplicate ids the entry with the smallest (path, text) wins.
Manifest prepare_manifest(std::span<const ClipRecord> records, const std::filesystem::path& audio_root);

/// Sidecar cache of clip durations keyed by the SHA-256 of the clip file.
/// save() merges with whatever is on disk and replaces the file atomically.
class DurationCache {
 public:
  explicit DurationCache(std::filesystem::path file);

  std::optional<double> get(const std::string& digest) const;
  void put(const std::string& digest, double seconds);
  std::size_t size() const;
  void save();

 private:
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::map<std::string, double> entries_;
};

struct DurationScan {
  std::unordered_map<std::string, double> seconds_by_clip;
  std::size_t cache_hits = 0;
  std::size_t failures = 0;
};

/// Measures every record's clip under `clips_dir` with up to `workers` threads.
/// Missing or undecodable clips are counted in `failures`.
DurationScan scan_durations(std::span<const ClipRecord> records, const std::filesystem::path& clips_dir,
                            DurationCache* cache, unsigned workers = 4);

}  // namespace s2st::corpus
