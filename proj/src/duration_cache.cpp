#include <atomic>
#include <thread>

#include "json.hpp"
#include "s2st/audio_io.hpp"
#include "s2st/corpus.hpp"
#include "s2st/util.hpp"

namespace s2st::corpus {

namespace {

std::map<std::string, double> read_cache_file(const std::filesystem::path& file) {
  std::map<std::string, double> out;
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) return out;
  try {
    auto j = nlohmann::json::parse(read_file_text(file));
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.value().is_number()) out[it.key()] = it.value().get<double>();
    }
  } catch (const std::exception&) {
    // An unreadable cache is rebuilt from scratch.
  }
  return out;
}

}  // namespace

DurationCache::DurationCache(std::filesystem::path file) : file_(std::move(file)) {
  entries_ = read_cache_file(file_);
}

std::optional<double> DurationCache::get(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DurationCache::put(const std::string& digest, double seconds) {
  std::lock_guard lock(mutex_);
  entries_[digest] = seconds;
}

std::size_t DurationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void DurationCache::save() {
  std::lock_guard lock(mutex_);
  // Another process may have written entries since we loaded; keep them.
  auto merged = read_cache_file(file_);
  for (const auto& [k, v] : entries_) merged[k] = v;
  entries_ = merged;
  nlohmann::json j(entries_);
  atomic_write_file(file_, j.dump(1) + "\n");
}

DurationScan scan_durations(std::span<const ClipRecord> records, const std::filesystem::path& clips_dir,
                            DurationCache* cache, unsigned workers) {
  struct Slot {
    std::optional<double> seconds;
    bool hit = false;
  };
  std::vector<Slot> slots(records.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      const auto path = clips_dir / records[i].audio_path;
      try {
        std::string digest = sha256_file(path);
        if (cache) {
          if (auto d = cache->get(digest)) {
            slots[i] = {d, true};
            continue;
          }
        }
        double d = audio::probe_duration(path);
        slots[i].seconds = d;
        if (cache) cache->put(digest, d);
      } catch (const std::exception&) {
        slots[i].seconds.reset();
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(records.size())));
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();

  DurationScan scan;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i].seconds) {
      scan.seconds_by_clip[records[i].clip_id] = *slots[i].seconds;
      if (slots[i].hit) ++scan.cache_hits;
    } else {
      ++scan.failures;
    }
  }
  if (cache) cache->save();
  return scan;
}

}  // namespace s2st::corpus
