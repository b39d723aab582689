#include <chrono>
#include <ctime>

#include "s2st/pipeline.hpp"
#include "s2st/util.hpp"

namespace s2st::pipeline {

namespace {

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string cache_key(std::string_view stage_kind, std::string_view model_id, std::string_view input_digest,
                      const std::map<std::string, std::string>& parameters) {
  std::string buf;
  buf.append(stage_kind);
  buf.push_back('\0');
  buf.append(model_id);
  buf.push_back('\0');
  buf.append(input_digest);
  buf.push_back('\0');
  bool first = true;
  for (const auto& [k, v] : parameters) {
    if (!first) buf.push_back('\x1F');
    first = false;
    buf += k;
    buf.push_back('=');
    buf += v;
  }
  return sha256_hex(buf);
}

StageCache::StageCache(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

std::filesystem::path StageCache::entry_path(const std::string& key) const { return dir_ / (key + ".json"); }

std::optional<nlohmann::json> StageCache::get(const std::string& key, stages::StageKind stage) {
  auto path = entry_path(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto entry = nlohmann::json::parse(read_file_text(path));
    const auto& payload = entry.at("payload");
    if (entry.at("key").get<std::string>() != key ||
        entry.at("stage_kind").get<std::string>() != stages::to_string(stage) ||
        entry.at("payload_sha256").get<std::string>() != sha256_hex(payload.dump())) {
      throw std::runtime_error("entry does not verify");
    }
    return payload;
  } catch (const std::exception&) {
    evict(key);
    return std::nullopt;
  }
}

void StageCache::put(const std::string& key, stages::StageKind stage, const nlohmann::json& payload) {
  nlohmann::ordered_json entry;
  entry["key"] = key;
  entry["stage_kind"] = stages::to_string(stage);
  entry["created_at"] = utc_timestamp();
  entry["payload_sha256"] = sha256_hex(payload.dump());
  entry["payload"] = payload;
  atomic_write_file(entry_path(key), entry.dump() + "\n");
}

void StageCache::evict(const std::string& key) {
  ++corrupt_;
  std::error_code ec;
  std::filesystem::remove(entry_path(key), ec);
}

}  // namespace s2st::pipeline
