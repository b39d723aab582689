#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "s2st/audio_io.hpp"
#include "s2st/stages.hpp"

namespace s2st::pipeline {

/// Inputs longer than this are transcribed window by window.
inline constexpr double kWindowSeconds = 30.0;

struct PipelineConfig {
  stages::BackendDescriptor asr = stages::default_descriptor(stages::StageKind::asr);
  stages::BackendDescriptor nmt = stages::default_descriptor(stages::StageKind::nmt);
  stages::BackendDescriptor tts = stages::default_descriptor(stages::StageKind::tts);
  /// Empty selects the first entry of the TTS backend's registry.
  std::string voice_prompt;
  bool cache_enabled = true;
  int canonical_rate = audio::kCanonicalRate;
  std::filesystem::path cache_dir;  // empty: default_stage_cache_dir()

  /// Throws ConfigError when stage kinds do not match their slots or the rate is not positive.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// $S2ST_STAGE_CACHE, else the user cache directory + "/s2st/stages".
std::filesystem::path default_stage_cache_dir();

/// Parses a config document. Relative "fixture" parameters and cache_dir are
/// resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const PipelineConfig& config);

enum StageIndex : std::size_t { kAsr = 0, kNmt = 1, kTts = 2 };

struct PipelineResult {
  stages::Transcript hindi_text;
  stages::Translation english_text;
  audio::AudioClip english_audio;
  std::array<double, 3> stage_timings{};  // asr, nmt, tts
  std::array<bool, 3> cache_hits{};
  std::string input_digest;
  std::string voice_prompt;
};

/// Input rejected before any stage ran.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A stage failed mid-run. Intermediates produced before the failure are kept.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(stages::StageKind stage, std::string backend_id, std::string cause,
                std::optional<stages::Transcript> hindi_text, std::optional<stages::Translation> english_text);

  stages::StageKind stage() const noexcept { return stage_; }
  const std::string& backend_id() const noexcept { return backend_id_; }
  const std::string& cause() const noexcept { return cause_; }
  const std::optional<stages::Transcript>& hindi_text() const noexcept { return hindi_text_; }
  const std::optional<stages::Translation>& english_text() const noexcept { return english_text_; }

 private:
  stages::StageKind stage_;
  std::string backend_id_;
  std::string cause_;
  std::optional<stages::Transcript> hindi_text_;
  std::optional<stages::Translation> english_text_;
};

/// SHA-256 (lowercase hex) of
///   stage_kind 0x00 model_id 0x00 input_digest 0x00 k1=v1 0x1F k2=v2 ...
/// with parameters in key order.
std::string cache_key(std::string_view stage_kind, std::string_view model_id, std::string_view input_digest,
                      const std::map<std::string, std::string>& parameters);

/// Filesystem store, one JSON file per entry named by its key. Writes are
/// atomic renames, so concurrent runs may duplicate work but never observe a
/// partial entry. Entries that fail to parse or verify are evicted.
class StageCache {
 public:
  explicit StageCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const std::string& key, stages::StageKind stage);
  void put(const std::string& key, stages::StageKind stage, const nlohmann::json& payload);
  /// Removes an entry whose payload turned out unusable; counted as corrupt.
  void evict(const std::string& key);

  std::filesystem::path entry_path(const std::string& key) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::size_t corrupt_evictions() const noexcept { return corrupt_.load(); }

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> corrupt_{0};
};

/// The three-stage cascade: Hindi audio -> Hindi text -> English text -> English audio.
class Pipeline {
 public:
  /// Loads the configured backends (checkpoints resolve lazily through `hub`).
  explicit Pipeline(PipelineConfig config, std::shared_ptr<stages::HubClient> hub = nullptr);
  Pipeline(PipelineConfig config, std::shared_ptr<stages::AsrBackend> asr, std::shared_ptr<stages::NmtBackend> nmt,
           std::shared_ptr<stages::TtsBackend> tts);

  PipelineResult run(const audio::AudioClip& input, std::optional<std::string> voice_prompt = std::nullopt) const;
  PipelineResult run_cached(const audio::AudioClip& input, StageCache& cache,
                            std::optional<std::string> voice_prompt = std::nullopt) const;

  /// The ASR leg alone: canonicalise, window, transcribe. Throws InputError on
  /// empty input and StageError on backend failure.
  stages::Transcript transcribe(const audio::AudioClip& input) const;
  /// `voice`, else the configured prompt, else the registry's first entry.
  stages::VoicePrompt resolve_voice(const std::optional<std::string>& voice) const;

  const PipelineConfig& config() const noexcept { return config_; }
  stages::AsrBackend& asr() const { return *asr_; }
  stages::NmtBackend& nmt() const { return *nmt_; }
  stages::TtsBackend& tts() const { return *tts_; }

 private:
  PipelineResult execute(const audio::AudioClip& input, StageCache* cache, std::optional<std::string> voice) const;

  PipelineConfig config_;
  std::shared_ptr<stages::AsrBackend> asr_;
  std::shared_ptr<stages::NmtBackend> nmt_;
  std::shared_ptr<stages::TtsBackend> tts_;
};

PipelineResult run(const PipelineConfig& config, const audio::AudioClip& input,
                   std::shared_ptr<stages::HubClient> hub = nullptr);
PipelineResult run_cached(const PipelineConfig& config, const audio::AudioClip& input, StageCache& cache,
                          std::shared_ptr<stages::HubClient> hub = nullptr);

/// Fields that are a pure function of config and input: texts, stage
/// provenance, input digest and a description of the output audio. This is
/// the sidecar written next to the output WAV.
nlohmann::ordered_json result_to_json(const PipelineResult& result);

/// Wall-clock timings and cache flags of one run.
nlohmann::ordered_json run_info_to_json(const PipelineResult& result);

/// {"error": {"stage", "backend_id", "message", "partial": {...}}}
nlohmann::ordered_json error_to_json(const PipelineError& error);

}  // namespace s2st::pipeline
