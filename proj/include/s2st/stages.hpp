#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "s2st/audio_io.hpp"

namespace s2st::stages {

enum class StageKind { asr, nmt, tts };

std::string_view to_string(StageKind kind) noexcept;
std::optional<StageKind> parse_stage_kind(std::string_view name) noexcept;

struct BackendDescriptor {
  StageKind stage_kind = StageKind::asr;
  std::string model_id;  // checkpoint id ("org/name") or "mock:*"
  bool concurrent_safe = false;
  std::map<std::string, std::string> parameters;

  bool operator==(const BackendDescriptor&) const = default;
};

/// Default checkpoints per stage.
BackendDescriptor default_descriptor(StageKind kind);

inline constexpr std::string_view kDefaultAsrModel = "Aniket-Tathe-08/XLSR-Wav2Vec2-Finetuned";
inline constexpr std::string_view kDefaultNmtModel = "facebook/mbart-large-50-many-to-many-mmt";
inline constexpr std::string_view kDefaultTtsModel = "suno/bark-small";
inline constexpr int kTtsOutputRate = 24000;

struct Transcript {
  std::string text;  // normalised Hindi
  std::string language = "hi";
  std::string backend_id;
  double elapsed = 0.0;
};

struct Translation {
  std::string text;
  std::string source_language = "hi";
  std::string target_language = "en";
  std::string backend_id;
  double elapsed = 0.0;
};

struct VoicePrompt {
  std::string prompt_id;  // value handed to the TTS model's history_prompt
  std::string language = "en";
  std::string display_name;

  bool operator==(const VoicePrompt&) const = default;
};

/// The ten English speaker presets of the Bark checkpoint family, in order.
const std::vector<VoicePrompt>& english_voice_registry();

/// A stage call failed. Carries which stage and backend, and the cause.
class StageError : public std::runtime_error {
 public:
  StageError(StageKind stage, std::string backend_id, std::string cause);

  StageKind stage() const noexcept { return stage_; }
  const std::string& backend_id() const noexcept { return backend_id_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  StageKind stage_;
  std::string backend_id_;
  std::string cause_;
};

/// Backend could not be constructed or loaded (unknown model id, stage kind
/// mismatch, hub failure).
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a stage precondition the orchestrator is meant to guarantee.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Backend {
 public:
  explicit Backend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendDescriptor& descriptor() const noexcept { return descriptor_; }
  const std::string& id() const noexcept { return descriptor_.model_id; }

  /// Held around every inference call. Locks only for backends that are not
  /// concurrent_safe.
  std::unique_lock<std::mutex> call_guard() {
    return descriptor_.concurrent_safe ? std::unique_lock<std::mutex>() : std::unique_lock(call_mutex_);
  }

 private:
  BackendDescriptor descriptor_;
  std::mutex call_mutex_;
};

class AsrBackend : public Backend {
 public:
  using Backend::Backend;
  virtual int input_rate() const { return audio::kCanonicalRate; }
  virtual std::string recognize(const audio::AudioClip& clip) = 0;
};

class NmtBackend : public Backend {
 public:
  using Backend::Backend;
  virtual bool supports(std::string_view source, std::string_view target) const {
    return source == "hi" && target == "en";
  }
  virtual std::string translate_text(std::string_view text, std::string_view source, std::string_view target) = 0;
};

class TtsBackend : public Backend {
 public:
  using Backend::Backend;
  virtual int output_rate() const { return kTtsOutputRate; }
  virtual std::vector<VoicePrompt> voice_prompts() const { return english_voice_registry(); }
  virtual audio::AudioClip generate(std::string_view text, const VoicePrompt& prompt) = 0;
};

/// Implemented by backends that run a downloaded checkpoint.
class CheckpointBacked {
 public:
  virtual ~CheckpointBacked() = default;
  /// Resolves the checkpoint through the hub on first use; later calls reuse it.
  virtual std::filesystem::path model_path() = 0;
};

/// Runs ASR on a mono clip at the backend's rate; the text is normalised.
Transcript transcribe(AsrBackend& backend, const audio::AudioClip& clip);

/// Empty (after normalisation) input returns an empty Translation without
/// calling the backend.
Translation translate(NmtBackend& backend, std::string_view text, std::string_view source = "hi",
                      std::string_view target = "en");

audio::AudioClip synthesize(TtsBackend& backend, std::string_view text, const VoicePrompt& prompt);
audio::AudioClip synthesize(TtsBackend& backend, std::string_view text, std::string_view prompt_id);

std::vector<VoicePrompt> list_voice_prompts(const TtsBackend& backend);

/// Looks `prompt_id` up in the backend's registry; StageError listing the
/// registry when absent.
VoicePrompt find_voice_prompt(const TtsBackend& backend, std::string_view prompt_id);

/// Remote side of the model hub: downloads a checkpoint into a directory.
class ModelFetcher {
 public:
  virtual ~ModelFetcher() = default;
  virtual void fetch(const std::string& model_id, const std::filesystem::path& destination) = 0;
};

/// Fetcher backed by the huggingface_hub Python package.
std::shared_ptr<ModelFetcher> make_python_fetcher();

/// Resolves checkpoint ids to local directories through an on-disk cache.
/// Each snapshot directory is named by the SHA-256 of the model id and holds a
/// manifest of per-file SHA-256 digests written after a complete fetch.
class HubClient {
 public:
  HubClient(std::filesystem::path cache_root, std::shared_ptr<ModelFetcher> fetcher, bool offline = false);

  /// $S2ST_MODEL_CACHE, else $XDG_CACHE_HOME/s2st/models, else ~/.cache/s2st/models.
  static std::filesystem::path default_cache_root();
  /// Default root and fetcher; offline when $S2ST_OFFLINE is set to a non-empty value other than "0".
  static std::shared_ptr<HubClient> from_environment();

  std::filesystem::path resolve(const std::string& model_id);
  bool cached(const std::string& model_id) const;
  std::size_t fetch_count() const noexcept { return fetches_.load(); }
  bool offline() const noexcept { return offline_; }
  const std::filesystem::path& cache_root() const noexcept { return root_; }

 private:
  std::filesystem::path snapshot_dir(const std::string& model_id) const;

  std::filesystem::path root_;
  std::shared_ptr<ModelFetcher> fetcher_;
  bool offline_;
  std::atomic<std::size_t> fetches_{0};
  std::mutex mutex_;
};

/// Creates a backend. mock:* ids never touch the hub. Checkpoint backends
/// defer hub resolution and model start-up to their first inference.
std::shared_ptr<Backend> load_backend(const BackendDescriptor& descriptor, std::shared_ptr<HubClient> hub);

std::shared_ptr<AsrBackend> load_asr(const BackendDescriptor& descriptor, std::shared_ptr<HubClient> hub);
std::shared_ptr<NmtBackend> load_nmt(const BackendDescriptor& descriptor, std::shared_ptr<HubClient> hub);
std::shared_ptr<TtsBackend> load_tts(const BackendDescriptor& descriptor, std::shared_ptr<HubClient> hub);

/// Stage a model id belongs to, when the id is a known mock or checkpoint.
std::optional<StageKind> known_stage_of(std::string_view model_id);

}  // namespace s2st::stages
