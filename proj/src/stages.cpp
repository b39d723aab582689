#include "s2st/stages.hpp"

#include <chrono>

#include "checkpoint_backends.hpp"
#include "s2st/mock_backends.hpp"
#include "s2st/textnorm.hpp"

namespace s2st::stages {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string registry_listing(const std::vector<VoicePrompt>& voices) {
  std::string out;
  for (const auto& v : voices) {
    if (!out.empty()) out += ", ";
    out += v.prompt_id;
  }
  return out;
}

}  // namespace

std::string_view to_string(StageKind kind) noexcept {
  switch (kind) {
    case StageKind::asr: return "asr";
    case StageKind::nmt: return "nmt";
    case StageKind::tts: return "tts";
  }
  return "asr";
}

std::optional<StageKind> parse_stage_kind(std::string_view name) noexcept {
  if (name == "asr") return StageKind::asr;
  if (name == "nmt") return StageKind::nmt;
  if (name == "tts") return StageKind::tts;
  return std::nullopt;
}

BackendDescriptor default_descriptor(StageKind kind) {
  switch (kind) {
    case StageKind::asr: return {kind, std::string(kDefaultAsrModel), false, {}};
    case StageKind::nmt:
      return {kind, std::string(kDefaultNmtModel), false, {{"source_code", "hi_IN"}, {"target_code", "en_XX"}}};
    case StageKind::tts: return {kind, std::string(kDefaultTtsModel), false, {}};
  }
  return {};
}

const std::vector<VoicePrompt>& english_voice_registry() {
  static const std::vector<VoicePrompt> registry = [] {
    std::vector<VoicePrompt> r;
    for (int i = 0; i < 10; ++i) {
      r.push_back({"v2/en_speaker_" + std::to_string(i), "en", "English speaker " + std::to_string(i)});
    }
    return r;
  }();
  return registry;
}

StageError::StageError(StageKind stage, std::string backend_id, std::string cause)
    : std::runtime_error(std::string(to_string(stage)) + " stage (" + backend_id + "): " + cause),
      stage_(stage),
      backend_id_(std::move(backend_id)),
      cause_(std::move(cause)) {}

Transcript transcribe(AsrBackend& backend, const audio::AudioClip& clip) {
  if (clip.channels() != 1) {
    throw ContractViolation("ASR input must be mono, got " + std::to_string(clip.channels()) + " channels");
  }
  if (clip.sample_rate() != backend.input_rate()) {
    throw ContractViolation("ASR input must be " + std::to_string(backend.input_rate()) + " Hz, got " +
                            std::to_string(clip.sample_rate()) + " Hz");
  }
  Transcript out;
  out.backend_id = backend.id();
  auto start = Clock::now();
  try {
    auto guard = backend.call_guard();
    out.text = text::normalize_hindi(backend.recognize(clip));
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(StageKind::asr, backend.id(), e.what());
  }
  out.elapsed = seconds_since(start);
  return out;
}

Translation translate(NmtBackend& backend, std::string_view text, std::string_view source,
                      std::string_view target) {
  if (!backend.supports(source, target)) {
    throw StageError(StageKind::nmt, backend.id(),
                     "unsupported language pair " + std::string(source) + "->" + std::string(target));
  }
  Translation out;
  out.source_language = source;
  out.target_language = target;
  out.backend_id = backend.id();
  const std::string input = source == "en" ? text::normalize_english(text) : text::normalize_hindi(text);
  if (input.empty()) return out;

  auto start = Clock::now();
  try {
    auto guard = backend.call_guard();
    out.text = backend.translate_text(input, source, target);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(StageKind::nmt, backend.id(), e.what());
  }
  out.elapsed = seconds_since(start);
  return out;
}

VoicePrompt find_voice_prompt(const TtsBackend& backend, std::string_view prompt_id) {
  auto voices = backend.voice_prompts();
  for (const auto& v : voices) {
    if (v.prompt_id == prompt_id) return v;
  }
  throw StageError(StageKind::tts, backend.id(),
                   "unknown voice prompt '" + std::string(prompt_id) + "'; available: " + registry_listing(voices));
}

audio::AudioClip synthesize(TtsBackend& backend, std::string_view text, const VoicePrompt& prompt) {
  VoicePrompt known = find_voice_prompt(backend, prompt.prompt_id);
  if (text::split_words(text).empty()) {
    throw StageError(StageKind::tts, backend.id(), "nothing to synthesize: input text is empty");
  }
  audio::AudioClip clip;
  try {
    auto guard = backend.call_guard();
    clip = backend.generate(text, known);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(StageKind::tts, backend.id(), e.what());
  }
  if (clip.empty()) throw StageError(StageKind::tts, backend.id(), "backend produced no audio");
  if (clip.sample_rate() != backend.output_rate()) {
    throw StageError(StageKind::tts, backend.id(),
                     "backend produced " + std::to_string(clip.sample_rate()) + " Hz audio, declared " +
                         std::to_string(backend.output_rate()) + " Hz");
  }
  return clip;
}

audio::AudioClip synthesize(TtsBackend& backend, std::string_view text, std::string_view prompt_id) {
  return synthesize(backend, text, find_voice_prompt(backend, prompt_id));
}

std::vector<VoicePrompt> list_voice_prompts(const TtsBackend& backend) { return backend.voice_prompts(); }

std::optional<StageKind> known_stage_of(std::string_view model_id) {
  if (model_id == kMockAsrId) return StageKind::asr;
  if (model_id == kMockNmtId) return StageKind::nmt;
  if (model_id == kMockTtsId) return StageKind::tts;
  if (model_id == kDefaultAsrModel || model_id == "facebook/wav2vec2-large-xlsr-53") return StageKind::asr;
  if (model_id == kDefaultNmtModel || model_id == "facebook/mbart-large-50-many-to-one-mmt") return StageKind::nmt;
  if (model_id == kDefaultTtsModel || model_id == "suno/bark") return StageKind::tts;
  return std::nullopt;
}

std::shared_ptr<Backend> load_backend(const BackendDescriptor& descriptor, std::shared_ptr<HubClient> hub) {
  const auto& id = descriptor.model_id;
  const bool mock = id.starts_with("mock:");
  auto known = known_stage_of(id);
  if (mock && !known) throw BackendError("unknown model id '" + id + "'");
  if (known && *known != descriptor.stage_kind) {
    throw BackendError("stage kind mismatch: '" + id + "' is a " + std::string(to_string(*known)) +
                       " backend, descriptor declares " + std::string(to_string(descriptor.stage_kind)));
  }
  if (mock) {
    try {
      switch (descriptor.stage_kind) {
        case StageKind::asr: return MockAsr::from_descriptor(descriptor);
        case StageKind::nmt: return MockNmt::from_descriptor(descriptor);
        case StageKind::tts: return MockTts::from_descriptor(descriptor);
      }
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError("mock fixture for '" + id + "' is malformed: " + e.what());
    }
  }
  // Checkpoint ids look like "org/name".
  auto slash = id.find('/');
  if (id.empty() || slash == std::string::npos || slash == 0 || slash + 1 == id.size() ||
      id.find('/', slash + 1) != std::string::npos || id.find(' ') != std::string::npos) {
    throw BackendError("unknown model id '" + id + "'");
  }
  if (!hub) throw BackendError("checkpoint '" + id + "' needs a model hub client");
  return make_checkpoint_backend(descriptor, std::move(hub));
}

namespace {
template <typename T>
std::shared_ptr<T> load_typed(const BackendDescriptor& d, std::shared_ptr<HubClient> hub, StageKind kind) {
  if (d.stage_kind != kind) {
    throw BackendError("expected a " + std::string(to_string(kind)) + " descriptor, got " +
                       std::string(to_string(d.stage_kind)));
  }
  auto b = std::dynamic_pointer_cast<T>(load_backend(d, std::move(hub)));
  if (!b) throw BackendError("backend '" + d.model_id + "' does not implement the " + std::string(to_string(kind)) + " stage");
  return b;
}
}  // namespace

std::shared_ptr<AsrBackend> load_asr(const BackendDescriptor& d, std::shared_ptr<HubClient> hub) {
  return load_typed<AsrBackend>(d, std::move(hub), StageKind::asr);
}
std::shared_ptr<NmtBackend> load_nmt(const BackendDescriptor& d, std::shared_ptr<HubClient> hub) {
  return load_typed<NmtBackend>(d, std::move(hub), StageKind::nmt);
}
std::shared_ptr<TtsBackend> load_tts(const BackendDescriptor& d, std::shared_ptr<HubClient> hub) {
  return load_typed<TtsBackend>(d, std::move(hub), StageKind::tts);
}

}  // namespace s2st::stages
