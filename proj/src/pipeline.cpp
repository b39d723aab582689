#include "s2st/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <set>

#include "s2st/textnorm.hpp"
#include "s2st/util.hpp"

namespace s2st::pipeline {

using stages::StageKind;

namespace {

std::string json_scalar_to_string(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

stages::BackendDescriptor descriptor_from_json(const nlohmann::json& j, StageKind slot,
                                               const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError(std::string(stages::to_string(slot)) + ": descriptor must be an object");
  static const std::set<std::string> allowed = {"stage_kind", "model_id", "concurrent_safe", "parameters"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) {
      throw ConfigError(std::string(stages::to_string(slot)) + ": unknown field '" + it.key() + "'");
    }
  }
  stages::BackendDescriptor d = stages::default_descriptor(slot);
  if (j.contains("stage_kind")) {
    auto kind = stages::parse_stage_kind(j["stage_kind"].get<std::string>());
    if (!kind) throw ConfigError(std::string(stages::to_string(slot)) + ".stage_kind: unknown stage kind");
    d.stage_kind = *kind;
  }
  if (j.contains("model_id")) {
    d.model_id = j["model_id"].get<std::string>();
    if (d.model_id != stages::default_descriptor(slot).model_id) d.parameters.clear();
  }
  if (j.contains("concurrent_safe")) d.concurrent_safe = j["concurrent_safe"].get<bool>();
  if (j.contains("parameters")) {
    for (auto it = j["parameters"].begin(); it != j["parameters"].end(); ++it) {
      d.parameters[it.key()] = json_scalar_to_string(it.value());
    }
  }
  if (auto it = d.parameters.find("fixture"); it != d.parameters.end() && !it->second.empty()) {
    std::filesystem::path p(it->second);
    if (p.is_relative() && !base_dir.empty()) it->second = (base_dir / p).lexically_normal().string();
  }
  return d;
}

nlohmann::ordered_json descriptor_to_json(const stages::BackendDescriptor& d) {
  nlohmann::ordered_json j;
  j["stage_kind"] = stages::to_string(d.stage_kind);
  j["model_id"] = d.model_id;
  j["concurrent_safe"] = d.concurrent_safe;
  j["parameters"] = d.parameters;
  return j;
}

std::map<std::string, std::string> with_params(std::map<std::string, std::string> base,
                                               std::initializer_list<std::pair<const std::string, std::string>> extra) {
  for (const auto& [k, v] : extra) base["pipeline." + k] = v;
  return base;
}

nlohmann::json clip_payload(const audio::AudioClip& clip) {
  std::string raw;
  raw.reserve(clip.samples().size() * 4);
  for (float s : clip.samples()) {
    std::uint32_t bits;
    std::memcpy(&bits, &s, 4);
    for (int k = 0; k < 4; ++k) raw.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
  }
  return {{"sample_rate", clip.sample_rate()},
          {"channels", clip.channels()},
          {"samples_f32le", base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()))}};
}

audio::AudioClip clip_from_payload(const nlohmann::json& j) {
  auto raw = base64_decode(j.at("samples_f32le").get<std::string>());
  if (raw.size() % 4 != 0) throw std::runtime_error("sample payload is not float32");
  std::vector<float> samples(raw.size() / 4);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(raw[4 * i + static_cast<std::size_t>(k)]) << (8 * k);
    std::memcpy(&samples[i], &bits, 4);
  }
  return audio::AudioClip(std::move(samples), j.at("sample_rate").get<int>(), j.at("channels").get<int>());
}

std::string digest_of_text(const std::string& text) { return sha256_hex(text); }

}  // namespace

void PipelineConfig::validate() const {
  if (asr.stage_kind != StageKind::asr) throw ConfigError("asr slot holds a " + std::string(stages::to_string(asr.stage_kind)) + " descriptor");
  if (nmt.stage_kind != StageKind::nmt) throw ConfigError("nmt slot holds a " + std::string(stages::to_string(nmt.stage_kind)) + " descriptor");
  if (tts.stage_kind != StageKind::tts) throw ConfigError("tts slot holds a " + std::string(stages::to_string(tts.stage_kind)) + " descriptor");
  if (canonical_rate <= 0) throw ConfigError("canonical_rate must be > 0");
}

std::filesystem::path default_stage_cache_dir() {
  if (const char* env = std::getenv("S2ST_STAGE_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return std::filesystem::path(xdg) / "s2st" / "stages";
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::filesystem::path(home) / ".cache" / "s2st" / "stages";
  }
  return std::filesystem::temp_directory_path() / "s2st-stages";
}

PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  static const std::set<std::string> allowed = {"asr", "nmt", "tts", "voice_prompt", "cache_enabled",
                                                "canonical_rate", "cache_dir"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) throw ConfigError("unknown config field '" + it.key() + "'");
  }
  PipelineConfig c;
  try {
    if (j.contains("asr")) c.asr = descriptor_from_json(j["asr"], StageKind::asr, base_dir);
    if (j.contains("nmt")) c.nmt = descriptor_from_json(j["nmt"], StageKind::nmt, base_dir);
    if (j.contains("tts")) c.tts = descriptor_from_json(j["tts"], StageKind::tts, base_dir);
    c.voice_prompt = j.value("voice_prompt", std::string());
    c.cache_enabled = j.value("cache_enabled", true);
    c.canonical_rate = j.value("canonical_rate", audio::kCanonicalRate);
    if (j.contains("cache_dir")) {
      std::filesystem::path p(j["cache_dir"].get<std::string>());
      c.cache_dir = p.is_relative() && !base_dir.empty() ? (base_dir / p).lexically_normal() : p;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["asr"] = descriptor_to_json(c.asr);
  j["nmt"] = descriptor_to_json(c.nmt);
  j["tts"] = descriptor_to_json(c.tts);
  j["voice_prompt"] = c.voice_prompt;
  j["cache_enabled"] = c.cache_enabled;
  j["canonical_rate"] = c.canonical_rate;
  if (!c.cache_dir.empty()) j["cache_dir"] = c.cache_dir.string();
  return j;
}

PipelineError::PipelineError(StageKind stage, std::string backend_id, std::string cause,
                             std::optional<stages::Transcript> hindi_text,
                             std::optional<stages::Translation> english_text)
    : std::runtime_error(std::string(stages::to_string(stage)) + " stage failed (" + backend_id + "): " + cause),
      stage_(stage),
      backend_id_(std::move(backend_id)),
      cause_(std::move(cause)),
      hindi_text_(std::move(hindi_text)),
      english_text_(std::move(english_text)) {}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<stages::HubClient> hub) : config_(std::move(config)) {
  config_.validate();
  asr_ = stages::load_asr(config_.asr, hub);
  nmt_ = stages::load_nmt(config_.nmt, hub);
  tts_ = stages::load_tts(config_.tts, hub);
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<stages::AsrBackend> asr,
                   std::shared_ptr<stages::NmtBackend> nmt, std::shared_ptr<stages::TtsBackend> tts)
    : config_(std::move(config)), asr_(std::move(asr)), nmt_(std::move(nmt)), tts_(std::move(tts)) {
  config_.validate();
  if (!asr_ || !nmt_ || !tts_) throw ConfigError("pipeline needs all three backends");
}

PipelineResult Pipeline::run(const audio::AudioClip& input, std::optional<std::string> voice) const {
  return execute(input, nullptr, std::move(voice));
}

PipelineResult Pipeline::run_cached(const audio::AudioClip& input, StageCache& cache,
                                    std::optional<std::string> voice) const {
  return execute(input, &cache, std::move(voice));
}

stages::VoicePrompt Pipeline::resolve_voice(const std::optional<std::string>& voice) const {
  const std::string id = voice.value_or(config_.voice_prompt);
  if (!id.empty()) return stages::find_voice_prompt(*tts_, id);
  auto voices = stages::list_voice_prompts(*tts_);
  if (voices.empty()) throw stages::StageError(StageKind::tts, tts_->id(), "voice registry is empty");
  return voices.front();
}

stages::Transcript Pipeline::transcribe(const audio::AudioClip& input) const {
  if (input.empty()) throw InputError("input audio is empty");
  const audio::AudioClip canonical = audio::canonicalize(input, config_.canonical_rate);
  if (audio::duration_seconds(canonical) <= kWindowSeconds) return stages::transcribe(*asr_, canonical);
  stages::Transcript joined;
  joined.backend_id = asr_->id();
  for (const auto& window : audio::split_windows(canonical, kWindowSeconds)) {
    auto part = stages::transcribe(*asr_, window);
    joined.elapsed += part.elapsed;
    if (part.text.empty()) continue;
    if (!joined.text.empty()) joined.text.push_back(' ');
    joined.text += part.text;
  }
  return joined;
}

PipelineResult Pipeline::execute(const audio::AudioClip& input, StageCache* cache,
                                 std::optional<std::string> voice_override) const {
  if (input.empty()) throw InputError("input audio is empty");

  PipelineResult result;
  stages::VoicePrompt voice;
  try {
    voice = resolve_voice(voice_override);
  } catch (const stages::StageError& e) {
    throw PipelineError(StageKind::tts, e.backend_id(), e.cause(), std::nullopt, std::nullopt);
  }
  result.voice_prompt = voice.prompt_id;
  result.input_digest = audio::fingerprint(input);

  // ASR
  const std::string asr_key =
      cache_key("asr", asr_->id(), result.input_digest,
                with_params(asr_->descriptor().parameters,
                            {{"canonical_rate", std::to_string(config_.canonical_rate)},
                             {"window_seconds", std::to_string(static_cast<int>(kWindowSeconds))}}));
  bool have = false;
  if (cache) {
    if (auto hit = cache->get(asr_key, StageKind::asr)) {
      try {
        result.hindi_text.text = hit->at("text").get<std::string>();
        result.hindi_text.language = hit->at("language").get<std::string>();
        result.hindi_text.backend_id = hit->at("backend_id").get<std::string>();
        have = true;
      } catch (const std::exception&) {
        cache->evict(asr_key);
      }
    }
  }
  result.cache_hits[kAsr] = have;
  if (!have) {
    try {
      result.hindi_text = transcribe(input);
    } catch (const stages::StageError& e) {
      throw PipelineError(StageKind::asr, e.backend_id(), e.cause(), std::nullopt, std::nullopt);
    }
    result.stage_timings[kAsr] = result.hindi_text.elapsed;
    if (cache) {
      cache->put(asr_key, StageKind::asr,
                 {{"text", result.hindi_text.text},
                  {"language", result.hindi_text.language},
                  {"backend_id", result.hindi_text.backend_id}});
    }
  }

  // NMT
  const std::string nmt_key =
      cache_key("nmt", nmt_->id(), digest_of_text(result.hindi_text.text),
                with_params(nmt_->descriptor().parameters, {{"source_language", "hi"}, {"target_language", "en"}}));
  have = false;
  if (cache) {
    if (auto hit = cache->get(nmt_key, StageKind::nmt)) {
      try {
        result.english_text.text = hit->at("text").get<std::string>();
        result.english_text.source_language = hit->at("source_language").get<std::string>();
        result.english_text.target_language = hit->at("target_language").get<std::string>();
        result.english_text.backend_id = hit->at("backend_id").get<std::string>();
        have = true;
      } catch (const std::exception&) {
        cache->evict(nmt_key);
      }
    }
  }
  result.cache_hits[kNmt] = have;
  if (!have) {
    try {
      result.english_text = stages::translate(*nmt_, result.hindi_text.text, "hi", "en");
    } catch (const stages::StageError& e) {
      throw PipelineError(StageKind::nmt, e.backend_id(), e.cause(), result.hindi_text, std::nullopt);
    }
    result.stage_timings[kNmt] = result.english_text.elapsed;
    if (cache) {
      cache->put(nmt_key, StageKind::nmt,
                 {{"text", result.english_text.text},
                  {"source_language", result.english_text.source_language},
                  {"target_language", result.english_text.target_language},
                  {"backend_id", result.english_text.backend_id}});
    }
  }

  // TTS
  const std::string tts_key =
      cache_key("tts", tts_->id(), digest_of_text(result.english_text.text),
                with_params(tts_->descriptor().parameters, {{"voice_prompt", voice.prompt_id}}));
  have = false;
  if (cache) {
    if (auto hit = cache->get(tts_key, StageKind::tts)) {
      try {
        result.english_audio = clip_from_payload(*hit);
        have = true;
      } catch (const std::exception&) {
        cache->evict(tts_key);
      }
    }
  }
  result.cache_hits[kTts] = have;
  if (!have) {
    try {
      auto start = std::chrono::steady_clock::now();
      result.english_audio = stages::synthesize(*tts_, result.english_text.text, voice);
      result.stage_timings[kTts] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } catch (const stages::StageError& e) {
      throw PipelineError(StageKind::tts, e.backend_id(), e.cause(), result.hindi_text, result.english_text);
    }
    if (cache) cache->put(tts_key, StageKind::tts, clip_payload(result.english_audio));
  }
  return result;
}

PipelineResult run(const PipelineConfig& config, const audio::AudioClip& input,
                   std::shared_ptr<stages::HubClient> hub) {
  return Pipeline(config, std::move(hub)).run(input);
}

PipelineResult run_cached(const PipelineConfig& config, const audio::AudioClip& input, StageCache& cache,
                          std::shared_ptr<stages::HubClient> hub) {
  if (!config.cache_enabled) throw ConfigError("run_cached requires cache_enabled");
  return Pipeline(config, std::move(hub)).run_cached(input, cache);
}

}  // namespace s2st::pipeline
