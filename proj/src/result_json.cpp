#include "s2st/pipeline.hpp"
#include "s2st/util.hpp"

namespace s2st::pipeline {

namespace {

nlohmann::ordered_json transcript_json(const stages::Transcript& t) {
  nlohmann::ordered_json j;
  j["text"] = t.text;
  j["language"] = t.language;
  j["backend_id"] = t.backend_id;
  return j;
}

nlohmann::ordered_json translation_json(const stages::Translation& t) {
  nlohmann::ordered_json j;
  j["text"] = t.text;
  j["source_language"] = t.source_language;
  j["target_language"] = t.target_language;
  j["backend_id"] = t.backend_id;
  return j;
}

}  // namespace

nlohmann::ordered_json result_to_json(const PipelineResult& r) {
  nlohmann::ordered_json j;
  j["input_digest"] = r.input_digest;
  j["hindi_text"] = transcript_json(r.hindi_text);
  j["english_text"] = translation_json(r.english_text);
  j["voice_prompt"] = r.voice_prompt;
  nlohmann::ordered_json a;
  a["sample_rate"] = r.english_audio.sample_rate();
  a["channels"] = r.english_audio.channels();
  a["frames"] = r.english_audio.frames();
  a["duration_seconds"] = audio::duration_seconds(r.english_audio);
  a["wav_sha256"] = sha256_hex(audio::encode_wav_pcm16(r.english_audio));
  j["english_audio"] = a;
  return j;
}

nlohmann::ordered_json run_info_to_json(const PipelineResult& r) {
  static constexpr const char* names[] = {"asr", "nmt", "tts"};
  nlohmann::ordered_json j;
  nlohmann::ordered_json timings, hits;
  for (std::size_t i = 0; i < 3; ++i) {
    timings[names[i]] = r.stage_timings[i];
    hits[names[i]] = r.cache_hits[i];
  }
  j["timings"] = timings;
  j["cache_hits"] = hits;
  return j;
}

nlohmann::ordered_json error_to_json(const PipelineError& e) {
  nlohmann::ordered_json err;
  err["stage"] = stages::to_string(e.stage());
  err["backend_id"] = e.backend_id();
  err["message"] = e.cause();
  nlohmann::ordered_json partial = nlohmann::ordered_json::object();
  if (e.hindi_text()) partial["hindi_text"] = transcript_json(*e.hindi_text());
  if (e.english_text()) partial["english_text"] = translation_json(*e.english_text());
  err["partial"] = partial;
  nlohmann::ordered_json j;
  j["error"] = err;
  return j;
}

}  // namespace s2st::pipeline
