// Adapters for real checkpoints. Inference runs in a Python worker process
// (tools/hf_worker.py) that loads the model from the hub cache directory and
// answers line-delimited JSON requests.

#include "checkpoint_backends.hpp"

#include "s2st/util.hpp"
#include "worker_process.hpp"

namespace s2st::stages {

namespace {

class LazyWorker {
 public:
  LazyWorker(BackendDescriptor descriptor, std::shared_ptr<HubClient> hub)
      : descriptor_(std::move(descriptor)), hub_(std::move(hub)) {}

  std::filesystem::path model_path() {
    std::call_once(resolved_, [this] { path_ = hub_->resolve(descriptor_.model_id); });
    return path_;
  }

  nlohmann::json request(const nlohmann::json& message) {
    std::lock_guard lock(mutex_);
    if (!worker_) {
      auto dir = model_path();
      auto w = std::make_unique<detail::WorkerProcess>(
          std::vector<std::string>{detail::python_executable(), detail::worker_script(), "serve"});
      nlohmann::json load = {{"op", "load"},
                             {"stage", std::string(to_string(descriptor_.stage_kind))},
                             {"model_id", descriptor_.model_id},
                             {"model_dir", dir.string()},
                             {"parameters", descriptor_.parameters}};
      w->request(load);
      worker_ = std::move(w);
    }
    return worker_->request(message);
  }

 private:
  BackendDescriptor descriptor_;
  std::shared_ptr<HubClient> hub_;
  std::once_flag resolved_;
  std::filesystem::path path_;
  std::mutex mutex_;
  std::unique_ptr<detail::WorkerProcess> worker_;
};

std::string param(const BackendDescriptor& d, const std::string& key, std::string fallback) {
  auto it = d.parameters.find(key);
  return it == d.parameters.end() ? fallback : it->second;
}

class CheckpointAsr : public AsrBackend, public CheckpointBacked {
 public:
  CheckpointAsr(const BackendDescriptor& d, std::shared_ptr<HubClient> hub) : AsrBackend(d), worker_(d, std::move(hub)) {}

  std::filesystem::path model_path() override { return worker_.model_path(); }

  std::string recognize(const audio::AudioClip& clip) override {
    auto wav = audio::encode_wav_pcm16(clip);
    auto reply = worker_.request({{"op", "transcribe"}, {"wav_b64", base64_encode(wav)}});
    return reply.at("text").get<std::string>();
  }

 private:
  LazyWorker worker_;
};

class CheckpointNmt : public NmtBackend, public CheckpointBacked {
 public:
  CheckpointNmt(const BackendDescriptor& d, std::shared_ptr<HubClient> hub)
      : NmtBackend(d),
        worker_(d, std::move(hub)),
        source_code_(param(d, "source_code", "hi_IN")),
        target_code_(param(d, "target_code", "en_XX")) {}

  std::filesystem::path model_path() override { return worker_.model_path(); }

  std::string translate_text(std::string_view text, std::string_view, std::string_view) override {
    auto reply = worker_.request({{"op", "translate"},
                                  {"text", std::string(text)},
                                  {"source_code", source_code_},
                                  {"target_code", target_code_}});
    return reply.at("text").get<std::string>();
  }

 private:
  LazyWorker worker_;
  std::string source_code_;
  std::string target_code_;
};

class CheckpointTts : public TtsBackend, public CheckpointBacked {
 public:
  CheckpointTts(const BackendDescriptor& d, std::shared_ptr<HubClient> hub) : TtsBackend(d), worker_(d, std::move(hub)) {}

  std::filesystem::path model_path() override { return worker_.model_path(); }

  audio::AudioClip generate(std::string_view text, const VoicePrompt& prompt) override {
    auto reply = worker_.request({{"op", "synthesize"}, {"text", std::string(text)}, {"voice", prompt.prompt_id}});
    auto bytes = base64_decode(reply.at("wav_b64").get<std::string>());
    auto clip = audio::to_mono(audio::decode_audio(bytes));
    if (clip.sample_rate() != output_rate()) clip = audio::resample(clip, output_rate());
    return clip.with_source_digest(std::nullopt);
  }

 private:
  LazyWorker worker_;
};

}  // namespace

std::shared_ptr<Backend> make_checkpoint_backend(const BackendDescriptor& descriptor, std::shared_ptr<HubClient> hub) {
  switch (descriptor.stage_kind) {
    case StageKind::asr: return std::make_shared<CheckpointAsr>(descriptor, std::move(hub));
    case StageKind::nmt: return std::make_shared<CheckpointNmt>(descriptor, std::move(hub));
    case StageKind::tts: return std::make_shared<CheckpointTts>(descriptor, std::move(hub));
  }
  throw BackendError("unknown stage kind");
}

}  // namespace s2st::stages
