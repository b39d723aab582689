#include "s2st/finetune.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "s2st/audio_io.hpp"
#include "s2st/metrics.hpp"
#include "s2st/util.hpp"
#include "worker_process.hpp"

namespace s2st::finetune {

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

void check_phase(const std::string& prefix, int epochs, double lr, double wd, std::vector<std::string>& problems) {
  if (epochs <= 0) problems.push_back(prefix + "epochs must be > 0");
  if (!(lr > 0) || !std::isfinite(lr)) problems.push_back(prefix + "learning_rate must be > 0");
  if (!(wd >= 0) || !std::isfinite(wd)) problems.push_back(prefix + "weight_decay must be >= 0");
}

// Clip ids become file names; anything unusual is replaced by its digest.
std::string file_stem_for(const std::string& clip_id) {
  bool plain = !clip_id.empty() && clip_id.size() <= 128 && clip_id != "." && clip_id != "..";
  for (char c : clip_id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) plain = false;
  }
  return plain ? clip_id : sha256_hex(clip_id);
}

}  // namespace

std::vector<TrainingPhase> TrainingConfig::schedule() const {
  if (!phases.empty()) return phases;
  return {{epochs, learning_rate, weight_decay}};
}

TrainingConfigError::TrainingConfigError(std::vector<std::string> problems)
    : std::invalid_argument("invalid training config: " + join(problems, "; ")), problems_(std::move(problems)) {}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"paper-60", "paper-30-30"};
  return names;
}

TrainingConfig make_training_config(std::string_view preset) {
  TrainingConfig c;
  if (preset == "paper-60") {
    c.epochs = 60;
    c.learning_rate = 1e-4;
    c.weight_decay = 2.5e-6;
    c.phases = {{60, 1e-4, 2.5e-6}};
    return c;
  }
  if (preset == "paper-30-30") {
    c.phases = {{30, 1e-6, 0.0}, {30, 1e-8, 2.5e-6}};
    c.epochs = 60;
    c.learning_rate = c.phases.front().learning_rate;
    c.weight_decay = c.phases.front().weight_decay;
    return c;
  }
  throw TrainingConfigError(
      {"preset: unknown preset '" + std::string(preset) + "'; valid presets: " + join(preset_names(), ", ")});
}

const TrainingConfig& validate_config(const TrainingConfig& c) {
  std::vector<std::string> problems;
  if (c.base_model_id.empty()) problems.push_back("base_model_id must not be empty");
  check_phase("", c.epochs, c.learning_rate, c.weight_decay, problems);
  int sum = 0;
  for (std::size_t i = 0; i < c.phases.size(); ++i) {
    const auto& p = c.phases[i];
    check_phase("phases[" + std::to_string(i) + "].", p.epochs, p.learning_rate, p.weight_decay, problems);
    sum += p.epochs;
  }
  if (!c.phases.empty() && sum != c.epochs) {
    problems.push_back("epochs (" + std::to_string(c.epochs) + ") must equal the sum of phase epochs (" +
                       std::to_string(sum) + ")");
  }
  if (!problems.empty()) throw TrainingConfigError(std::move(problems));
  return c;
}

nlohmann::ordered_json config_to_json(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["base_model_id"] = c.base_model_id;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["phases"] = nlohmann::ordered_json::array();
  for (const auto& p : c.phases) {
    nlohmann::ordered_json pj;
    pj["epochs"] = p.epochs;
    pj["learning_rate"] = p.learning_rate;
    pj["weight_decay"] = p.weight_decay;
    j["phases"].push_back(pj);
  }
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  return j;
}

TrainingConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw TrainingConfigError({"config must be a JSON object"});
  static const std::set<std::string> allowed = {"base_model_id", "epochs", "learning_rate", "weight_decay",
                                                "phases", "seed", "output_dir"};
  std::vector<std::string> problems;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) problems.push_back(it.key() + ": unknown field");
  }
  if (!problems.empty()) throw TrainingConfigError(std::move(problems));
  TrainingConfig c;
  try {
    c.base_model_id = j.value("base_model_id", c.base_model_id);
    if (j.contains("phases")) {
      for (const auto& pj : j.at("phases")) {
        c.phases.push_back({pj.at("epochs").get<int>(), pj.at("learning_rate").get<double>(),
                            pj.value("weight_decay", 0.0)});
      }
    }
    if (j.contains("epochs")) {
      c.epochs = j.at("epochs").get<int>();
    } else {
      for (const auto& p : c.phases) c.epochs += p.epochs;
    }
    const bool phased = !c.phases.empty();
    c.learning_rate = j.value("learning_rate", phased ? c.phases.front().learning_rate : 0.0);
    c.weight_decay = j.value("weight_decay", phased ? c.phases.front().weight_decay : 0.0);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw TrainingConfigError({std::string("malformed config: ") + e.what()});
  }
  validate_config(c);
  return c;
}

std::string config_digest(const TrainingConfig& c) { return sha256_hex(config_to_json(c).dump()); }

PreparedDataset prepare_dataset(const corpus::Manifest& manifest, const PrepareOptions& options) {
  if (manifest.entries.empty()) throw std::invalid_argument("cannot prepare an empty manifest");
  if (options.output_dir.empty()) throw std::invalid_argument("prepare_dataset needs an output directory");

  PreparedDataset ds;
  ds.manifest_digest = manifest.digest();

  struct Slot {
    std::string text;
    bool empty_text = false;
    std::optional<std::filesystem::path> wav;
    std::string error;
  };
  std::vector<Slot> slots(manifest.entries.size());
  std::vector<std::string> transcripts;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    slots[i].text = text::normalize_hindi(manifest.entries[i].text);
    slots[i].empty_text = slots[i].text.empty();
    if (!slots[i].empty_text) transcripts.push_back(slots[i].text);
  }
  if (options.vocab) {
    ds.vocab = *options.vocab;
  } else {
    if (transcripts.empty()) throw std::invalid_argument("every transcript in the manifest is empty");
    ds.vocab = text::build_ctc_vocab(transcripts);
  }

  const auto audio_dir = options.output_dir / "audio";
  std::filesystem::create_directories(audio_dir);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      if (slots[i].empty_text) continue;
      const auto& entry = manifest.entries[i];
      try {
        auto clip = audio::canonicalize(audio::load_audio(entry.audio_path), audio::kCanonicalRate);
        auto out = audio_dir / (file_stem_for(entry.clip_id) + ".wav");
        audio::write_audio(clip, out);
        auto check = audio::load_audio(out);
        if (check.channels() != 1 || check.sample_rate() != audio::kCanonicalRate) {
          throw std::runtime_error("converted file is not 16 kHz mono");
        }
        slots[i].wav = out;
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };
  const unsigned workers = std::max(1u, options.workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  std::string jsonl;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& entry = manifest.entries[i];
    if (slots[i].empty_text) {
      ++ds.skipped_empty_transcript;
      ds.skipped.push_back({entry.clip_id, "empty transcript after normalisation"});
      continue;
    }
    if (!slots[i].wav) {
      ++ds.skipped_undecodable;
      ds.skipped.push_back({entry.clip_id, slots[i].error});
      continue;
    }
    PreparedEntry pe{entry.clip_id, *slots[i].wav, slots[i].text, ds.vocab.encode(slots[i].text)};
    nlohmann::ordered_json line;
    line["clip_id"] = pe.clip_id;
    line["audio_path"] = pe.audio_path.string();
    line["text"] = pe.text;
    line["labels"] = pe.labels;
    jsonl += line.dump() + "\n";
    ds.entries.push_back(std::move(pe));
  }
  atomic_write_file(options.output_dir / "vocab.json", ds.vocab.to_json());
  atomic_write_file(options.output_dir / "dataset.jsonl", jsonl);
  return ds;
}

StubTrainer::StubTrainer(std::vector<std::string> hypotheses, std::optional<int> fail_at_epoch)
    : hypotheses_(std::move(hypotheses)), fail_at_(fail_at_epoch) {}

void StubTrainer::begin(const TrainingConfig&, const PreparedDataset&, const PreparedDataset& dev) {
  frames_.clear();
  plans_.clear();
  for (std::size_t i = 0; i < dev.entries.size(); ++i) {
    const std::string hyp = i < hypotheses_.size() ? hypotheses_[i] : std::string();
    // A blank after every symbol keeps repeated characters apart under CTC collapse.
    std::vector<int> frames;
    for (int id : dev.vocab.encode(hyp)) {
      frames.push_back(id);
      frames.push_back(dev.vocab.padding_id());
    }
    frames_.push_back(std::move(frames));
  }
}

std::vector<std::vector<int>> StubTrainer::train_epoch(const EpochPlan& plan) {
  plans_.push_back(plan);
  if (fail_at_ && plan.epoch == *fail_at_) {
    throw std::runtime_error("stub trainer failure at epoch " + std::to_string(plan.epoch));
  }
  return frames_;
}

namespace {

class ReferenceTrainer : public TrainerBackend {
 public:
  void begin(const TrainingConfig& config, const PreparedDataset& train, const PreparedDataset& dev) override {
    worker_ = std::make_unique<detail::WorkerProcess>(
        std::vector<std::string>{detail::python_executable(), detail::worker_script(), "train"});
    auto entries = [](const PreparedDataset& ds) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& e : ds.entries) arr.push_back({{"audio_path", e.audio_path.string()}, {"labels", e.labels}});
      return arr;
    };
    worker_->request({{"op", "begin"},
                      {"config", nlohmann::json::parse(config_to_json(config).dump())},
                      {"vocab", nlohmann::json::parse(train.vocab.to_json())},
                      {"train", entries(train)},
                      {"dev", entries(dev)}});
  }

  std::vector<std::vector<int>> train_epoch(const EpochPlan& plan) override {
    if (!worker_) throw std::logic_error("trainer used before begin()");
    auto reply = worker_->request({{"op", "epoch"},
                                   {"epoch", plan.epoch},
                                   {"phase", plan.phase},
                                   {"learning_rate", plan.learning_rate},
                                   {"weight_decay", plan.weight_decay},
                                   {"seed", plan.seed}});
    return reply.at("frames").get<std::vector<std::vector<int>>>();
  }

 private:
  std::unique_ptr<detail::WorkerProcess> worker_;
};

}  // namespace

std::unique_ptr<TrainerBackend> make_reference_trainer() { return std::make_unique<ReferenceTrainer>(); }

TrainingAborted::TrainingAborted(int epoch, const std::string& cause, TrainingCurve partial)
    : std::runtime_error("training aborted at epoch " + std::to_string(epoch) + ": " + cause),
      epoch_(epoch),
      partial_(std::move(partial)) {}

TrainingCurve run_training(const TrainingConfig& config, const PreparedDataset& train, const PreparedDataset& dev,
                           TrainerBackend& trainer) {
  validate_config(config);
  if (dev.entries.empty()) throw std::invalid_argument("the dev set is empty");
  if (!(train.vocab == dev.vocab)) throw std::invalid_argument("train and dev sets use different vocabularies");

  TrainingCurve curve(config_digest(config));
  const auto stem = config.output_dir.empty() ? std::filesystem::path() : config.output_dir / "curve";
  if (!stem.empty()) std::filesystem::create_directories(config.output_dir);

  trainer.begin(config, train, dev);
  int epoch = 0;
  const auto schedule = config.schedule();
  for (std::size_t phase = 0; phase < schedule.size(); ++phase) {
    for (int k = 0; k < schedule[phase].epochs; ++k) {
      ++epoch;
      EpochPlan plan{epoch, static_cast<int>(phase), schedule[phase].learning_rate, schedule[phase].weight_decay,
                     config.seed};
      std::vector<std::vector<int>> frames;
      try {
        frames = trainer.train_epoch(plan);
        if (frames.size() != dev.entries.size()) {
          throw std::runtime_error("trainer returned " + std::to_string(frames.size()) + " hypotheses for " +
                                   std::to_string(dev.entries.size()) + " dev clips");
        }
      } catch (const std::exception& e) {
        throw TrainingAborted(epoch, e.what(), curve);
      }
      std::vector<std::pair<metrics::Tokens, metrics::Tokens>> pairs;
      pairs.reserve(frames.size());
      for (std::size_t i = 0; i < frames.size(); ++i) {
        pairs.emplace_back(text::split_words(dev.entries[i].text),
                           text::split_words(dev.vocab.ctc_greedy_decode(frames[i])));
      }
      curve.record_epoch(epoch, metrics::corpus_wer(pairs).rate());
      if (!stem.empty()) export_curve(curve, stem);
    }
  }
  return curve;
}

}  // namespace s2st::finetune
