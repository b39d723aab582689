#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2st/corpus.hpp"
#include "s2st/textnorm.hpp"

namespace s2st::finetune {

inline constexpr std::string_view kXlsrBaseModel = "facebook/wav2vec2-large-xlsr-53";

struct TrainingPhase {
  int epochs = 0;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  bool operator==(const TrainingPhase&) const = default;
};

struct TrainingConfig {
  std::string base_model_id = std::string(kXlsrBaseModel);
  int epochs = 0;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  /// Empty means one phase made of the three fields above.
  std::vector<TrainingPhase> phases;
  std::int64_t seed = 42;
  std::filesystem::path output_dir;

  /// The phases actually run: `phases`, or the implicit single phase.
  std::vector<TrainingPhase> schedule() const;
  bool operator==(const TrainingConfig&) const = default;
};

/// Carries every violation found, each prefixed by its field path.
class TrainingConfigError : public std::invalid_argument {
 public:
  explicit TrainingConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Names accepted by make_training_config.
const std::vector<std::string>& preset_names();

/// "paper-60" or "paper-30-30". Unknown names throw TrainingConfigError listing the valid ones.
TrainingConfig make_training_config(std::string_view preset);

/// Returns the config unchanged when valid, otherwise throws TrainingConfigError.
const TrainingConfig& validate_config(const TrainingConfig& config);

nlohmann::ordered_json config_to_json(const TrainingConfig& config);
/// Parses and validates.
TrainingConfig config_from_json(const nlohmann::json& j);
/// SHA-256 of the compact JSON serialisation.
std::string config_digest(const TrainingConfig& config);

struct PreparedEntry {
  std::string clip_id;
  std::filesystem::path audio_path;  // 16 kHz mono PCM16 WAV
  std::string text;
  std::vector<int> labels;
  bool operator==(const PreparedEntry&) const = default;
};

struct SkippedClip {
  std::string clip_id;
  std::string reason;
};

struct PreparedDataset {
  std::string manifest_digest;
  text::Vocab vocab{std::vector<std::string>{"|", "[UNK]", "[PAD]"}};
  std::vector<PreparedEntry> entries;  // manifest order
  std::size_t skipped_undecodable = 0;
  std::size_t skipped_empty_transcript = 0;
  std::vector<SkippedClip> skipped;
};

struct PrepareOptions {
  std::filesystem::path output_dir;
  /// Encode against this vocabulary instead of building one (dev sets reuse the train vocab).
  std::optional<text::Vocab> vocab;
  unsigned workers = 4;
};

/// Converts every clip to 16 kHz mono WAV under output_dir/audio, encodes the
/// labels and writes output_dir/vocab.json and output_dir/dataset.jsonl.
/// Clips that fail to decode and transcripts that normalise to nothing are
/// skipped and tallied. Throws std::invalid_argument on an empty manifest.
PreparedDataset prepare_dataset(const corpus::Manifest& manifest, const PrepareOptions& options);

struct CurvePoint {
  int epoch = 0;
  double wer = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

class CurveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingCurve {
 public:
  TrainingCurve() = default;
  explicit TrainingCurve(std::string config_digest) : config_digest_(std::move(config_digest)) {}

  /// Epochs must strictly increase; rates must be >= 0.
  void record_epoch(int epoch, double wer);

  const std::vector<CurvePoint>& points() const noexcept { return points_; }
  const std::string& config_digest() const noexcept { return config_digest_; }
  bool operator==(const TrainingCurve&) const = default;

 private:
  std::vector<CurvePoint> points_;
  std::string config_digest_;
};

/// "epoch,wer" table with rates printed to round-trip exactly.
std::string curve_to_csv(const TrainingCurve& curve);
TrainingCurve curve_from_csv(std::string_view csv, std::string config_digest = {});
std::string curve_to_svg(const TrainingCurve& curve);

struct CurveFiles {
  std::filesystem::path csv;
  std::filesystem::path svg;
  std::filesystem::path json;
};

/// Writes <stem>.csv, <stem>.svg and <stem>.json (config digest and points).
CurveFiles export_curve(const TrainingCurve& curve, const std::filesystem::path& stem);
/// Reads <stem>.csv and, when present, the digest from <stem>.json.
TrainingCurve import_curve(const std::filesystem::path& stem);

/// What the trainer is told for one epoch.
struct EpochPlan {
  int epoch = 0;  // 1-based across all phases
  int phase = 0;  // 0-based
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  std::int64_t seed = 0;
  bool operator==(const EpochPlan&) const = default;
};

/// One call per epoch. After training, returns per-frame vocabulary ids for
/// every dev entry, in dev order; the harness greedy-decodes them.
class TrainerBackend {
 public:
  virtual ~TrainerBackend() = default;
  virtual void begin(const TrainingConfig&, const PreparedDataset& /*train*/, const PreparedDataset& /*dev*/) {}
  virtual std::vector<std::vector<int>> train_epoch(const EpochPlan& plan) = 0;
};

/// Does not learn. Emits the same hypotheses every epoch (empty strings by
/// default) and records the plans it received. Optionally fails at one epoch.
class StubTrainer : public TrainerBackend {
 public:
  explicit StubTrainer(std::vector<std::string> hypotheses = {}, std::optional<int> fail_at_epoch = std::nullopt);

  void begin(const TrainingConfig& config, const PreparedDataset& train, const PreparedDataset& dev) override;
  std::vector<std::vector<int>> train_epoch(const EpochPlan& plan) override;

  const std::vector<EpochPlan>& plans() const noexcept { return plans_; }

 private:
  std::vector<std::string> hypotheses_;
  std::optional<int> fail_at_;
  std::vector<std::vector<int>> frames_;
  std::vector<EpochPlan> plans_;
};

/// Trainer running the reference Python adapter (transformers Wav2Vec2ForCTC).
std::unique_ptr<TrainerBackend> make_reference_trainer();

/// Trainer failure. The curve up to the last finished epoch is on disk.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(int epoch, const std::string& cause, TrainingCurve partial);
  int epoch() const noexcept { return epoch_; }
  const TrainingCurve& partial() const noexcept { return partial_; }

 private:
  int epoch_;
  TrainingCurve partial_;
};

/// Runs every epoch of every phase, scores dev hypotheses with pooled WER and
/// records the curve. After each epoch the curve is exported to
/// config.output_dir/curve.{csv,svg,json} when output_dir is set.
TrainingCurve run_training(const TrainingConfig& config, const PreparedDataset& train, const PreparedDataset& dev,
                           TrainerBackend& trainer);

}  // namespace s2st::finetune
