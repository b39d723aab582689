// Band-limited rational resampling.
//
// Output frame n sits at input position n * src / dst. With g = gcd(src, dst)
// that position is base + phase / (dst / g), so there are only dst / g distinct
// fractional offsets. Each offset gets its own Kaiser-windowed sinc kernel
// (normalised to unit DC gain); kernels are tabulated when the phase count is
// small and evaluated on the fly otherwise.

#include <cmath>
#include <numbers>
#include <numeric>

#include "s2st/audio_io.hpp"

namespace s2st::audio {

namespace {

constexpr int kZeroCrossings = 16;
constexpr double kRolloff = 0.945;
constexpr double kKaiserBeta = 8.6;
constexpr std::int64_t kMaxTabulatedPhases = 4096;

class Kernel {
 public:
  Kernel(int src, int dst) {
    cutoff_ = kRolloff * std::min(1.0, static_cast<double>(dst) / src);
    radius_ = kZeroCrossings / cutoff_;
    taps_ = 2 * static_cast<int>(std::ceil(radius_)) + 2;
    window_norm_ = std::cyl_bessel_i(0.0, kKaiserBeta);
  }

  /// First input index touched for a position with integer part `base`.
  std::int64_t first(std::int64_t base) const { return base - taps_ / 2 + 1; }
  int taps() const { return taps_; }

  /// Weights for input samples first(base) .. first(base) + taps - 1 at fractional offset `frac`.
  void weights(double frac, std::vector<double>& out) const {
    out.assign(static_cast<std::size_t>(taps_), 0.0);
    double sum = 0.0;
    for (int k = 0; k < taps_; ++k) {
      double d = static_cast<double>(k - taps_ / 2 + 1) - frac;
      double ad = std::abs(d);
      if (ad >= radius_) continue;
      double x = cutoff_ * d;
      double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      double r = d / radius_;
      double w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / window_norm_;
      out[static_cast<std::size_t>(k)] = sinc * w;
      sum += sinc * w;
    }
    for (auto& v : out) v /= sum;
  }

 private:
  double cutoff_;
  double radius_;
  int taps_;
  double window_norm_;
};

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) {
    throw AudioError(AudioError::Kind::invalid_argument,
                     "target rate must be positive, got " + std::to_string(target_rate));
  }
  const int src_rate = clip.sample_rate();
  if (src_rate == target_rate) return clip;

  const std::int64_t g = std::gcd(src_rate, target_rate);
  const std::int64_t step = src_rate / g;    // input advance per output frame, in 1/phases units
  const std::int64_t phases = target_rate / g;
  const auto in_frames = static_cast<std::int64_t>(clip.frames());
  const std::int64_t out_frames =
      (in_frames * target_rate + src_rate / 2) / src_rate;  // round half up
  const auto channels = static_cast<std::size_t>(clip.channels());

  Kernel kernel(src_rate, target_rate);
  const bool tabulate = phases <= kMaxTabulatedPhases;
  std::vector<std::vector<double>> table;
  if (tabulate) {
    table.resize(static_cast<std::size_t>(phases));
  }

  auto in = clip.samples();
  std::vector<float> out(static_cast<std::size_t>(out_frames) * channels);
  std::vector<double> scratch;
  for (std::int64_t n = 0; n < out_frames; ++n) {
    const std::int64_t pos = n * step;
    const std::int64_t base = pos / phases;
    const std::int64_t phase = pos % phases;
    const std::vector<double>* w = nullptr;
    if (tabulate) {
      auto& slot = table[static_cast<std::size_t>(phase)];
      if (slot.empty()) kernel.weights(static_cast<double>(phase) / phases, slot);
      w = &slot;
    } else {
      kernel.weights(static_cast<double>(phase) / phases, scratch);
      w = &scratch;
    }
    const std::int64_t first = kernel.first(base);
    const std::int64_t lo = std::max<std::int64_t>(first, 0);
    const std::int64_t hi = std::min<std::int64_t>(first + kernel.taps(), in_frames);
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::int64_t k = lo; k < hi; ++k) {
        acc += (*w)[static_cast<std::size_t>(k - first)] * in[static_cast<std::size_t>(k) * channels + c];
      }
      if (acc > 1.0) acc = 1.0;
      if (acc < -1.0) acc = -1.0;
      out[static_cast<std::size_t>(n) * channels + c] = static_cast<float>(acc);
    }
  }
  return AudioClip(std::move(out), target_rate, clip.channels(), clip.source_digest());
}

}  // namespace s2st::audio
