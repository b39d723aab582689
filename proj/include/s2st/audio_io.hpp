#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2st/util.hpp"

namespace s2st::audio {

/// Rate every ASR input is normalised to.
inline constexpr int kCanonicalRate = 16000;

class AudioError : public std::runtime_error {
 public:
  enum class Kind { unreadable, unsupported_codec, corrupt_header, invalid_argument, unwritable };

  AudioError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Sampled audio, interleaved, amplitudes in [-1, 1].
///
/// The constructor enforces the invariants (positive rate, at least one channel,
/// whole frames, finite samples). Instances are immutable afterwards.
class AudioClip {
 public:
  AudioClip() = default;
  AudioClip(std::vector<float> interleaved, int sample_rate, int channels = 1,
            std::optional<std::string> source_digest = std::nullopt);

  static AudioClip silence(std::size_t frames, int sample_rate, int channels = 1);
  static AudioClip from_channels(const std::vector<std::vector<float>>& planar, int sample_rate);

  int sample_rate() const noexcept { return sample_rate_; }
  int channels() const noexcept { return channels_; }
  std::size_t frames() const noexcept { return samples_.size() / static_cast<std::size_t>(channels_); }
  bool empty() const noexcept { return samples_.empty(); }

  std::span<const float> samples() const noexcept { return samples_; }
  float at(std::size_t frame, int channel) const {
    return samples_[frame * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(channel)];
  }
  std::vector<float> channel(int index) const;

  /// SHA-256 of the file this clip was decoded from, if any. Derived clips
  /// (resampled, downmixed) keep the digest of their origin.
  const std::optional<std::string>& source_digest() const noexcept { return source_digest_; }
  AudioClip with_source_digest(std::optional<std::string> digest) const;

  bool operator==(const AudioClip&) const = default;

 private:
  std::vector<float> samples_;
  int sample_rate_ = kCanonicalRate;
  int channels_ = 1;
  std::optional<std::string> source_digest_;
};

enum class AudioFormat { wav_pcm16 };

AudioClip load_audio(const std::filesystem::path& path);

/// Decodes an in-memory container (WAV, or compressed audio when a decoder
/// backend is compiled in). source_digest is the SHA-256 of `data`.
AudioClip decode_audio(std::span<const std::uint8_t> data);

AudioClip resample(const AudioClip& clip, int target_rate);
AudioClip to_mono(const AudioClip& clip);

void write_audio(const AudioClip& clip, const std::filesystem::path& path,
                 AudioFormat format = AudioFormat::wav_pcm16);
Bytes encode_wav_pcm16(const AudioClip& clip);

double duration_seconds(const AudioClip& clip);

/// Duration from container metadata. WAV files are not decoded; compressed
/// files go through the decoder backend.
double probe_duration(const std::filesystem::path& path);

/// Mono at `rate`. Returns the input unchanged when it already is.
AudioClip canonicalize(const AudioClip& clip, int rate = kCanonicalRate);

/// Splits into consecutive windows of at most `window_seconds`. The windows
/// carry no source digest.
std::vector<AudioClip> split_windows(const AudioClip& clip, double window_seconds);

/// SHA-256 over rate, channel count and the little-endian float32 samples.
std::string content_digest(const AudioClip& clip);

/// source_digest when present, otherwise content_digest.
std::string fingerprint(const AudioClip& clip);

/// True when compressed containers (MP3) can be decoded in this build.
bool compressed_decoding_available();

namespace detail {
std::optional<AudioClip> decode_compressed(std::span<const std::uint8_t> data, std::string& error);
}

}  // namespace s2st::audio
