#include "s2st/audio_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "wav_internal.hpp"

namespace s2st::audio {

AudioClip::AudioClip(std::vector<float> interleaved, int sample_rate, int channels,
                     std::optional<std::string> source_digest)
    : samples_(std::move(interleaved)),
      sample_rate_(sample_rate),
      channels_(channels),
      source_digest_(std::move(source_digest)) {
  if (sample_rate_ <= 0) {
    throw AudioError(AudioError::Kind::invalid_argument,
                     "sample rate must be positive, got " + std::to_string(sample_rate_));
  }
  if (channels_ < 1) {
    throw AudioError(AudioError::Kind::invalid_argument,
                     "channel count must be at least 1, got " + std::to_string(channels_));
  }
  if (samples_.size() % static_cast<std::size_t>(channels_) != 0) {
    throw AudioError(AudioError::Kind::invalid_argument, "sample count is not a whole number of frames");
  }
  for (float s : samples_) {
    if (!std::isfinite(s)) throw AudioError(AudioError::Kind::invalid_argument, "non-finite sample");
  }
}

AudioClip AudioClip::silence(std::size_t frames, int sample_rate, int channels) {
  return AudioClip(std::vector<float>(frames * static_cast<std::size_t>(std::max(channels, 1)), 0.0f),
                   sample_rate, channels);
}

AudioClip AudioClip::from_channels(const std::vector<std::vector<float>>& planar, int sample_rate) {
  if (planar.empty()) throw AudioError(AudioError::Kind::invalid_argument, "no channels");
  const std::size_t frames = planar.front().size();
  for (const auto& ch : planar) {
    if (ch.size() != frames) {
      throw AudioError(AudioError::Kind::invalid_argument, "channels differ in length");
    }
  }
  const std::size_t n = planar.size();
  std::vector<float> inter(frames * n);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < n; ++c) inter[f * n + c] = planar[c][f];
  }
  return AudioClip(std::move(inter), sample_rate, static_cast<int>(n));
}

std::vector<float> AudioClip::channel(int index) const {
  std::vector<float> out(frames());
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = at(f, index);
  return out;
}

AudioClip AudioClip::with_source_digest(std::optional<std::string> digest) const {
  AudioClip copy = *this;
  copy.source_digest_ = std::move(digest);
  return copy;
}

AudioClip decode_audio(std::span<const std::uint8_t> data) {
  if (wav::looks_like_wav(data)) return wav::decode(data);

  std::string error;
  if (compressed_decoding_available()) {
    if (auto clip = detail::decode_compressed(data, error)) return *clip;
  }

  std::string container = "unknown container";
  if (data.size() >= 3 && std::memcmp(data.data(), "ID3", 3) == 0) {
    container = "mp3";
  } else if (data.size() >= 2 && data[0] == 0xFF && (data[1] & 0xE0) == 0xE0) {
    container = "mp3";
  } else if (data.size() >= 4 && std::memcmp(data.data(), "OggS", 4) == 0) {
    container = "ogg";
  } else if (data.size() >= 4 && std::memcmp(data.data(), "fLaC", 4) == 0) {
    container = "flac";
  }
  if (!compressed_decoding_available()) {
    throw AudioError(AudioError::Kind::unsupported_codec,
                     "unsupported codec: " + container + " (no compressed-audio decoder in this build)");
  }
  throw AudioError(AudioError::Kind::unsupported_codec,
                   "unsupported codec: " + container + (error.empty() ? "" : " (" + error + ")"));
}

AudioClip load_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError(AudioError::Kind::unreadable, "cannot read audio file: " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw AudioError(AudioError::Kind::unreadable, "read failed: " + path.string());
  try {
    return decode_audio(data);
  } catch (const AudioError& e) {
    throw AudioError(e.kind(), path.string() + ": " + e.what());
  }
}

double probe_duration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError(AudioError::Kind::unreadable, "cannot read audio file: " + path.string());
  Bytes head(64 * 1024);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (wav::looks_like_wav(head)) {
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    if (ec) throw AudioError(AudioError::Kind::unreadable, "cannot stat " + path.string());
    try {
      auto h = wav::parse_header(head, static_cast<std::size_t>(size));
      return static_cast<double>(h.data_size / static_cast<std::size_t>(h.block_align)) / h.sample_rate;
    } catch (const AudioError& e) {
      // Header larger than the probe window: fall back to a full read.
      if (e.kind() != AudioError::Kind::corrupt_header || head.size() < 64 * 1024) {
        throw AudioError(e.kind(), path.string() + ": " + e.what());
      }
    }
  }
  return duration_seconds(load_audio(path));
}

AudioClip to_mono(const AudioClip& clip) {
  if (clip.channels() == 1) return clip;
  const auto n = static_cast<std::size_t>(clip.channels());
  std::vector<float> out(clip.frames());
  auto in = clip.samples();
  for (std::size_t f = 0; f < out.size(); ++f) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) sum += in[f * n + c];
    out[f] = static_cast<float>(sum / static_cast<double>(n));
  }
  return AudioClip(std::move(out), clip.sample_rate(), 1, clip.source_digest());
}

void write_audio(const AudioClip& clip, const std::filesystem::path& path, AudioFormat format) {
  if (format != AudioFormat::wav_pcm16) {
    throw AudioError(AudioError::Kind::invalid_argument, "unsupported output format");
  }
  Bytes bytes = encode_wav_pcm16(clip);
  try {
    atomic_write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const std::exception& e) {
    throw AudioError(AudioError::Kind::unwritable, e.what());
  }
}

double duration_seconds(const AudioClip& clip) {
  return static_cast<double>(clip.frames()) / clip.sample_rate();
}

AudioClip canonicalize(const AudioClip& clip, int rate) {
  AudioClip mono = to_mono(clip);
  if (mono.sample_rate() == rate) return mono;
  return resample(mono, rate);
}

std::vector<AudioClip> split_windows(const AudioClip& clip, double window_seconds) {
  if (window_seconds <= 0.0) {
    throw AudioError(AudioError::Kind::invalid_argument, "window length must be positive");
  }
  const auto window = static_cast<std::size_t>(std::llround(window_seconds * clip.sample_rate()));
  const auto n = static_cast<std::size_t>(clip.channels());
  std::vector<AudioClip> out;
  auto samples = clip.samples();
  for (std::size_t start = 0; start < clip.frames(); start += window) {
    std::size_t end = std::min(clip.frames(), start + window);
    out.emplace_back(std::vector<float>(samples.begin() + static_cast<std::ptrdiff_t>(start * n),
                                        samples.begin() + static_cast<std::ptrdiff_t>(end * n)),
                     clip.sample_rate(), clip.channels());
  }
  return out;
}

std::string content_digest(const AudioClip& clip) {
  std::string buf = "s2st-audio-v1\n" + std::to_string(clip.sample_rate()) + "\n" +
                    std::to_string(clip.channels()) + "\n";
  buf.reserve(buf.size() + clip.samples().size() * 4);
  for (float s : clip.samples()) {
    std::uint32_t bits;
    std::memcpy(&bits, &s, 4);
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
  }
  return sha256_hex(buf);
}

std::string fingerprint(const AudioClip& clip) {
  return clip.source_digest() ? *clip.source_digest() : content_digest(clip);
}

}  // namespace s2st::audio
