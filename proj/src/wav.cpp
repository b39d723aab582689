#include <cmath>
#include <cstring>
#include <string>

#include "wav_internal.hpp"

namespace s2st::audio {

namespace wav {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t rd16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string codec_name(std::uint16_t tag) {
  switch (tag) {
    case 0x0002: return "Microsoft ADPCM";
    case 0x0006: return "A-law";
    case 0x0007: return "mu-law";
    case 0x0011: return "IMA ADPCM";
    case 0x0031: return "GSM 6.10";
    case 0x0050: return "MPEG audio";
    case 0x0055: return "MPEG layer 3";
    default: break;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "format tag 0x%04X", tag);
  return buf;
}

[[noreturn]] void corrupt(const std::string& why) {
  throw AudioError(AudioError::Kind::corrupt_header, "corrupt WAV header: " + why);
}

}  // namespace

bool looks_like_wav(std::span<const std::uint8_t> data) {
  return data.size() >= 12 && std::memcmp(data.data(), "RIFF", 4) == 0 &&
         std::memcmp(data.data() + 8, "WAVE", 4) == 0;
}

Header parse_header(std::span<const std::uint8_t> data, std::size_t available) {
  if (!looks_like_wav(data)) corrupt("missing RIFF/WAVE signature");
  Header h;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (true) {
    if (pos + 8 > data.size()) corrupt("no data chunk");
    const std::uint8_t* chunk = data.data() + pos;
    std::uint32_t size = rd32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > data.size()) corrupt("fmt chunk too short");
      const std::uint8_t* f = data.data() + body;
      h.format_tag = rd16(f);
      h.channels = rd16(f + 2);
      h.sample_rate = static_cast<int>(rd32(f + 4));
      h.block_align = rd16(f + 12);
      h.bits_per_sample = rd16(f + 14);
      if (h.format_tag == kFormatExtensible) {
        if (size < 40) corrupt("extensible fmt chunk too short");
        h.format_tag = rd16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) corrupt("data chunk before fmt chunk");
      h.data_offset = body;
      h.data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (h.format_tag != kFormatPcm && h.format_tag != kFormatFloat) {
    throw AudioError(AudioError::Kind::unsupported_codec,
                     "unsupported codec: " + codec_name(h.format_tag));
  }
  bool pcm_ok = h.format_tag == kFormatPcm &&
                (h.bits_per_sample == 8 || h.bits_per_sample == 16 || h.bits_per_sample == 24 ||
                 h.bits_per_sample == 32);
  bool float_ok = h.format_tag == kFormatFloat && (h.bits_per_sample == 32 || h.bits_per_sample == 64);
  if (!pcm_ok && !float_ok) {
    throw AudioError(AudioError::Kind::unsupported_codec,
                     "unsupported codec: " + codec_name(h.format_tag) + " with " +
                         std::to_string(h.bits_per_sample) + " bits per sample");
  }
  if (h.channels < 1) corrupt("zero channels");
  if (h.sample_rate <= 0) corrupt("non-positive sample rate");
  if (h.block_align != h.channels * h.bits_per_sample / 8) corrupt("block align mismatch");
  if (h.data_size % static_cast<std::size_t>(h.block_align) != 0) {
    corrupt("data size is not a whole number of frames");
  }
  if (h.data_offset + h.data_size > available) {
    corrupt("header declares " + std::to_string(h.data_size / static_cast<std::size_t>(h.block_align)) +
            " frames but the file is truncated");
  }
  return h;
}

AudioClip decode(std::span<const std::uint8_t> data) {
  Header h = parse_header(data, data.size());
  const std::uint8_t* p = data.data() + h.data_offset;
  const std::size_t count = h.data_size / static_cast<std::size_t>(h.bits_per_sample / 8);
  std::vector<float> samples(count);

  auto clamp = [](double v) { return static_cast<float>(v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v)); };
  for (std::size_t i = 0; i < count; ++i) {
    double v = 0.0;
    if (h.format_tag == kFormatPcm) {
      switch (h.bits_per_sample) {
        case 8: v = (static_cast<int>(p[i]) - 128) / 127.0; break;
        case 16: v = static_cast<std::int16_t>(rd16(p + 2 * i)) / 32767.0; break;
        case 24: {
          const std::uint8_t* s = p + 3 * i;
          std::int32_t x = static_cast<std::int32_t>((s[0] << 8) | (s[1] << 16) | (s[2] << 24)) >> 8;
          v = x / 8388607.0;
          break;
        }
        default: v = static_cast<std::int32_t>(rd32(p + 4 * i)) / 2147483647.0; break;
      }
    } else if (h.bits_per_sample == 32) {
      float f;
      std::uint32_t bits = rd32(p + 4 * i);
      std::memcpy(&f, &bits, 4);
      v = f;
    } else {
      std::uint64_t bits = rd32(p + 8 * i) | (static_cast<std::uint64_t>(rd32(p + 8 * i + 4)) << 32);
      std::memcpy(&v, &bits, 8);
    }
    if (!std::isfinite(v)) {
      throw AudioError(AudioError::Kind::corrupt_header, "WAV data contains non-finite samples");
    }
    samples[i] = clamp(v);
  }
  return AudioClip(std::move(samples), h.sample_rate, h.channels, sha256_hex(data));
}

}  // namespace wav

Bytes encode_wav_pcm16(const AudioClip& clip) {
  const auto channels = static_cast<std::uint32_t>(clip.channels());
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate());
  const auto data_size = static_cast<std::uint32_t>(clip.samples().size() * 2);
  Bytes out;
  out.reserve(44 + data_size);
  auto put = [&out](const char* tag) { out.insert(out.end(), tag, tag + 4); };
  auto put16 = [&out](std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  };
  auto put32 = [&](std::uint32_t v) {
    put16(v & 0xFFFF);
    put16(v >> 16);
  };
  put("RIFF");
  put32(36 + data_size);
  put("WAVE");
  put("fmt ");
  put32(16);
  put16(1);
  put16(channels);
  put32(rate);
  put32(rate * channels * 2);
  put16(channels * 2);
  put16(16);
  put("data");
  put32(data_size);
  for (float s : clip.samples()) {
    double scaled = std::nearbyint(static_cast<double>(s) * 32767.0);
    if (scaled > 32767.0) scaled = 32767.0;
    if (scaled < -32767.0) scaled = -32767.0;
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out;
}

}  // namespace s2st::audio
