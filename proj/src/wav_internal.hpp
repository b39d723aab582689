#pragma once

#include <cstdint>
#include <span>

#include "s2st/audio_io.hpp"

namespace s2st::audio::wav {

struct Header {
  std::uint16_t format_tag = 0;
  int channels = 0;
  int sample_rate = 0;
  int bits_per_sample = 0;
  int block_align = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

bool looks_like_wav(std::span<const std::uint8_t> data);

/// Parses RIFF/WAVE chunks up to the data chunk. `available` is the total
/// byte count that exists, which may exceed data.size() when only a prefix
/// was read. Throws AudioError.
Header parse_header(std::span<const std::uint8_t> data, std::size_t available);

AudioClip decode(std::span<const std::uint8_t> data);

}  // namespace s2st::audio::wav
