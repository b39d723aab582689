#include "s2st/audio_io.hpp"

#ifdef S2ST_HAVE_FFMPEG
extern "C" {
#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/opt.h>
#include <libswresample/swresample.h>
}
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#endif

namespace s2st::audio {

#ifdef S2ST_HAVE_FFMPEG

namespace {

struct MemoryReader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

int read_packet(void* opaque, std::uint8_t* buf, int size) {
  auto* r = static_cast<MemoryReader*>(opaque);
  std::size_t left = r->data.size() - r->pos;
  if (left == 0) return AVERROR_EOF;
  std::size_t n = std::min(left, static_cast<std::size_t>(size));
  std::memcpy(buf, r->data.data() + r->pos, n);
  r->pos += n;
  return static_cast<int>(n);
}

std::int64_t seek(void* opaque, std::int64_t offset, int whence) {
  auto* r = static_cast<MemoryReader*>(opaque);
  if (whence == AVSEEK_SIZE) return static_cast<std::int64_t>(r->data.size());
  std::int64_t target = offset;
  if ((whence & 3) == SEEK_CUR) target += static_cast<std::int64_t>(r->pos);
  if ((whence & 3) == SEEK_END) target += static_cast<std::int64_t>(r->data.size());
  if (target < 0 || target > static_cast<std::int64_t>(r->data.size())) return -1;
  r->pos = static_cast<std::size_t>(target);
  return target;
}

std::string av_message(int err) {
  char buf[AV_ERROR_MAX_STRING_SIZE] = {};
  av_strerror(err, buf, sizeof buf);
  return buf;
}

struct FormatCloser {
  void operator()(AVFormatContext* ctx) const { avformat_close_input(&ctx); }
};
struct IoCloser {
  void operator()(AVIOContext* io) const {
    if (io) av_freep(&io->buffer);
    avio_context_free(&io);
  }
};
struct CodecCloser {
  void operator()(AVCodecContext* ctx) const { avcodec_free_context(&ctx); }
};
struct SwrCloser {
  void operator()(SwrContext* ctx) const { swr_free(&ctx); }
};
struct FrameCloser {
  void operator()(AVFrame* f) const { av_frame_free(&f); }
};
struct PacketCloser {
  void operator()(AVPacket* p) const { av_packet_free(&p); }
};

}  // namespace

bool compressed_decoding_available() { return true; }

std::optional<AudioClip> detail::decode_compressed(std::span<const std::uint8_t> data,
                                                   std::string& error) {
  av_log_set_level(AV_LOG_QUIET);
  MemoryReader reader{data};
  constexpr int kBufSize = 1 << 15;
  auto* buf = static_cast<std::uint8_t*>(av_malloc(kBufSize));
  std::unique_ptr<AVIOContext, IoCloser> io(
      avio_alloc_context(buf, kBufSize, 0, &reader, &read_packet, nullptr, &seek));
  if (!io) {
    av_free(buf);
    error = "out of memory";
    return std::nullopt;
  }

  AVFormatContext* raw_fmt = avformat_alloc_context();
  raw_fmt->pb = io.get();
  if (int err = avformat_open_input(&raw_fmt, nullptr, nullptr, nullptr); err < 0) {
    error = av_message(err);
    return std::nullopt;
  }
  std::unique_ptr<AVFormatContext, FormatCloser> fmt(raw_fmt);
  if (int err = avformat_find_stream_info(fmt.get(), nullptr); err < 0) {
    error = av_message(err);
    return std::nullopt;
  }
#if LIBAVFORMAT_VERSION_MAJOR >= 59
  const AVCodec* codec = nullptr;
#else
  AVCodec* codec = nullptr;
#endif
  int stream = av_find_best_stream(fmt.get(), AVMEDIA_TYPE_AUDIO, -1, -1, &codec, 0);
  if (stream < 0 || !codec) {
    error = "no decodable audio stream";
    return std::nullopt;
  }
  std::unique_ptr<AVCodecContext, CodecCloser> dec(avcodec_alloc_context3(codec));
  avcodec_parameters_to_context(dec.get(), fmt->streams[stream]->codecpar);
  if (int err = avcodec_open2(dec.get(), codec, nullptr); err < 0) {
    error = av_message(err);
    return std::nullopt;
  }

  const int channels = dec->channels;
  const int rate = dec->sample_rate;
  if (channels < 1 || rate <= 0) {
    error = "stream reports no channels or rate";
    return std::nullopt;
  }
  std::int64_t layout = dec->channel_layout ? static_cast<std::int64_t>(dec->channel_layout)
                                            : av_get_default_channel_layout(channels);
  std::unique_ptr<SwrContext, SwrCloser> swr(swr_alloc_set_opts(
      nullptr, layout, AV_SAMPLE_FMT_FLT, rate, layout, dec->sample_fmt, rate, 0, nullptr));
  if (!swr || swr_init(swr.get()) < 0) {
    error = "cannot initialise sample conversion";
    return std::nullopt;
  }

  std::vector<float> samples;
  std::unique_ptr<AVFrame, FrameCloser> frame(av_frame_alloc());
  std::unique_ptr<AVPacket, PacketCloser> packet(av_packet_alloc());

  auto drain = [&]() -> bool {
    while (true) {
      int err = avcodec_receive_frame(dec.get(), frame.get());
      if (err == AVERROR(EAGAIN) || err == AVERROR_EOF) return true;
      if (err < 0) {
        error = av_message(err);
        return false;
      }
      std::size_t old = samples.size();
      samples.resize(old + static_cast<std::size_t>(frame->nb_samples) * static_cast<std::size_t>(channels));
      auto* outp = reinterpret_cast<std::uint8_t*>(samples.data() + old);
      int got = swr_convert(swr.get(), &outp, frame->nb_samples,
                            const_cast<const std::uint8_t**>(frame->extended_data), frame->nb_samples);
      if (got < 0) {
        error = "sample conversion failed";
        return false;
      }
      samples.resize(old + static_cast<std::size_t>(got) * static_cast<std::size_t>(channels));
    }
  };

  while (av_read_frame(fmt.get(), packet.get()) >= 0) {
    if (packet->stream_index == stream) {
      if (avcodec_send_packet(dec.get(), packet.get()) >= 0 && !drain()) return std::nullopt;
    }
    av_packet_unref(packet.get());
  }
  avcodec_send_packet(dec.get(), nullptr);
  if (!drain()) return std::nullopt;

  for (auto& s : samples) {
    if (!std::isfinite(s)) s = 0.0f;
    s = std::clamp(s, -1.0f, 1.0f);
  }
  return AudioClip(std::move(samples), rate, channels, sha256_hex(data));
}

#else

bool compressed_decoding_available() { return false; }

std::optional<AudioClip> detail::decode_compressed(std::span<const std::uint8_t>, std::string& error) {
  error = "no compressed-audio decoder in this build";
  return std::nullopt;
}

#endif

}  // namespace s2st::audio
