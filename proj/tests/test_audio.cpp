#include <complex>
#include <cstring>
#include <numeric>

#include "doctest.h"
#include "s2st/audio_io.hpp"
#include "s2st/util.hpp"
#include "test_support.hpp"

#ifdef S2ST_HAVE_FFMPEG
extern "C" {
#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
}
#endif

using namespace s2st;
using namespace s2st::audio;
using s2st::testing::TempDir;
using s2st::testing::sine;

namespace {

// Zero-stuff by L, low-pass with a long Hann-windowed sinc, keep every M-th
// sample. Slow and independent of the library's polyphase kernel.
std::vector<double> reference_resample(const std::vector<float>& x, int from, int to) {
  const int g = std::gcd(from, to);
  const int L = to / g, M = from / g;
  const double cutoff = 0.5 / std::max(L, M);  // cycles per upsampled sample
  const int half = 64 * std::max(L, M);
  std::vector<double> h(2 * half + 1);
  for (int n = -half; n <= half; ++n) {
    const double t = n;
    const double sinc = n == 0 ? 2 * cutoff : std::sin(2 * std::numbers::pi * cutoff * t) / (std::numbers::pi * t);
    const double w = 0.5 * (1 + std::cos(std::numbers::pi * t / (half + 1)));
    h[static_cast<std::size_t>(n + half)] = sinc * w * L;
  }
  const std::size_t out_len = (x.size() * static_cast<std::size_t>(to) + static_cast<std::size_t>(from) / 2) /
                              static_cast<std::size_t>(from);
  std::vector<double> y(out_len);
  for (std::size_t m = 0; m < out_len; ++m) {
    const long long centre = static_cast<long long>(m) * M;  // index in the upsampled stream
    double acc = 0;
    for (long long k = centre - half; k <= centre + half; ++k) {
      if (k < 0 || k % L != 0) continue;
      const auto src = static_cast<std::size_t>(k / L);
      if (src >= x.size()) break;
      acc += x[src] * h[static_cast<std::size_t>(centre - k + half)];
    }
    y[m] = acc;
  }
  return y;
}

std::size_t dft_peak_bin(std::span<const float> x) {
  const std::size_t n = x.size();
  std::size_t best = 0;
  double best_mag = -1;
  for (std::size_t k = 1; k < n / 2; ++k) {
    std::complex<double> acc = 0;
    const double w = -2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * std::polar(1.0, w * static_cast<double>(i));
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return best;
}

#ifdef S2ST_HAVE_FFMPEG
// Encodes a mono clip to an MP3 file with libmp3lame.
bool encode_mp3(const AudioClip& clip, const std::filesystem::path& path) {
  const AVCodec* codec = avcodec_find_encoder(AV_CODEC_ID_MP3);
  if (!codec) return false;
  AVFormatContext* fmt = nullptr;
  if (avformat_alloc_output_context2(&fmt, nullptr, "mp3", path.c_str()) < 0) return false;
  AVStream* st = avformat_new_stream(fmt, nullptr);
  AVCodecContext* ctx = avcodec_alloc_context3(codec);
  ctx->sample_rate = clip.sample_rate();
  ctx->channels = 1;
  ctx->channel_layout = AV_CH_LAYOUT_MONO;
  ctx->sample_fmt = AV_SAMPLE_FMT_FLTP;
  ctx->bit_rate = 64000;
  bool ok = avcodec_open2(ctx, codec, nullptr) >= 0 && avcodec_parameters_from_context(st->codecpar, ctx) >= 0 &&
            avio_open(&fmt->pb, path.c_str(), AVIO_FLAG_WRITE) >= 0 && avformat_write_header(fmt, nullptr) >= 0;
  AVPacket* pkt = av_packet_alloc();
  auto drain = [&] {
    while (avcodec_receive_packet(ctx, pkt) == 0) {
      av_packet_rescale_ts(pkt, ctx->time_base, st->time_base);
      pkt->stream_index = st->index;
      av_interleaved_write_frame(fmt, pkt);
    }
  };
  if (ok) {
    AVFrame* frame = av_frame_alloc();
    const auto samples = clip.samples();
    std::int64_t pts = 0;
    for (std::size_t pos = 0; pos < samples.size(); pos += static_cast<std::size_t>(ctx->frame_size)) {
      const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(ctx->frame_size), samples.size() - pos));
      frame->nb_samples = ctx->frame_size;
      frame->format = ctx->sample_fmt;
      frame->channel_layout = ctx->channel_layout;
      frame->sample_rate = ctx->sample_rate;
      av_frame_get_buffer(frame, 0);
      auto* dst = reinterpret_cast<float*>(frame->data[0]);
      std::fill(dst, dst + ctx->frame_size, 0.0f);
      std::memcpy(dst, samples.data() + pos, sizeof(float) * static_cast<std::size_t>(n));
      frame->pts = pts;
      pts += ctx->frame_size;
      avcodec_send_frame(ctx, frame);
      drain();
      av_frame_unref(frame);
    }
    avcodec_send_frame(ctx, nullptr);
    drain();
    av_write_trailer(fmt);
    av_frame_free(&frame);
  }
  av_packet_free(&pkt);
  avcodec_free_context(&ctx);
  if (fmt->pb) avio_closep(&fmt->pb);
  avformat_free_context(fmt);
  return ok;
}
#endif

}  // namespace

TEST_CASE("AudioClip enforces its invariants") {
  CHECK_THROWS_AS(AudioClip({0.1f}, 0, 1), AudioError);
  CHECK_THROWS_AS(AudioClip({0.1f}, 16000, 0), AudioError);
  CHECK_THROWS_AS(AudioClip({0.1f, 0.2f, 0.3f}, 16000, 2), AudioError);
  CHECK_THROWS_AS(AudioClip({std::numeric_limits<float>::infinity()}, 16000, 1), AudioError);
  CHECK_THROWS_AS(AudioClip::from_channels({{0.1f, 0.2f}, {0.3f}}, 8000), AudioError);

  auto c = AudioClip::from_channels({{0.1f, 0.2f}, {0.3f, 0.4f}}, 8000);
  CHECK(c.frames() == 2);
  CHECK(c.channels() == 2);
  CHECK(c.at(1, 1) == doctest::Approx(0.4f));
  CHECK(c.channel(0) == std::vector<float>{0.1f, 0.2f});
}

TEST_CASE("load_audio reads metadata from the container header") {
  TempDir dir;
  SUBCASE("1 s mono 16 kHz") {
    write_audio(AudioClip::silence(16000, 16000), dir / "a.wav");
    auto c = load_audio(dir / "a.wav");
    CHECK(c.frames() == 16000);
    CHECK(c.sample_rate() == 16000);
    CHECK(c.channels() == 1);
    CHECK(c.source_digest() == sha256_file(dir / "a.wav"));
  }
  SUBCASE("2 s stereo 8 kHz") {
    write_audio(AudioClip::silence(16000, 8000, 2), dir / "b.wav");
    auto c = load_audio(dir / "b.wav");
    CHECK(c.frames() == 16000);
    CHECK(c.sample_rate() == 8000);
    CHECK(c.channels() == 2);
    CHECK(duration_seconds(c) == 2.0);
  }
}

TEST_CASE("load_audio error kinds") {
  TempDir dir;
  auto kind_of = [](const std::filesystem::path& p) {
    try {
      load_audio(p);
    } catch (const AudioError& e) {
      return std::optional(e.kind());
    }
    return std::optional<AudioError::Kind>();
  };
  CHECK(kind_of(dir / "missing.wav") == AudioError::Kind::unreadable);

  // Header declares 100 frames, only 10 present.
  auto truncated = s2st::testing::raw_wav(1, 1, 16000, 16, s2st::testing::pcm16_bytes(std::vector<std::int16_t>(10)), 200);
  s2st::testing::write_bytes(dir / "t.wav", truncated);
  CHECK(kind_of(dir / "t.wav") == AudioError::Kind::corrupt_header);
  try {
    load_audio(dir / "t.wav");
  } catch (const AudioError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }

  s2st::testing::write_bytes(dir / "alaw.wav", s2st::testing::raw_wav(6, 1, 8000, 8, {1, 2, 3, 4}));
  CHECK(kind_of(dir / "alaw.wav") == AudioError::Kind::unsupported_codec);
  try {
    load_audio(dir / "alaw.wav");
  } catch (const AudioError& e) {
    CHECK(std::string(e.what()).find("A-law") != std::string::npos);
  }

  s2st::testing::write_text(dir / "junk.wav", std::string("RIFF\x04\x00\x00\x00WAVE", 12));
  CHECK(kind_of(dir / "junk.wav") == AudioError::Kind::corrupt_header);

  s2st::testing::write_text(dir / "text.txt", "definitely not audio");
  CHECK(kind_of(dir / "text.txt") == AudioError::Kind::unsupported_codec);
}

TEST_CASE("WAV decoding of other bit depths") {
  using s2st::testing::raw_wav;
  // 8-bit unsigned: 128 is silence.
  auto c8 = decode_audio(raw_wav(1, 1, 8000, 8, {128, 255, 0}));
  CHECK(c8.samples()[0] == 0.0f);
  CHECK(c8.samples()[1] == doctest::Approx(1.0));
  CHECK(c8.samples()[2] == -1.0f);

  // 24-bit: 0x400000 is half scale.
  auto c24 = decode_audio(raw_wav(1, 1, 8000, 24, {0x00, 0x00, 0x40}));
  CHECK(c24.samples()[0] == doctest::Approx(0x400000 / 8388607.0));

  // 32-bit float.
  float f = -0.25f;
  std::vector<std::uint8_t> fb(4);
  std::memcpy(fb.data(), &f, 4);
  auto cf = decode_audio(raw_wav(3, 1, 8000, 32, fb));
  CHECK(cf.samples()[0] == -0.25f);
}

TEST_CASE("PCM16 boundary values against hand-decoded bytes") {
  TempDir dir;
  write_audio(AudioClip({1.0f, -1.0f, 0.0f, 2.0e-5f}, 16000, 1), dir / "b.wav");
  auto bytes = read_file_bytes(dir / "b.wav");
  REQUIRE(bytes.size() == 44 + 8);
  auto s16 = [&](std::size_t i) {
    return static_cast<std::int16_t>(bytes[44 + 2 * i] | (bytes[45 + 2 * i] << 8));
  };
  CHECK(s16(0) == 32767);   // no wraparound to negative
  CHECK(s16(1) == -32767);
  CHECK(s16(2) == 0);
  CHECK(s16(3) == 1);       // round(2e-5 * 32767) = round(0.655)

  // The most negative code decodes to exactly -1.
  auto c = decode_audio(s2st::testing::raw_wav(1, 1, 16000, 16, s2st::testing::pcm16_bytes({-32768, 32767})));
  CHECK(c.samples()[0] == -1.0f);
  CHECK(c.samples()[1] == 1.0f);
}

TEST_CASE("write_audio / load_audio round trip") {
  TempDir dir;
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int channels : {1, 2}) {
    std::vector<float> s(16000 * static_cast<std::size_t>(channels));
    for (auto& v : s) v = u(rng);
    AudioClip clip(s, 16000, channels);
    write_audio(clip, dir / "r.wav");
    auto back = load_audio(dir / "r.wav");
    CHECK(back.frames() == clip.frames());
    CHECK(back.sample_rate() == clip.sample_rate());
    CHECK(back.channels() == clip.channels());
    double worst = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(back.samples()[i]) - s[i]));
    }
    CHECK(worst <= 1.0 / 32767);
  }

  write_audio(AudioClip({}, 16000, 1), dir / "empty.wav");
  auto empty = load_audio(dir / "empty.wav");
  CHECK(empty.frames() == 0);
  CHECK(empty.sample_rate() == 16000);

  s2st::testing::write_text(dir / "plain", "x");
  CHECK_THROWS_AS(write_audio(AudioClip::silence(10, 16000), dir / "plain" / "x.wav"), AudioError);
}

TEST_CASE("duration_seconds") {
  CHECK(duration_seconds(AudioClip::silence(32000, 16000)) == 2.0);
  CHECK(duration_seconds(AudioClip({}, 16000, 1)) == 0.0);
  CHECK(duration_seconds(AudioClip::silence(44100, 44100)) == 1.0);
}

TEST_CASE("probe_duration reads only the header for WAV") {
  TempDir dir;
  write_audio(AudioClip::silence(24000, 16000, 2), dir / "p.wav");
  CHECK(probe_duration(dir / "p.wav") == 1.5);
}

TEST_CASE("to_mono") {
  auto mono = sine(440, 8000, 100);
  CHECK(to_mono(mono) == mono);

  auto same = AudioClip::from_channels({{0.1f, 0.2f, -0.3f}, {0.1f, 0.2f, -0.3f}}, 8000);
  CHECK(to_mono(same).channel(0) == same.channel(0));

  auto cancel = AudioClip::from_channels({std::vector<float>(50, 0.5f), std::vector<float>(50, -0.5f)}, 8000);
  const auto zero = to_mono(cancel);
  for (float v : zero.samples()) CHECK(v == 0.0f);

  auto once = to_mono(cancel);
  CHECK(to_mono(once) == once);
}

TEST_CASE("resample identity, empty and errors") {
  auto c = sine(440, 16000, 1000).with_source_digest("abc");
  CHECK(resample(c, 16000) == c);
  auto e = resample(AudioClip({}, 8000, 1), 16000);
  CHECK(e.frames() == 0);
  CHECK(e.sample_rate() == 16000);
  CHECK_THROWS_AS(resample(c, 0), AudioError);
  CHECK_THROWS_AS(resample(c, -5), AudioError);
  CHECK(resample(c, 8000).source_digest() == c.source_digest());
}

TEST_CASE("resample length law over random lengths and rates") {
  std::mt19937 rng(1234);
  const int rates[] = {8000, 11025, 16000, 22050, 24000, 32000, 44100, 48000, 7350, 12345};
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_int_distribution<int> len(0, 3000);
  for (int i = 0; i < 200; ++i) {
    const int from = rates[pick(rng)], to = rates[pick(rng)];
    const auto n = static_cast<std::size_t>(len(rng));
    auto out = resample(AudioClip(std::vector<float>(n, 0.1f), from, 1), to);
    CHECK(out.sample_rate() == to);
    CHECK(std::abs(static_cast<double>(out.frames()) - static_cast<double>(n) * to / from) <= 1.0);
  }
}

TEST_CASE("resample 8 kHz to 16 kHz keeps a 440 Hz tone") {
  auto in = sine(440, 8000, 8000);
  auto out = resample(in, 16000);
  CHECK(std::abs(static_cast<long>(out.frames()) - 16000) <= 1);
  auto peak = dft_peak_bin(out.samples().subspan(0, 16000));
  CHECK(std::abs(static_cast<long>(peak) - 440) <= 1);

  // Agreement with the slow reference away from the edges.
  auto ref = reference_resample(std::vector<float>(in.samples().begin(), in.samples().end()), 8000, 16000);
  REQUIRE(ref.size() == out.frames());
  double err = 0, power = 0;
  for (std::size_t i = 400; i + 400 < ref.size(); ++i) {
    err += std::pow(out.samples()[i] - ref[i], 2);
    power += ref[i] * ref[i];
  }
  CHECK(std::sqrt(err / power) < 1e-2);
}

TEST_CASE("resample 44.1 kHz to 16 kHz against the reference") {
  auto in = sine(1000, 44100, 4410);
  auto out = resample(in, 16000);
  auto ref = reference_resample(std::vector<float>(in.samples().begin(), in.samples().end()), 44100, 16000);
  REQUIRE(ref.size() == out.frames());
  double err = 0, power = 0;
  for (std::size_t i = 200; i + 200 < ref.size(); ++i) {
    err += std::pow(out.samples()[i] - ref[i], 2);
    power += ref[i] * ref[i];
  }
  CHECK(std::sqrt(err / power) < 1e-2);
}

TEST_CASE("canonicalize and split_windows") {
  auto stereo = AudioClip::from_channels({std::vector<float>(4410, 0.2f), std::vector<float>(4410, 0.4f)}, 44100);
  auto c = canonicalize(stereo);
  CHECK(c.channels() == 1);
  CHECK(c.sample_rate() == 16000);
  CHECK(c.frames() == 1600);

  auto canon = AudioClip::silence(100, 16000);
  CHECK(canonicalize(canon) == canon);

  auto long_clip = AudioClip::silence(16000 * 65, 16000);
  auto windows = split_windows(long_clip, 30.0);
  REQUIRE(windows.size() == 3);
  CHECK(windows[0].frames() == 16000 * 30);
  CHECK(windows[2].frames() == 16000 * 5);
  CHECK_FALSE(windows[0].source_digest().has_value());
  CHECK_THROWS_AS(split_windows(long_clip, 0), AudioError);
}

TEST_CASE("content_digest and fingerprint") {
  auto a = sine(300, 16000, 100);
  auto b = sine(300, 16000, 100);
  CHECK(content_digest(a) == content_digest(b));
  CHECK(content_digest(a) != content_digest(AudioClip(std::vector<float>(a.samples().begin(), a.samples().end()), 8000)));
  CHECK(fingerprint(a) == content_digest(a));
  CHECK(fingerprint(a.with_source_digest("xyz")) == "xyz");
  CHECK(content_digest(a).size() == 64);
}

TEST_CASE("compressed audio") {
  TempDir dir;
  if (!compressed_decoding_available()) {
    s2st::testing::write_text(dir / "x.mp3", std::string("ID3\x03\x00\x00\x00\x00\x00\x00", 10));
    CHECK_THROWS_AS(load_audio(dir / "x.mp3"), AudioError);
    return;
  }
#ifdef S2ST_HAVE_FFMPEG
  auto clip = sine(440, 16000, 16000, 0.4);
  REQUIRE(encode_mp3(clip, dir / "tone.mp3"));
  auto back = load_audio(dir / "tone.mp3");
  CHECK(back.sample_rate() == 16000);
  CHECK(back.channels() == 1);
  CHECK(std::abs(duration_seconds(back) - 1.0) < 0.1);
  CHECK(back.source_digest() == sha256_file(dir / "tone.mp3"));
  auto peak = dft_peak_bin(back.samples().subspan(0, 8000));
  CHECK(std::abs(static_cast<long>(peak) - 220) <= 1);  // 8000-point DFT at 16 kHz: 2 Hz bins
  CHECK(std::abs(probe_duration(dir / "tone.mp3") - 1.0) < 0.1);
#endif
}
