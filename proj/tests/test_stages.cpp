#include <set>
#include <thread>

#include "doctest.h"
#include "s2st/mock_backends.hpp"
#include "s2st/stages.hpp"
#include "s2st/util.hpp"
#include "test_support.hpp"

using namespace s2st;
using namespace s2st::stages;
using s2st::testing::TempDir;

namespace {

BackendDescriptor mock(StageKind kind, std::string_view id, std::map<std::string, std::string> params = {}) {
  return {kind, std::string(id), true, std::move(params)};
}

std::string fixture(const char* name) { return (s2st::testing::data_dir() / name).string(); }

class CountingFetcher : public ModelFetcher {
 public:
  void fetch(const std::string& model_id, const std::filesystem::path& destination) override {
    ++calls;
    if (fail) throw std::runtime_error("connection refused");
    s2st::testing::write_text(destination / "config.json", "{\"id\": \"" + model_id + "\"}");
    std::filesystem::create_directories(destination / "sub");
    s2st::testing::write_text(destination / "sub" / "weights.bin", "0123");
  }
  int calls = 0;
  bool fail = false;
};

}  // namespace

TEST_CASE("stage kind names") {
  for (auto k : {StageKind::asr, StageKind::nmt, StageKind::tts}) CHECK(parse_stage_kind(to_string(k)) == k);
  CHECK_FALSE(parse_stage_kind("mt").has_value());
}

TEST_CASE("default descriptors") {
  CHECK(default_descriptor(StageKind::asr).model_id == kDefaultAsrModel);
  CHECK(default_descriptor(StageKind::nmt).model_id == kDefaultNmtModel);
  CHECK(default_descriptor(StageKind::tts).model_id == kDefaultTtsModel);
  CHECK(default_descriptor(StageKind::nmt).parameters.at("source_code") == "hi_IN");
  CHECK(default_descriptor(StageKind::nmt).parameters.at("target_code") == "en_XX");
  for (auto k : {StageKind::asr, StageKind::nmt, StageKind::tts}) {
    CHECK(default_descriptor(k).stage_kind == k);
    CHECK(known_stage_of(default_descriptor(k).model_id) == k);
  }
}

TEST_CASE("English voice registry") {
  const auto& reg = english_voice_registry();
  REQUIRE(reg.size() == 10);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    CHECK(reg[i].language == "en");
    CHECK_FALSE(reg[i].display_name.empty());
    CHECK(reg[i].prompt_id == "v2/en_speaker_" + std::to_string(i));
    ids.insert(reg[i].prompt_id);
  }
  CHECK(ids.size() == 10);
  CHECK(english_voice_registry() == reg);
  CHECK(&english_voice_registry() == &reg);
}

TEST_CASE("mock ASR looks up the clip fingerprint") {
  auto asr = MockAsr::from_descriptor(mock(StageKind::asr, kMockAsrId, {{"fixture", fixture("mock_asr.json")}}));
  auto clip = audio::load_audio(s2st::testing::data_dir() / "namaste.wav");
  auto t = transcribe(*asr, clip);
  CHECK(t.text == "नमस्ते");
  CHECK(t.language == "hi");
  CHECK(t.backend_id == "mock:lookup");
  CHECK(t.elapsed >= 0.0);
  CHECK(asr->calls() == 1);
  CHECK(asr->misses() == 0);

  auto other = s2st::testing::sine(300, 16000, 800);
  CHECK(transcribe(*asr, other).text == "");
  CHECK(asr->misses() == 1);
}

TEST_CASE("transcribe enforces its input contract") {
  auto asr = MockAsr::from_descriptor(mock(StageKind::asr, kMockAsrId));
  audio::AudioClip stereo(std::vector<float>(32, 0.0f), 16000, 2);
  CHECK_THROWS_AS(transcribe(*asr, stereo), ContractViolation);
  CHECK_THROWS_AS(transcribe(*asr, s2st::testing::sine(300, 8000, 80)), ContractViolation);
  CHECK(asr->calls() == 0);
}

TEST_CASE("mock NMT dictionary") {
  auto nmt = MockNmt::from_descriptor(mock(StageKind::nmt, kMockNmtId, {{"fixture", fixture("mock_nmt.json")}}));
  auto t = translate(*nmt, "नमस्ते");
  CHECK(t.text == "hello");
  CHECK(t.source_language == "hi");
  CHECK(t.target_language == "en");
  CHECK(t.backend_id == "mock:dict");
  CHECK(translate(*nmt, "मैं घर जा रहा हूँ").text == "i home go am going");
  CHECK(translate(*nmt, "अज्ञात घर").text == "अज्ञात home");
  CHECK(nmt->calls() == 3);

  CHECK(translate(*nmt, "  ।  ").text == "");
  CHECK(nmt->calls() == 3);

  CHECK_THROWS_AS(translate(*nmt, "घर", "hi", "fr"), StageError);
}

TEST_CASE("mock TTS duration law and voice lookup") {
  auto tts = MockTts::from_descriptor(mock(StageKind::tts, kMockTtsId));
  auto clip = synthesize(*tts, "hello", "v2/en_speaker_3");
  CHECK(clip.sample_rate() == kTtsOutputRate);
  CHECK(clip.channels() == 1);
  CHECK(clip.frames() == 12000);
  CHECK(synthesize(*tts, "नमस्ते", "v2/en_speaker_0").frames() == 6 * 2400);

  CHECK(list_voice_prompts(*tts) == english_voice_registry());
  try {
    synthesize(*tts, "hello", "v2/en_speaker_99");
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == StageKind::tts);
    CHECK(e.backend_id() == "mock:silence");
    CHECK(std::string(e.what()).find("v2/en_speaker_9") != std::string::npos);
  }
  CHECK_THROWS_AS(synthesize(*tts, "", "v2/en_speaker_0"), StageError);
}

TEST_CASE("mock failure injection surfaces as StageError") {
  auto asr = MockAsr::from_descriptor(mock(StageKind::asr, kMockAsrId, {{"fail", "true"}}));
  auto nmt = MockNmt::from_descriptor(mock(StageKind::nmt, kMockNmtId, {{"fail", "true"}}));
  auto tts = MockTts::from_descriptor(mock(StageKind::tts, kMockTtsId, {{"fail", "true"}}));
  try {
    transcribe(*asr, s2st::testing::sine(300, 16000, 160));
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == StageKind::asr);
    CHECK(e.cause() == "injected failure");
  }
  CHECK_THROWS_AS(translate(*nmt, "घर"), StageError);
  CHECK_THROWS_AS(synthesize(*tts, "home", "v2/en_speaker_1"), StageError);
}

TEST_CASE("load_backend validates ids and stage kinds") {
  CHECK(std::dynamic_pointer_cast<MockAsr>(load_asr(mock(StageKind::asr, kMockAsrId), nullptr)));
  CHECK(std::dynamic_pointer_cast<MockNmt>(load_nmt(mock(StageKind::nmt, kMockNmtId), nullptr)));
  CHECK(std::dynamic_pointer_cast<MockTts>(load_tts(mock(StageKind::tts, kMockTtsId), nullptr)));

  CHECK_THROWS_AS(load_backend(mock(StageKind::asr, "mock:nope"), nullptr), BackendError);
  CHECK_THROWS_AS(load_backend(mock(StageKind::nmt, kMockAsrId), nullptr), BackendError);
  CHECK_THROWS_AS(load_backend(mock(StageKind::asr, std::string(kDefaultTtsModel)), nullptr), BackendError);
  CHECK_THROWS_AS(load_backend(mock(StageKind::asr, "not a model"), nullptr), BackendError);
  CHECK_THROWS_AS(load_backend(mock(StageKind::asr, ""), nullptr), BackendError);
  CHECK_THROWS_AS(load_backend(mock(StageKind::asr, "org/name"), nullptr), BackendError);
  CHECK_THROWS_AS(load_asr(mock(StageKind::nmt, kMockNmtId), nullptr), BackendError);
  CHECK_THROWS_AS(load_asr(mock(StageKind::asr, kMockAsrId, {{"fixture", "/nonexistent.json"}}), nullptr),
                  BackendError);

  TempDir dir;
  s2st::testing::write_text(dir / "bad.json", "{\"voices\": [{\"prompt_id\": \"a\"}, {\"prompt_id\": \"a\"}]}");
  CHECK_THROWS_AS(load_tts(mock(StageKind::tts, kMockTtsId, {{"fixture", (dir / "bad.json").string()}}), nullptr),
                  BackendError);
}

TEST_CASE("HubClient resolves once and then serves from its cache") {
  TempDir dir;
  auto fetcher = std::make_shared<CountingFetcher>();
  auto hub = std::make_shared<HubClient>(dir / "models", fetcher);
  CHECK_FALSE(hub->cached("org/model"));
  const auto p1 = hub->resolve("org/model");
  CHECK(fetcher->calls == 1);
  CHECK(hub->fetch_count() == 1);
  CHECK(hub->cached("org/model"));
  CHECK(p1.filename() == s2st::sha256_hex("org/model"));
  CHECK(std::filesystem::exists(p1 / "sub" / "weights.bin"));
  const auto manifest = s2st::read_file_text(p1 / ".s2st-manifest.json");
  CHECK(manifest.find(s2st::sha256_hex("0123")) != std::string::npos);

  const auto p2 = hub->resolve("org/model");
  CHECK(p2 == p1);
  CHECK(fetcher->calls == 1);

  HubClient second(dir / "models", fetcher);
  CHECK(second.resolve("org/model") == p1);
  CHECK(fetcher->calls == 1);
}

TEST_CASE("HubClient offline and failure modes") {
  TempDir dir;
  auto fetcher = std::make_shared<CountingFetcher>();
  HubClient offline(dir / "models", fetcher, true);
  CHECK_THROWS_AS(offline.resolve("org/model"), BackendError);
  CHECK(fetcher->calls == 0);

  fetcher->fail = true;
  HubClient online(dir / "models", fetcher);
  try {
    online.resolve("org/model");
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(std::string(e.what()).find("network failure") != std::string::npos);
  }
  CHECK_FALSE(online.cached("org/model"));
  CHECK(std::distance(std::filesystem::directory_iterator(dir / "models"), std::filesystem::directory_iterator()) == 0);

  fetcher->fail = false;
  online.resolve("org/model");
  HubClient offline_after(dir / "models", fetcher, true);
  CHECK_NOTHROW(offline_after.resolve("org/model"));
}

TEST_CASE("checkpoint backends defer hub resolution") {
  TempDir dir;
  auto fetcher = std::make_shared<CountingFetcher>();
  auto hub = std::make_shared<HubClient>(dir / "models", fetcher);
  auto asr = load_asr(default_descriptor(StageKind::asr), hub);
  CHECK(fetcher->calls == 0);
  CHECK(asr->id() == kDefaultAsrModel);
  auto* cb = dynamic_cast<CheckpointBacked*>(asr.get());
  REQUIRE(cb != nullptr);
  const auto p = cb->model_path();
  CHECK(fetcher->calls == 1);
  CHECK(cb->model_path() == p);
  CHECK(fetcher->calls == 1);

  auto again = load_asr(default_descriptor(StageKind::asr), hub);
  dynamic_cast<CheckpointBacked*>(again.get())->model_path();
  CHECK(fetcher->calls == 1);

  auto nmt = load_nmt(default_descriptor(StageKind::nmt), hub);
  dynamic_cast<CheckpointBacked*>(nmt.get())->model_path();
  CHECK(fetcher->calls == 2);
}

TEST_CASE("call_guard serialises only non-concurrent backends") {
  auto serial = MockNmt::from_descriptor({StageKind::nmt, std::string(kMockNmtId), false, {}});
  auto parallel = MockNmt::from_descriptor(mock(StageKind::nmt, kMockNmtId));
  {
    auto g = serial->call_guard();
    CHECK(g.owns_lock());
    bool free_in_other_thread = true;
    std::thread([&] { free_in_other_thread = g.mutex()->try_lock(); }).join();
    CHECK_FALSE(free_in_other_thread);
  }
  CHECK_FALSE(parallel->call_guard().owns_lock());
}
