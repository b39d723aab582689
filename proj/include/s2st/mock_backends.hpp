#pragma once

// Deterministic stand-ins for the three stages. Pure functions of their
// inputs, so pipeline runs over them are byte-reproducible.

#include <atomic>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "s2st/stages.hpp"

namespace s2st::stages {

inline constexpr std::string_view kMockAsrId = "mock:lookup";
inline constexpr std::string_view kMockNmtId = "mock:dict";
inline constexpr std::string_view kMockTtsId = "mock:silence";

/// Transcribes by looking up the clip fingerprint in a table.
///
/// Fixture JSON: {"lookup": {"<sha256>": "text", ...}, "fallback": ""}.
/// Parameter "fail" = "true" makes every call throw.
class MockAsr : public AsrBackend {
 public:
  MockAsr(BackendDescriptor descriptor, std::map<std::string, std::string> lookup, std::string fallback = "");
  static std::shared_ptr<MockAsr> from_descriptor(const BackendDescriptor& descriptor);

  std::string recognize(const audio::AudioClip& clip) override;

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

 private:
  std::map<std::string, std::string> lookup_;
  std::string fallback_;
  bool fail_ = false;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> misses_{0};
};

/// Whole-text dictionary hit first, otherwise word by word with unknown
/// words passed through.
///
/// Fixture JSON: {"dictionary": {"नमस्ते": "hello", ...}}.
class MockNmt : public NmtBackend {
 public:
  MockNmt(BackendDescriptor descriptor, std::map<std::string, std::string> dictionary);
  static std::shared_ptr<MockNmt> from_descriptor(const BackendDescriptor& descriptor);

  std::string translate_text(std::string_view text, std::string_view source, std::string_view target) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::map<std::string, std::string, std::less<>> dictionary_;
  bool fail_ = false;
  std::atomic<std::size_t> calls_{0};
};

/// Silence of 0.1 s per input character (code point) at 24 kHz.
///
/// Fixture JSON (optional): {"voices": [{"prompt_id", "language", "display_name"}, ...]};
/// defaults to the shipped English registry.
class MockTts : public TtsBackend {
 public:
  static constexpr double kSecondsPerCharacter = 0.1;

  MockTts(BackendDescriptor descriptor, std::vector<VoicePrompt> voices);
  static std::shared_ptr<MockTts> from_descriptor(const BackendDescriptor& descriptor);

  std::vector<VoicePrompt> voice_prompts() const override { return voices_; }
  audio::AudioClip generate(std::string_view text, const VoicePrompt& prompt) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::vector<VoicePrompt> voices_;
  bool fail_ = false;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace s2st::stages
