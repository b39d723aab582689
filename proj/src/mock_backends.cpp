#include "s2st/mock_backends.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "s2st/textnorm.hpp"
#include "s2st/util.hpp"

namespace s2st::stages {

namespace {

nlohmann::json load_fixture(const BackendDescriptor& d) {
  auto it = d.parameters.find("fixture");
  if (it == d.parameters.end() || it->second.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_file_text(it->second));
  } catch (const std::exception& e) {
    throw BackendError("mock fixture for '" + d.model_id + "': " + e.what());
  }
}

bool wants_failure(const BackendDescriptor& d) {
  auto it = d.parameters.find("fail");
  return it != d.parameters.end() && it->second == "true";
}

}  // namespace

MockAsr::MockAsr(BackendDescriptor descriptor, std::map<std::string, std::string> lookup, std::string fallback)
    : AsrBackend(std::move(descriptor)), lookup_(std::move(lookup)), fallback_(std::move(fallback)) {
  fail_ = wants_failure(this->descriptor());
}

std::shared_ptr<MockAsr> MockAsr::from_descriptor(const BackendDescriptor& d) {
  auto j = load_fixture(d);
  std::map<std::string, std::string> lookup;
  if (j.contains("lookup")) lookup = j["lookup"].get<std::map<std::string, std::string>>();
  std::string fallback = j.value("fallback", std::string());
  if (auto it = d.parameters.find("fallback"); it != d.parameters.end()) fallback = it->second;
  return std::make_shared<MockAsr>(d, std::move(lookup), std::move(fallback));
}

std::string MockAsr::recognize(const audio::AudioClip& clip) {
  ++calls_;
  if (fail_) throw std::runtime_error("injected failure");
  auto it = lookup_.find(audio::fingerprint(clip));
  if (it == lookup_.end()) {
    ++misses_;
    return fallback_;
  }
  return it->second;
}

MockNmt::MockNmt(BackendDescriptor descriptor, std::map<std::string, std::string> dictionary)
    : NmtBackend(std::move(descriptor)), dictionary_(dictionary.begin(), dictionary.end()) {
  fail_ = wants_failure(this->descriptor());
}

std::shared_ptr<MockNmt> MockNmt::from_descriptor(const BackendDescriptor& d) {
  auto j = load_fixture(d);
  std::map<std::string, std::string> dict;
  if (j.contains("dictionary")) dict = j["dictionary"].get<std::map<std::string, std::string>>();
  return std::make_shared<MockNmt>(d, std::move(dict));
}

std::string MockNmt::translate_text(std::string_view text, std::string_view, std::string_view) {
  ++calls_;
  if (fail_) throw std::runtime_error("injected failure");
  if (auto it = dictionary_.find(text); it != dictionary_.end()) return it->second;
  std::string out;
  for (const auto& word : text::split_words(text)) {
    if (!out.empty()) out.push_back(' ');
    auto it = dictionary_.find(word);
    out += it == dictionary_.end() ? word : it->second;
  }
  return out;
}

MockTts::MockTts(BackendDescriptor descriptor, std::vector<VoicePrompt> voices)
    : TtsBackend(std::move(descriptor)), voices_(std::move(voices)) {
  fail_ = wants_failure(this->descriptor());
  std::set<std::string> ids;
  for (const auto& v : voices_) {
    if (v.prompt_id.empty()) throw BackendError("voice prompt ids must be non-empty");
    if (!ids.insert(v.prompt_id).second) throw BackendError("duplicate voice prompt id '" + v.prompt_id + "'");
  }
}

std::shared_ptr<MockTts> MockTts::from_descriptor(const BackendDescriptor& d) {
  auto j = load_fixture(d);
  std::vector<VoicePrompt> voices = english_voice_registry();
  if (j.contains("voices")) {
    voices.clear();
    for (const auto& v : j["voices"]) {
      voices.push_back({v.at("prompt_id").get<std::string>(), v.value("language", std::string("en")),
                        v.value("display_name", v.at("prompt_id").get<std::string>())});
    }
  }
  return std::make_shared<MockTts>(d, std::move(voices));
}

audio::AudioClip MockTts::generate(std::string_view text, const VoicePrompt&) {
  ++calls_;
  if (fail_) throw std::runtime_error("injected failure");
  const auto chars = utf8_to_u32(text).size();
  const auto frames = static_cast<std::size_t>(
      std::llround(static_cast<double>(chars) * kSecondsPerCharacter * output_rate()));
  return audio::AudioClip::silence(frames, output_rate(), 1);
}

}  // namespace s2st::stages
