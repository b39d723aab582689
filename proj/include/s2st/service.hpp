#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "s2st/pipeline.hpp"

namespace s2st::service {

struct ServiceOptions {
  std::chrono::milliseconds request_timeout{std::chrono::seconds(300)};
  /// Null disables caching for /v1/translate.
  std::shared_ptr<pipeline::StageCache> cache;
};

/// HTTP/1.1 front end over one shared Pipeline.
///
///   GET  /health            {"status":"ok"}
///   GET  /v1/voices         {"voices":[...]}
///   POST /v1/transcribe     multipart "audio" -> {"text", ...}
///   POST /v1/translate-text {"text"} -> {"text", ...}
///   POST /v1/translate      multipart "audio" (+ optional "voice") -> result JSON with base64 WAV,
///                           or the WAV itself when the client accepts only audio/wav
///
/// Errors are {"error": {"message", "stage"?, ...}} with 400 for malformed
/// payloads, 422 for empty audio, 500 for stage failures, 504 on timeout.
class Service {
 public:
  Service(std::shared_ptr<pipeline::Pipeline> pipeline, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool serve();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace s2st::service
