#include "s2st/service.hpp"

#include <future>
#include <thread>

#include "httplib.h"
#include "s2st/util.hpp"

namespace s2st::service {

namespace {

using Json = nlohmann::ordered_json;

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
  int status;
};

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

Json error_body(const std::string& message, std::optional<stages::StageKind> stage = std::nullopt,
                const std::string& backend_id = {}) {
  Json err;
  if (stage) err["stage"] = stages::to_string(*stage);
  if (!backend_id.empty()) err["backend_id"] = backend_id;
  err["message"] = message;
  Json j;
  j["error"] = err;
  return j;
}

// Multipart "audio" part, or a raw audio/* body.
audio::AudioClip audio_from_request(const httplib::Request& req) {
  std::string data;
  if (req.is_multipart_form_data()) {
    if (!req.has_file("audio")) throw HttpError(400, "multipart body has no 'audio' part");
    data = req.get_file_value("audio").content;
  } else if (req.get_header_value("Content-Type").starts_with("audio/")) {
    data = req.body;
  } else {
    throw HttpError(400, "expected multipart/form-data with an 'audio' part");
  }
  if (data.empty()) throw HttpError(422, "audio part is empty");
  try {
    return audio::decode_audio(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  } catch (const audio::AudioError& e) {
    throw HttpError(400, std::string("cannot decode audio: ") + e.what());
  }
}

std::optional<std::string> voice_from_request(const httplib::Request& req) {
  if (req.has_file("voice")) return req.get_file_value("voice").content;
  if (req.has_param("voice")) return req.get_param_value("voice");
  return std::nullopt;
}

bool wants_raw_wav(const httplib::Request& req) {
  const auto accept = req.get_header_value("Accept");
  return accept.find("audio/wav") != std::string::npos && accept.find("application/json") == std::string::npos;
}

}  // namespace

struct Service::Impl {
  std::shared_ptr<pipeline::Pipeline> pipeline;
  ServiceOptions options;
  httplib::Server server;

  // Runs `work` on its own thread so a slow backend cannot hold the response
  // past the deadline. The thread keeps running after a timeout; it only
  // touches shared state.
  template <typename T>
  T with_deadline(std::function<T()> work) {
    auto promise = std::make_shared<std::promise<T>>();
    auto future = promise->get_future();
    std::thread([promise, work = std::move(work)] {
      try {
        promise->set_value(work());
      } catch (...) {
        promise->set_exception(std::current_exception());
      }
    }).detach();
    if (future.wait_for(options.request_timeout) != std::future_status::ready) {
      throw HttpError(504, "request exceeded the " + std::to_string(options.request_timeout.count()) +
                               " ms timeout");
    }
    return future.get();
  }

  void guarded(httplib::Response& res, const std::function<void()>& handler) {
    try {
      handler();
    } catch (const HttpError& e) {
      send_json(res, e.status, error_body(e.what()));
    } catch (const pipeline::PipelineError& e) {
      send_json(res, 500, pipeline::error_to_json(e));
    } catch (const stages::StageError& e) {
      send_json(res, 500, error_body(e.cause(), e.stage(), e.backend_id()));
    } catch (const pipeline::InputError& e) {
      send_json(res, 422, error_body(e.what()));
    } catch (const std::exception& e) {
      send_json(res, 500, error_body(e.what()));
    }
  }

  void routes() {
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_json(res, res.status, error_body(httplib::status_message(res.status)));
    });

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, Json{{"status", "ok"}});
    });

    server.Get("/v1/voices", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        Json voices = Json::array();
        for (const auto& v : stages::list_voice_prompts(pipeline->tts())) {
          Json item;
          item["prompt_id"] = v.prompt_id;
          item["language"] = v.language;
          item["display_name"] = v.display_name;
          voices.push_back(item);
        }
        send_json(res, 200, Json{{"voices", voices}});
      });
    });

    server.Post("/v1/transcribe", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto clip = audio_from_request(req);
        auto p = pipeline;
        auto t = with_deadline<stages::Transcript>([p, clip] { return p->transcribe(clip); });
        Json body;
        body["text"] = t.text;
        body["language"] = t.language;
        body["backend_id"] = t.backend_id;
        send_json(res, 200, body);
      });
    });

    server.Post("/v1/translate-text", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nlohmann::json in;
        try {
          in = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
          throw HttpError(400, "body must be a JSON object with a 'text' string");
        }
        if (!in.is_object() || !in.contains("text") || !in["text"].is_string()) {
          throw HttpError(400, "body must be a JSON object with a 'text' string");
        }
        auto p = pipeline;
        std::string text = in["text"].get<std::string>();
        auto t = with_deadline<stages::Translation>([p, text] { return stages::translate(p->nmt(), text); });
        Json body;
        body["text"] = t.text;
        body["source_language"] = t.source_language;
        body["target_language"] = t.target_language;
        body["backend_id"] = t.backend_id;
        send_json(res, 200, body);
      });
    });

    server.Post("/v1/translate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto clip = audio_from_request(req);
        auto voice = voice_from_request(req);
        auto p = pipeline;
        auto cache = options.cache;
        auto result = with_deadline<pipeline::PipelineResult>([p, cache, clip, voice] {
          return cache ? p->run_cached(clip, *cache, voice) : p->run(clip, voice);
        });
        auto wav = audio::encode_wav_pcm16(result.english_audio);
        Json body = pipeline::result_to_json(result);
        const Json info = pipeline::run_info_to_json(result);
        for (auto it = info.begin(); it != info.end(); ++it) body[it.key()] = it.value();
        if (wants_raw_wav(req)) {
          res.status = 200;
          const std::string compact = body.dump();
          res.set_header("X-S2ST-Result",
                         base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(compact.data()), compact.size())));
          res.set_content(std::string(wav.begin(), wav.end()), "audio/wav");
          return;
        }
        body["audio"] = base64_encode(wav);
        send_json(res, 200, body);
      });
    });
  }
};

Service::Service(std::shared_ptr<pipeline::Pipeline> pipeline, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  if (!pipeline) throw std::invalid_argument("service needs a pipeline");
  impl_->pipeline = std::move(pipeline);
  impl_->options = std::move(options);
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::serve() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace s2st::service
