#include "s2st/cli.hpp"

#include <csignal>
#include <fstream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "s2st/corpus.hpp"
#include "s2st/finetune.hpp"
#include "s2st/metrics.hpp"
#include "s2st/pipeline.hpp"
#include "s2st/service.hpp"
#include "s2st/textnorm.hpp"
#include "s2st/util.hpp"

namespace s2st::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineFlags {
  std::string config;
  std::string voice;
  bool no_cache = false;
  std::string cache_dir;
  std::string asr_model, nmt_model, tts_model;
};

struct Options {
  bool json = false;
  PipelineFlags pipe;
  std::string input, output, text;
  std::vector<std::string> files;
  std::string normalize = "none";
  std::string clips, durations, duration_cache, dev_tsv, out_dir, preset = "paper-60";
  unsigned workers = 4;
  std::string host = "127.0.0.1";
  int port = 8080;
  double timeout = 300.0;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f, bool cache_flags) {
  cmd->add_option("--config", f.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--asr-model", f.asr_model, "Override the ASR model id");
  cmd->add_option("--nmt-model", f.nmt_model, "Override the NMT model id");
  cmd->add_option("--tts-model", f.tts_model, "Override the TTS model id");
  if (cache_flags) {
    cmd->add_flag("--no-cache", f.no_cache, "Do not read or write the stage cache");
    cmd->add_option("--cache-dir", f.cache_dir, "Stage cache directory");
  }
}

pipeline::PipelineConfig resolve_config(const PipelineFlags& f) {
  pipeline::PipelineConfig c = f.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(f.config);
  if (!f.asr_model.empty()) c.asr.model_id = f.asr_model;
  if (!f.nmt_model.empty()) c.nmt.model_id = f.nmt_model;
  if (!f.tts_model.empty()) c.tts.model_id = f.tts_model;
  if (!f.voice.empty()) c.voice_prompt = f.voice;
  if (f.no_cache) c.cache_enabled = false;
  if (!f.cache_dir.empty()) c.cache_dir = f.cache_dir;
  c.validate();
  return c;
}

std::shared_ptr<pipeline::Pipeline> make_pipeline(const pipeline::PipelineConfig& c) {
  return std::make_shared<pipeline::Pipeline>(c, stages::HubClient::from_environment());
}

std::shared_ptr<pipeline::StageCache> make_cache(const pipeline::PipelineConfig& c) {
  if (!c.cache_enabled) return nullptr;
  return std::make_shared<pipeline::StageCache>(c.cache_dir.empty() ? pipeline::default_stage_cache_dir()
                                                                    : c.cache_dir);
}

std::string rate_4dp(double rate) {
  if (std::isinf(rate)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", rate);
  return buf;
}

Json score_json(const metrics::WerScore& s) {
  Json j;
  j["substitutions"] = s.substitutions;
  j["deletions"] = s.deletions;
  j["insertions"] = s.insertions;
  j["ref_length"] = s.ref_length;
  j["errors"] = s.errors();
  const double r = s.rate();
  j["wer"] = std::isfinite(r) ? Json(r) : Json(nullptr);
  return j;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

void emit(std::ostream& out, const Options& o, const Json& result, const std::function<void()>& human) {
  if (o.json) {
    out << result.dump(2) << "\n";
  } else {
    human();
  }
}

fs::path sidecar_path(const fs::path& output, std::string_view suffix) {
  auto p = output;
  p.replace_extension();
  p += suffix;
  return p;
}

// --- commands ---------------------------------------------------------------

int cmd_transcribe(const Options& o, std::ostream& out) {
  auto config = resolve_config(o.pipe);
  auto p = make_pipeline(config);
  auto t = p->transcribe(audio::load_audio(o.input));
  Json j;
  j["text"] = t.text;
  j["language"] = t.language;
  j["backend_id"] = t.backend_id;
  emit(out, o, j, [&] { out << t.text << "\n"; });
  return kExitOk;
}

int cmd_translate_text(const Options& o, std::ostream& out) {
  auto config = resolve_config(o.pipe);
  auto p = make_pipeline(config);
  auto t = stages::translate(p->nmt(), o.text);
  Json j;
  j["text"] = t.text;
  j["source_language"] = t.source_language;
  j["target_language"] = t.target_language;
  j["backend_id"] = t.backend_id;
  emit(out, o, j, [&] { out << t.text << "\n"; });
  return kExitOk;
}

int cmd_synthesize(const Options& o, std::ostream& out) {
  auto config = resolve_config(o.pipe);
  auto p = make_pipeline(config);
  auto voice = p->resolve_voice(o.pipe.voice.empty() ? std::nullopt : std::optional(o.pipe.voice));
  auto clip = stages::synthesize(p->tts(), text::normalize_english(o.text), voice);
  audio::write_audio(clip, o.output);
  Json j;
  j["output"] = o.output;
  j["voice_prompt"] = voice.prompt_id;
  j["sample_rate"] = clip.sample_rate();
  j["duration_seconds"] = audio::duration_seconds(clip);
  emit(out, o, j, [&] {
    out << "wrote " << o.output << " (" << audio::duration_seconds(clip) << " s, voice " << voice.prompt_id << ")\n";
  });
  return kExitOk;
}

int cmd_translate(const Options& o, std::ostream& out) {
  auto config = resolve_config(o.pipe);
  auto p = make_pipeline(config);
  auto input = audio::load_audio(o.input);
  auto cache = make_cache(config);
  auto result = cache ? p->run_cached(input, *cache) : p->run(input);

  const fs::path output(o.output);
  audio::write_audio(result.english_audio, output);
  const Json sidecar = pipeline::result_to_json(result);
  const Json info = pipeline::run_info_to_json(result);
  atomic_write_file(sidecar_path(output, ".json"), sidecar.dump(2) + "\n");
  atomic_write_file(sidecar_path(output, ".run.json"), info.dump(2) + "\n");

  Json j = sidecar;
  for (auto it = info.begin(); it != info.end(); ++it) j[it.key()] = it.value();
  j["output"] = output.string();
  j["sidecar"] = sidecar_path(output, ".json").string();
  emit(out, o, j, [&] {
    out << "hindi:   " << result.hindi_text.text << "\n";
    out << "english: " << result.english_text.text << "\n";
    out << "audio:   " << output.string() << " (" << audio::duration_seconds(result.english_audio) << " s, voice "
        << result.voice_prompt << ")\n";
  });
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  std::function<std::string(const std::string&)> norm = [](const std::string& s) { return s; };
  if (o.normalize == "hindi") norm = [](const std::string& s) { return text::normalize_hindi(s); };
  if (o.normalize == "english") norm = [](const std::string& s) { return text::normalize_english(s); };

  struct Row {
    std::string id, ref, hyp;
  };
  std::vector<Row> rows;
  if (o.files.size() == 2) {
    auto refs = read_lines(o.files[0]);
    auto hyps = read_lines(o.files[1]);
    if (refs.size() != hyps.size()) {
      throw std::runtime_error("line count mismatch: " + std::to_string(refs.size()) + " references, " +
                               std::to_string(hyps.size()) + " hypotheses");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) rows.push_back({std::to_string(i + 1), refs[i], hyps[i]});
  } else if (o.files.size() == 1) {
    auto lines = read_lines(o.files[0]);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto f = split_tabs(lines[i]);
      if (f.size() != 3) {
        throw std::runtime_error(o.files[0] + ":" + std::to_string(i + 1) + ": expected 3 tab-separated fields (id, ref, hyp)");
      }
      if (i == 0 && f[0] == "id" && f[1] == "ref" && f[2] == "hyp") continue;
      rows.push_back({f[0], f[1], f[2]});
    }
  } else {
    throw UsageError("evaluate takes REFS HYPS, or one TSV of id<TAB>ref<TAB>hyp");
  }

  std::vector<std::pair<metrics::Tokens, metrics::Tokens>> pairs;
  Json utterances = Json::array();
  for (const auto& r : rows) {
    auto ref = text::split_words(norm(r.ref));
    auto hyp = text::split_words(norm(r.hyp));
    auto score = metrics::word_error_rate(ref, hyp);
    Json u;
    u["id"] = r.id;
    const Json sj = score_json(score);
    for (auto it = sj.begin(); it != sj.end(); ++it) u[it.key()] = it.value();
    utterances.push_back(u);
    pairs.emplace_back(std::move(ref), std::move(hyp));
  }
  const auto pooled = metrics::corpus_wer(pairs);
  Json j;
  j["utterances"] = utterances;
  j["pooled"] = score_json(pooled);
  emit(out, o, j, [&] {
    out << "WER " << rate_4dp(pooled.rate()) << " (S=" << pooled.substitutions << " D=" << pooled.deletions
        << " I=" << pooled.insertions << " N=" << pooled.ref_length << ", " << rows.size() << " utterances)\n";
  });
  return kExitOk;
}

// Common Voice's clip_durations.tsv: clip<TAB>duration[ms].
std::unordered_map<std::string, double> read_clip_durations(const fs::path& path) {
  std::unordered_map<std::string, double> seconds;
  auto lines = read_lines(path);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split_tabs(lines[i]);
    if (f.size() < 2) continue;
    try {
      seconds[f[0]] = std::stod(f[1]) / 1000.0;
    } catch (const std::exception&) {
    }
  }
  return seconds;
}

int cmd_corpus_stats(const Options& o, std::ostream& out) {
  std::vector<corpus::ClipRecord> records;
  Json malformed = Json::array();
  for (const auto& tsv : o.files) {
    auto parsed = corpus::parse_clips_tsv_file(tsv);
    for (auto& m : parsed.malformed) malformed.push_back({{"file", tsv}, {"line", m.line}, {"reason", m.reason}});
    records.insert(records.end(), parsed.records.begin(), parsed.records.end());
  }

  std::unordered_map<std::string, double> by_clip;
  if (!o.durations.empty()) {
    auto table = read_clip_durations(o.durations);
    for (const auto& r : records) {
      if (auto it = table.find(r.audio_path); it != table.end()) by_clip[r.clip_id] = it->second;
    }
  } else {
    const fs::path clips = o.clips.empty() ? fs::path(o.files.front()).parent_path() / "clips" : fs::path(o.clips);
    std::unique_ptr<corpus::DurationCache> cache;
    if (!o.duration_cache.empty()) cache = std::make_unique<corpus::DurationCache>(o.duration_cache);
    by_clip = corpus::scan_durations(records, clips, cache.get(), o.workers).seconds_by_clip;
  }
  auto stats = corpus::corpus_stats(records, [&](const std::string& id) -> std::optional<double> {
    if (auto it = by_clip.find(id); it != by_clip.end()) return it->second;
    return std::nullopt;
  });

  Json j;
  j["clip_count"] = stats.clip_count;
  j["total_hours"] = stats.total_hours;
  j["validated_hours"] = stats.validated_hours;
  Json splits = Json::object();
  for (const auto& [split, n] : stats.per_split_counts) splits[std::string(corpus::to_string(split))] = n;
  j["per_split_counts"] = splits;
  j["unmeasured"] = stats.unmeasured;
  j["malformed_rows"] = malformed.size();
  j["malformed"] = malformed;
  emit(out, o, j, [&] {
    out << "clips:           " << stats.clip_count << "\n";
    out << "total hours:     " << stats.total_hours << "\n";
    out << "validated hours: " << stats.validated_hours << "\n";
    for (const auto& [split, n] : stats.per_split_counts) out << "  " << corpus::to_string(split) << ": " << n << "\n";
    if (stats.unmeasured) out << "unmeasured clips: " << stats.unmeasured << "\n";
    if (!malformed.empty()) out << "malformed rows skipped: " << malformed.size() << "\n";
  });
  return kExitOk;
}

Json prepared_json(const finetune::PreparedDataset& ds) {
  Json j;
  j["entries"] = ds.entries.size();
  j["skipped_undecodable"] = ds.skipped_undecodable;
  j["skipped_empty_transcript"] = ds.skipped_empty_transcript;
  return j;
}

int cmd_prepare_finetune(const Options& o, std::ostream& out) {
  const fs::path out_dir = fs::absolute(o.out_dir);
  auto config = finetune::make_training_config(o.preset);
  config.output_dir = out_dir / "run";
  finetune::validate_config(config);

  auto parsed = corpus::parse_clips_tsv_file(o.files.front());
  auto manifest = corpus::prepare_manifest(parsed.records, o.clips);
  fs::create_directories(out_dir);

  finetune::PrepareOptions train_opts{out_dir / "train", std::nullopt, std::max(1u, o.workers)};
  auto train = finetune::prepare_dataset(manifest, train_opts);
  manifest.vocab_ref = train.vocab.digest();

  atomic_write_file(out_dir / "manifest.jsonl", manifest.to_jsonl());
  atomic_write_file(out_dir / "vocab.json", train.vocab.to_json());
  atomic_write_file(out_dir / "training_config.json", finetune::config_to_json(config).dump(2) + "\n");

  Json j;
  j["manifest"] = (out_dir / "manifest.jsonl").string();
  j["manifest_entries"] = manifest.entries.size();
  j["missing_audio"] = manifest.missing_audio;
  j["duplicates"] = manifest.duplicates;
  j["malformed_rows"] = parsed.malformed.size();
  j["vocab"] = (out_dir / "vocab.json").string();
  j["vocab_size"] = train.vocab.size();
  j["training_config"] = finetune::config_to_json(config);
  j["train"] = prepared_json(train);

  if (!o.dev_tsv.empty()) {
    auto dev_parsed = corpus::parse_clips_tsv_file(o.dev_tsv);
    auto dev_manifest = corpus::prepare_manifest(dev_parsed.records, o.clips);
    atomic_write_file(out_dir / "dev_manifest.jsonl", dev_manifest.to_jsonl());
    finetune::PrepareOptions dev_opts{out_dir / "dev", train.vocab, std::max(1u, o.workers)};
    j["dev"] = prepared_json(finetune::prepare_dataset(dev_manifest, dev_opts));
  }
  emit(out, o, j, [&] {
    out << "manifest: " << manifest.entries.size() << " clips -> " << (out_dir / "manifest.jsonl").string() << "\n";
    out << "vocab:    " << train.vocab.size() << " symbols -> " << (out_dir / "vocab.json").string() << "\n";
    out << "config:   " << o.preset << " (" << config.epochs << " epochs) -> "
        << (out_dir / "training_config.json").string() << "\n";
    out << "train:    " << train.entries.size() << " prepared, " << train.skipped.size() << " skipped\n";
  });
  return kExitOk;
}

int cmd_voices(const Options& o, std::ostream& out) {
  auto config = resolve_config(o.pipe);
  auto p = make_pipeline(config);
  auto voices = stages::list_voice_prompts(p->tts());
  Json arr = Json::array();
  for (const auto& v : voices) {
    Json item;
    item["prompt_id"] = v.prompt_id;
    item["language"] = v.language;
    item["display_name"] = v.display_name;
    arr.push_back(item);
  }
  Json j;
  j["voices"] = arr;
  emit(out, o, j, [&] {
    for (const auto& v : voices) out << v.prompt_id << "\t" << v.display_name << "\n";
  });
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  auto config = resolve_config(o.pipe);
  service::ServiceOptions opts;
  opts.request_timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout * 1000));
  opts.cache = make_cache(config);
  service::Service svc(make_pipeline(config), opts);
  int port = svc.bind(o.host, o.port);
  if (port < 0) {
    err << "error: cannot bind " << o.host << ":" << o.port << "\n";
    return kExitDomainError;
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    svc.stop();
  });

  Json j;
  j["host"] = o.host;
  j["port"] = port;
  emit(out, o, j, [&] { out << "listening on http://" << o.host << ":" << port << "\n"; });
  out.flush();
  svc.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Hindi to English speech translation toolkit", "s2st"};
  app.require_subcommand(1);

  auto* transcribe = app.add_subcommand("transcribe", "Hindi speech to Hindi text");
  transcribe->add_option("input", o.input, "Audio file")->required()->check(CLI::ExistingFile);
  add_pipeline_flags(transcribe, o.pipe, false);

  auto* translate_text = app.add_subcommand("translate-text", "Hindi text to English text");
  translate_text->add_option("text", o.text, "Hindi text")->required();
  add_pipeline_flags(translate_text, o.pipe, false);

  auto* synthesize = app.add_subcommand("synthesize", "English text to English speech");
  synthesize->add_option("text", o.text, "English text")->required();
  synthesize->add_option("-o,--output", o.output, "Output WAV")->required();
  synthesize->add_option("--voice", o.pipe.voice, "Voice prompt id");
  add_pipeline_flags(synthesize, o.pipe, false);

  auto* translate = app.add_subcommand("translate", "Hindi speech to English speech");
  translate->add_option("input", o.input, "Hindi audio file")->required()->check(CLI::ExistingFile);
  translate->add_option("-o,--output", o.output, "Output WAV; the result sidecar goes next to it")->required();
  translate->add_option("--voice", o.pipe.voice, "Voice prompt id");
  add_pipeline_flags(translate, o.pipe, true);

  auto* evaluate = app.add_subcommand("evaluate", "Word error rate of hypotheses against references");
  evaluate->add_option("files", o.files, "REFS HYPS (one utterance per line) or one TSV of id, ref, hyp")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--normalize", o.normalize, "Normalise both sides first")
      ->check(CLI::IsMember({"none", "hindi", "english"}));

  auto* stats = app.add_subcommand("corpus-stats", "Clip counts and hours of Common Voice TSVs");
  stats->add_option("tsv", o.files, "Clip TSV files")->required()->check(CLI::ExistingFile);
  stats->add_option("--clips", o.clips, "Clip directory (default: <tsv dir>/clips)")->check(CLI::ExistingDirectory);
  stats->add_option("--durations", o.durations, "clip_durations.tsv to use instead of decoding clips")
      ->check(CLI::ExistingFile);
  stats->add_option("--duration-cache", o.duration_cache, "JSON cache of measured durations");
  stats->add_option("--workers", o.workers, "Decoder threads")->check(CLI::Range(1u, 256u));

  auto* prepare = app.add_subcommand("prepare-finetune", "Manifest, vocabulary, audio and config for fine-tuning");
  prepare->add_option("tsv", o.files, "Training clip TSV")->required()->expected(1)->check(CLI::ExistingFile);
  prepare->add_option("--clips", o.clips, "Clip directory")->required()->check(CLI::ExistingDirectory);
  prepare->add_option("--out", o.out_dir, "Output directory")->required();
  prepare->add_option("--dev", o.dev_tsv, "Dev clip TSV, encoded with the training vocabulary")
      ->check(CLI::ExistingFile);
  prepare->add_option("--preset", o.preset, "Training preset")->check(CLI::IsMember(finetune::preset_names()));
  prepare->add_option("--workers", o.workers, "Conversion threads")->check(CLI::Range(1u, 256u));

  auto* serve = app.add_subcommand("serve", "HTTP service");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--timeout", o.timeout, "Per-request timeout in seconds")->check(CLI::PositiveNumber);
  add_pipeline_flags(serve, o.pipe, true);

  auto* voices = app.add_subcommand("voices", "List the TTS voice prompts");
  add_pipeline_flags(voices, o.pipe, false);

  for (auto* sub : app.get_subcommands({})) sub->add_flag("--json", o.json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (transcribe->parsed()) return cmd_transcribe(o, out);
    if (translate_text->parsed()) return cmd_translate_text(o, out);
    if (synthesize->parsed()) return cmd_synthesize(o, out);
    if (translate->parsed()) return cmd_translate(o, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    if (stats->parsed()) return cmd_corpus_stats(o, out);
    if (prepare->parsed()) return cmd_prepare_finetune(o, out);
    if (serve->parsed()) return cmd_serve(o, out, err);
    if (voices->parsed()) return cmd_voices(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pipeline::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pipeline::PipelineError& e) {
    if (o.json) out << pipeline::error_to_json(e).dump(2) << "\n";
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const stages::StageError& e) {
    if (o.json) {
      Json j;
      j["error"] = {{"stage", stages::to_string(e.stage())}, {"backend_id", e.backend_id()}, {"message", e.cause()}};
      out << j.dump(2) << "\n";
    }
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    if (o.json) out << Json{{"error", {{"message", e.what()}}}}.dump(2) << "\n";
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace s2st::cli
