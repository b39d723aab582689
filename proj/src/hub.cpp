#include <cstdlib>

#include "json.hpp"
#include "s2st/stages.hpp"
#include "s2st/util.hpp"
#include "worker_process.hpp"

namespace s2st::stages {

namespace {

constexpr const char* kManifestName = ".s2st-manifest.json";

class PythonFetcher : public ModelFetcher {
 public:
  void fetch(const std::string& model_id, const std::filesystem::path& destination) override {
    std::string output;
    int rc = detail::run_command(
        {detail::python_executable(), detail::worker_script(), "fetch", model_id, destination.string()}, output);
    if (rc != 0) {
      throw BackendError("network failure fetching '" + model_id + "' (exit " + std::to_string(rc) +
                         "): " + output.substr(output.size() > 400 ? output.size() - 400 : 0));
    }
  }
};

void write_manifest(const std::filesystem::path& dir, const std::string& model_id) {
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kManifestName) paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) files[p.lexically_relative(dir).generic_string()] = sha256_file(p);
  nlohmann::ordered_json m;
  m["model_id"] = model_id;
  m["files"] = files;
  atomic_write_file(dir / kManifestName, m.dump(2) + "\n");
}

}  // namespace

std::shared_ptr<ModelFetcher> make_python_fetcher() { return std::make_shared<PythonFetcher>(); }

HubClient::HubClient(std::filesystem::path cache_root, std::shared_ptr<ModelFetcher> fetcher, bool offline)
    : root_(std::move(cache_root)), fetcher_(std::move(fetcher)), offline_(offline) {}

std::filesystem::path HubClient::default_cache_root() {
  if (const char* env = std::getenv("S2ST_MODEL_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
    return std::filesystem::path(xdg) / "s2st" / "models";
  }
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::filesystem::path(home) / ".cache" / "s2st" / "models";
  }
  return std::filesystem::temp_directory_path() / "s2st-models";
}

std::shared_ptr<HubClient> HubClient::from_environment() {
  const char* off = std::getenv("S2ST_OFFLINE");
  bool offline = off && *off && std::string_view(off) != "0";
  return std::make_shared<HubClient>(default_cache_root(), make_python_fetcher(), offline);
}

std::filesystem::path HubClient::snapshot_dir(const std::string& model_id) const {
  return root_ / sha256_hex(model_id);
}

bool HubClient::cached(const std::string& model_id) const {
  std::error_code ec;
  return std::filesystem::is_regular_file(snapshot_dir(model_id) / kManifestName, ec);
}

std::filesystem::path HubClient::resolve(const std::string& model_id) {
  std::lock_guard lock(mutex_);
  auto dir = snapshot_dir(model_id);
  if (cached(model_id)) return dir;
  if (offline_) throw BackendError("offline mode: '" + model_id + "' is not in the model cache " + root_.string());
  if (!fetcher_) throw BackendError("no fetcher configured for '" + model_id + "'");

  auto staging = dir;
  staging += ".partial";
  std::error_code ec;
  std::filesystem::remove_all(staging, ec);
  std::filesystem::create_directories(staging);
  ++fetches_;
  try {
    fetcher_->fetch(model_id, staging);
  } catch (const BackendError&) {
    std::filesystem::remove_all(staging, ec);
    throw;
  } catch (const std::exception& e) {
    std::filesystem::remove_all(staging, ec);
    throw BackendError("network failure fetching '" + model_id + "': " + e.what());
  }
  write_manifest(staging, model_id);
  std::filesystem::remove_all(dir, ec);
  std::filesystem::rename(staging, dir);
  return dir;
}

}  // namespace s2st::stages
