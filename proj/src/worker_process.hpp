#pragma once

#include <string>
#include <sys/types.h>
#include <vector>

#include "json.hpp"

namespace s2st::detail {

/// A child process speaking line-delimited JSON over stdin/stdout.
/// Not thread-safe; callers serialise requests.
class WorkerProcess {
 public:
  explicit WorkerProcess(std::vector<std::string> argv);
  ~WorkerProcess();
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  /// Sends one request and waits for one reply. A reply with an "error"
  /// member is turned into std::runtime_error.
  nlohmann::json request(const nlohmann::json& message);

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

/// Runs a command to completion; returns its exit status and captured stdout+stderr.
int run_command(const std::vector<std::string>& argv, std::string& output);

/// Path of the Python helper that hosts real checkpoints.
std::string worker_script();
std::string python_executable();

}  // namespace s2st::detail
