#pragma once

#include <mutex>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

namespace wxaug::cli {

// One JSON object per line on the given stream (stderr in the real binary).
class Logger {
 public:
  Logger(std::ostream& sink, std::string command) : sink_(sink), command_(std::move(command)) {}

  void info(std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
    write("info", event, std::move(fields));
  }
  void warn(std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
    write("warn", event, std::move(fields));
  }
  void error(std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
    write("error", event, std::move(fields));
  }

  void set_command(std::string command) { command_ = std::move(command); }

 private:
  void write(std::string_view level, std::string_view event, nlohmann::json fields);

  std::mutex mutex_;
  std::ostream& sink_;
  std::string command_;
};

}  // namespace wxaug::cli
