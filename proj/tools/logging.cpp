#include "logging.hpp"

#include "wxaug/review.hpp"

namespace wxaug::cli {

void Logger::write(std::string_view level, std::string_view event, nlohmann::json fields) {
  nlohmann::json line = nlohmann::json::object();
  line["ts"] = format_timestamp(now_utc());
  line["level"] = level;
  line["command"] = command_;
  line["event"] = event;
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) line[k] = std::move(v);
  }
  const std::string text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mutex_);
  sink_ << text << '\n';
  sink_.flush();
}

}  // namespace wxaug::cli
