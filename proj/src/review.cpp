#include "wxaug/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <tuple>

#include <json.hpp>

#include "wxaug/io.hpp"
#include "wxaug/json_codec.hpp"

namespace wxaug {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kKept: return "kept";
    case Verdict::kRejectedHallucination: return "rejected_hallucination";
    case Verdict::kRejectedUnrealistic: return "rejected_unrealistic";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(std::string_view s) {
  if (s == "kept") return Verdict::kKept;
  if (s == "rejected_hallucination") return Verdict::kRejectedHallucination;
  if (s == "rejected_unrealistic") return Verdict::kRejectedUnrealistic;
  return std::nullopt;
}

ReviewState review_state_for(Verdict v) {
  switch (v) {
    case Verdict::kKept: return ReviewState::kKept;
    case Verdict::kRejectedHallucination: return ReviewState::kRejectedHallucination;
    case Verdict::kRejectedUnrealistic: return ReviewState::kRejectedUnrealistic;
  }
  return ReviewState::kPending;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto secs = floor<seconds>(t);
  const auto millis = (t - secs).count();
  const std::time_t tt = system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(millis));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  std::tm tm{};
  int millis = 0;
  int consumed = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year, &tm.tm_mon,
                  &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &millis, &consumed) != 7 ||
      static_cast<std::size_t>(consumed) != str.size()) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t tt = timegm(&tm);
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::from_time_t(tt)) +
         std::chrono::milliseconds(millis);
}

Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::string decision_to_line(const ReviewDecision& d) {
  json j = json::object();
  j["image_id"] = d.image_id;
  j["verdict"] = to_string(d.verdict);
  j["reviewer"] = d.reviewer;
  j["timestamp"] = format_timestamp(d.timestamp);
  return j.dump();
}

ReviewDecision decision_from_line(std::string_view line) {
  json j = json::parse(line);
  ReviewDecision d;
  d.image_id = codec::string_field(j, "image_id");
  d.verdict = codec::enum_field(j, "verdict", parse_verdict);
  d.reviewer = codec::string_field(j, "reviewer");
  d.timestamp = codec::enum_field(j, "timestamp", parse_timestamp);
  return d;
}

namespace {

void append_durably(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open log " + path.string() + ": " + std::strerror(errno));
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw std::runtime_error("cannot append to log: " + std::string(std::strerror(err)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

ReviewSession::ReviewSession(DatasetManifest manifest, std::vector<ReviewDecision> log)
    : manifest_(std::move(manifest)) {
  for (std::size_t i = 0; i < manifest_.records.size(); ++i) {
    index_.emplace(manifest_.records[i].id, i);
    if (manifest_.records[i].is_augmented()) queue_.push_back(i);
  }
  std::sort(queue_.begin(), queue_.end(), [this](std::size_t a, std::size_t b) {
    const auto& ra = manifest_.records[a];
    const auto& rb = manifest_.records[b];
    return std::tie(ra.condition, *ra.source_id, ra.id) < std::tie(rb.condition, *rb.source_id, rb.id);
  });
  log_.reserve(log.size());
  for (auto& d : log) {
    try {
      checked_augmented(d.image_id);
    } catch (const ReviewError& e) {
      throw ReviewError(ReviewError::Kind::kBadLog, std::string("log entry ") +
                                                        std::to_string(log_.size() + 1) + ": " +
                                                        e.what());
    }
    apply(d);
  }
}

namespace {

struct ParsedLog {
  std::vector<ReviewDecision> decisions;
  std::optional<std::size_t> torn_at;  // offset of an unparseable unterminated tail
  bool missing_newline = false;        // last entry is complete but unterminated
};

ParsedLog parse_log(const std::string& text) {
  ParsedLog out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    ++line_no;
    if (end == std::string::npos) {
      // Tail of an interrupted append.
      try {
        out.decisions.push_back(decision_from_line(std::string_view(text).substr(pos)));
        out.missing_newline = true;
      } catch (const std::exception&) {
        out.torn_at = pos;
      }
      break;
    }
    std::string_view line = std::string_view(text).substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.decisions.push_back(decision_from_line(line));
    } catch (const std::exception& e) {
      throw ReviewError(ReviewError::Kind::kBadLog,
                        "log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<ReviewDecision> read_log(const fs::path& log_path) {
  if (!fs::exists(log_path)) return {};
  return parse_log(read_text_file(log_path)).decisions;
}

ReviewSession ReviewSession::open(DatasetManifest manifest, const fs::path& log_path) {
  std::vector<ReviewDecision> log;
  if (fs::exists(log_path)) {
    ParsedLog parsed = parse_log(read_text_file(log_path));
    if (parsed.torn_at) fs::resize_file(log_path, *parsed.torn_at);
    if (parsed.missing_newline) append_durably(log_path, "");
    log = std::move(parsed.decisions);
  }
  ReviewSession session(std::move(manifest), std::move(log));
  session.log_path_ = log_path;
  return session;
}

const ImageRecord& ReviewSession::checked_augmented(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw ReviewError(ReviewError::Kind::kUnknownId, "unknown image id '" + std::string(id) + "'");
  }
  const ImageRecord& r = manifest_.records[it->second];
  if (!r.is_augmented()) {
    throw ReviewError(ReviewError::Kind::kNotAugmented,
                      "image '" + std::string(id) + "' is not an augmented image");
  }
  return r;
}

void ReviewSession::apply(const ReviewDecision& decision) {
  log_.push_back(decision);
  latest_[decision.image_id] = log_.size() - 1;
}

std::optional<ReviewPair> ReviewSession::pair(std::string_view augmented_id) const {
  auto it = index_.find(std::string(augmented_id));
  if (it == index_.end() || !manifest_.records[it->second].is_augmented()) return std::nullopt;
  ImageRecord aug = manifest_.records[it->second];
  aug.review_state = state_of(aug.id);
  const ImageRecord& original = manifest_.records[index_.at(*aug.source_id)];
  return ReviewPair{original, std::move(aug)};
}

std::optional<ReviewPair> ReviewSession::next_pending(std::optional<WeatherCondition> filter) const {
  for (std::size_t i : queue_) {
    const ImageRecord& r = manifest_.records[i];
    if (filter && r.condition != *filter) continue;
    if (state_of(r.id) == ReviewState::kPending) return pair(r.id);
  }
  return std::nullopt;
}

bool ReviewSession::record_decision(const ReviewDecision& decision) {
  checked_augmented(decision.image_id);
  if (auto it = latest_.find(decision.image_id); it != latest_.end()) {
    const ReviewDecision& current = log_[it->second];
    if (current.verdict == decision.verdict && current.reviewer == decision.reviewer) return false;
  }
  if (log_path_) append_durably(*log_path_, decision_to_line(decision));
  apply(decision);
  return true;
}

ReviewState ReviewSession::state_of(std::string_view id) const {
  const std::string key(id);
  if (auto it = latest_.find(key); it != latest_.end()) {
    return review_state_for(log_[it->second].verdict);
  }
  auto idx = index_.find(key);
  if (idx == index_.end()) throw ReviewError(ReviewError::Kind::kUnknownId, "unknown image id '" + key + "'");
  return manifest_.records[idx->second].review_state;
}

Progress ReviewSession::progress() const {
  Progress out;
  for (std::size_t i : queue_) {
    const ImageRecord& r = manifest_.records[i];
    ConditionProgress& p = out[r.condition];
    switch (state_of(r.id)) {
      case ReviewState::kKept: ++p.kept; break;
      case ReviewState::kRejectedHallucination: ++p.rejected_hallucination; break;
      case ReviewState::kRejectedUnrealistic: ++p.rejected_unrealistic; break;
      default: ++p.pending; break;
    }
  }
  return out;
}

DatasetManifest ReviewSession::effective_manifest() const {
  DatasetManifest out = manifest_;
  for (auto& r : out.records) {
    if (r.is_augmented()) r.review_state = state_of(r.id);
  }
  return out;
}

FinalizeResult finalize_filtered(const DatasetManifest& manifest, bool allow_pending) {
  std::size_t pending = 0;
  for (const auto& r : manifest.records) {
    if (r.is_augmented() && r.review_state == ReviewState::kPending) ++pending;
  }
  if (pending > 0 && !allow_pending) {
    throw ReviewError(ReviewError::Kind::kPendingRemain,
                      std::to_string(pending) + " augmented image(s) still pending review");
  }

  FinalizeResult result;
  result.manifest.framework = manifest.framework;
  for (const auto& r : manifest.records) {
    if (!r.is_augmented()) {
      result.manifest.records.push_back(r);
      continue;
    }
    FinalizeCounts& c = result.counts[r.condition];
    switch (r.review_state) {
      case ReviewState::kKept:
        ++c.kept;
        result.manifest.records.push_back(r);
        break;
      case ReviewState::kRejectedHallucination: ++c.rejected_hallucination; break;
      case ReviewState::kRejectedUnrealistic: ++c.rejected_unrealistic; break;
      default: ++c.dropped_pending; break;
    }
  }
  std::unordered_map<std::string, bool> kept_ids;
  for (const auto& r : result.manifest.records) kept_ids.emplace(r.id, true);
  for (const auto& [id, split] : manifest.splits) {
    if (kept_ids.contains(id)) result.manifest.splits.emplace(id, split);
  }
  return result;
}

}  // namespace wxaug
