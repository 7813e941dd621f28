#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wxaug::cli {

inline constexpr std::string_view kToolName = "wxaug";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Runs one command line (program name excluded). Human-readable results go to `out`,
/// JSON log lines to `err`. Returns 0 on success, 1 on failure, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wxaug::cli
