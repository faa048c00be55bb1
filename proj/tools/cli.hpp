#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssrcps::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kAbstain = 3;

// args excludes the program name. JSON goes to `out` (or --output), human
// summaries and warnings to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssrcps::cli
