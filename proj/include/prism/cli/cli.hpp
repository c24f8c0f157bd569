#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prism::cli {

// Exit codes shared by every verb.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;  // policy denial, verification failure, component down
inline constexpr int kUsage = 2;

// Runs one `prism` invocation. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prism::cli
