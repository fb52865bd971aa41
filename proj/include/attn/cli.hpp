#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attn::cli {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit status: 0 on success, 1 on any
/// error, 2 on a usage error, 3 when a truth check fails.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Environment variable that overrides the remote classifier endpoint from a config file.
inline constexpr const char* kEndpointEnv = "ATTN_CLASSIFIER_URL";

} // namespace attn::cli
