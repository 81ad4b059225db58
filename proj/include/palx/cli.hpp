#pragma once

#include <string>
#include <vector>

namespace palx {

// Full command surface: synth / train / eval / predict / render.
// Returns 0 on success, 1 on usage or configuration errors, 2 on data
// errors, 3 on numerical aborts. Suitable for in-process testing.
int run_cli(const std::vector<std::string>& args);

}  // namespace palx
