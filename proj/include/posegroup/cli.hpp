#pragma once

#include <string>
#include <vector>

namespace posegroup {

// Entry point behind the `posegroup` binary; also callable from tests.
// Returns the process exit status.
int run_cli(const std::vector<std::string>& args);

}  // namespace posegroup
