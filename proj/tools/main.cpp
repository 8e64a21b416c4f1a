#include <string>
#include <vector>

#include "posegroup/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return posegroup::run_cli(args);
}
