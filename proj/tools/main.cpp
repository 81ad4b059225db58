#include <vector>

#include "palx/cli.hpp"

int main(int argc, char** argv) {
  return palx::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
