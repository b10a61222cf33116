#include <string>
#include <vector>

#include "smv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return smv::run_cli(args);
}
