#include <iostream>
#include <string>
#include <vector>

#include "cyst/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cyst::run_cli(args, std::cout, std::cerr);
}
