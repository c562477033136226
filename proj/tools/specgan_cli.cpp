#include <iostream>
#include <string>
#include <vector>

#include "specgan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return specgan::run_cli(args, std::cout, std::cerr);
}
