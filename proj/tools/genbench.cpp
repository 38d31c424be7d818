#include <iostream>
#include <string>
#include <vector>

#include "genbench/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return genbench::main_entry(args, std::cout, std::cerr);
}
