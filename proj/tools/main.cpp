#include <iostream>
#include <string>
#include <vector>

#include "keyrate/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return keyrate::run(args, std::cout, std::cerr);
}
