#include <iostream>
#include <string>
#include <vector>

#include "qdimer/io.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qdimer::io::run_cli(args, std::cout, std::cerr);
}
