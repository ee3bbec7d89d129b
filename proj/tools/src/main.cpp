#include <iostream>

#include "maskmatch_cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return maskmatch::cli::run(args, std::cout, std::cerr);
}
