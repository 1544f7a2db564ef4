#include <iostream>

#include "rationalift_cli/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rationalift::cli::run(args, std::cout, std::cerr);
}
