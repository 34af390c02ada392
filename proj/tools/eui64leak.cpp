#include <iostream>
#include <string>
#include <vector>

#include "eui64leak/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return eui64leak::run_cli(args, std::cout, std::cerr);
}
