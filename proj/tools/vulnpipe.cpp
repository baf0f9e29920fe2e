#include <iostream>
#include <string>
#include <vector>

#include "vulnpipe/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  vulnpipe::CliContext ctx{std::cout, std::cerr, {}};
  return vulnpipe::run_cli(args, ctx);
}
