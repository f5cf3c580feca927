#include <iostream>
#include <string>
#include <vector>

#include "scenesearch/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return scenesearch::run_cli(args, std::cout, std::cerr);
}
