#include <iostream>

#include "groundjudge/cli.hpp"

int main(int argc, char** argv) {
  return groundjudge::RunCli({argv + 1, argv + argc}, std::cout, std::cerr);
}
