#include "fedtheory_cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return fedtheory::cli::run(argc, argv, std::cout, std::cerr);
}
