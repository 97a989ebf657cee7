#include <iostream>

#include "maple/harness.hpp"

int main(int argc, char** argv) {
  return maple::harness::run_cli(argc, argv, std::cout, std::cerr);
}
