#include <iostream>

#include "cli.hpp"
#include "ddsd/runtime.hpp"

int main(int argc, char** argv) {
  ddsd::tune_allocator();
  return ddsd::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
