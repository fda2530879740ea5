#include <iostream>

#include "ogs/cli.hpp"

int main(int argc, char** argv) {
  return ogs::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
