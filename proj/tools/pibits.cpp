#include <iostream>

#include "pibits/cli.hpp"

int main(int argc, char** argv) {
  pibits::cli::install_signal_handlers();
  return pibits::cli::run_cli(argc, argv, std::cout, std::cerr);
}
