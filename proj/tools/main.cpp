#include <iostream>

#include "cli_app.hpp"

int main(int argc, char** argv) {
  return aerocue::cli::run_cli(argc, argv, {std::cin, std::cout, std::cerr}, aerocue::cli::process_env());
}
