#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return rtrack::cli::parse_and_dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
