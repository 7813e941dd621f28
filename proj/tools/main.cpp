#include <iostream>

#include "wxaug/cli.hpp"

int main(int argc, char** argv) {
  return wxaug::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
