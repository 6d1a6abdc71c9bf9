#include <iostream>
#include <string>
#include <vector>

#include "cnv/cli.hpp"

int main(int argc, char** argv) {
  return cnv::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
