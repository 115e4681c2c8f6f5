#include <iostream>

#include "spoofmeter/cli.hpp"

int main(int argc, char** argv) {
  return spoofmeter::cli::run(argc, argv, std::cout, std::cerr);
}
