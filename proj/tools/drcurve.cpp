#include <iostream>

#include "drcurve/cli.hpp"

int main(int argc, char** argv) {
  return drcurve::cli::run(argc, argv, std::cout, std::cerr);
}
