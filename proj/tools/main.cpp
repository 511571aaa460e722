#include <iostream>

#include "owcdc/cli.hpp"

int main(int argc, char** argv) { return owcdc::cli::run(argc, argv, std::cout, std::cerr); }
