#include "derivkit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return derivkit::run_cli(argc, argv, std::cout, std::cerr); }
