#include <iostream>

#include "s2st/cli.hpp"

int main(int argc, char** argv) { return s2st::cli::run_cli(argc, argv, std::cout, std::cerr); }
