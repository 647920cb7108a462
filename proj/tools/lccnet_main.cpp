#include "lccnet/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return lccnet::cli::run_cli(argc, argv, std::cout, std::cerr); }
