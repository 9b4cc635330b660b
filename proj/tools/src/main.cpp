#include <iostream>

#include "malforge/cli.hpp"

int main(int argc, char** argv) { return malforge::cli_main(argc, argv, std::cout, std::cerr); }
