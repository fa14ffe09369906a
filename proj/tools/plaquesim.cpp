#include <iostream>

#include "plaquesim/cli.hpp"

int main(int argc, char** argv) { return plaque::run_cli(argc, argv, std::cout, std::cerr); }
