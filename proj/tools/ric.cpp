#include <iostream>

#include "ric/cli.hpp"

int main(int argc, char** argv) { return ric::run_cli(argc, argv, std::cout, std::cerr); }
