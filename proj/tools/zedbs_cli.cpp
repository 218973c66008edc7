#include <iostream>

#include "zedbs/cli.hpp"

int main(int argc, char** argv) { return zedbs::run_cli(argc, argv, std::cout, std::cerr); }
