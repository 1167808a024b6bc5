#include <iostream>

#include "torsion/cli.hpp"

int main(int argc, char** argv) { return torsion::run_cli(argc, argv, std::cout, std::cerr); }
