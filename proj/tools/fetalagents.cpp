#include <iostream>

#include "fetal/cli.hpp"

int main(int argc, char** argv) { return fetal::run_cli(argc, argv, std::cout, std::cerr); }
