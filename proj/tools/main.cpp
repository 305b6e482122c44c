#include "ctmle/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ctmle::run_cli(argc, argv, std::cout, std::cerr); }
