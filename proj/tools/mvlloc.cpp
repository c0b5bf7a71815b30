#include <iostream>

#include "mvlloc/cli.hpp"

int main(int argc, char** argv) { return mvl::run_cli(argc, argv, std::cout, std::cerr); }
