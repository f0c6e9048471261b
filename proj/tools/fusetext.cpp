#include <iostream>

#include "fusetext/cli.hpp"

int main(int argc, char** argv) { return fusetext::cli::run(argc, argv, std::cout, std::cerr); }
