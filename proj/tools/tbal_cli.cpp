#include <iostream>

#include "tbal/cli.hpp"

int main(int argc, char** argv) { return tbal::cli::main(argc, argv, std::cout, std::cerr); }
