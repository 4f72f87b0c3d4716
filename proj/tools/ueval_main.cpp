#include <iostream>

#include "ueval/cli.hpp"

int main(int argc, char** argv) { return ueval::cli::run(argc, argv, std::cout, std::cerr); }
