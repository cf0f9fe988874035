#include <iostream>

#include "infant/cli.hpp"

int main(int argc, char** argv) { return infant::cli::run(argc, argv, std::cout, std::cerr); }
