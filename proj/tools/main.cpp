#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return meshreg::cli::run(argc, argv, std::cout, std::cerr); }
