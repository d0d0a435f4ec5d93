#include "firesale/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return firesale::cli::run(argc, argv, std::cout, std::cerr); }
