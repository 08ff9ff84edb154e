#include <iostream>

#include "hicmd/cli.hpp"

int main(int argc, char** argv) { return hicmd::cli::run(argc, argv, std::cout, std::cerr); }
