#include <iostream>

#include "shearfront/cli.hpp"

int main(int argc, char** argv) { return shearfront::cli::run(argc, argv, std::cout, std::cerr); }
