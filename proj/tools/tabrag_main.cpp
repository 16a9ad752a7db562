#include "tabrag/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tabrag::cli::run(argc, argv, std::cout, std::cerr); }
