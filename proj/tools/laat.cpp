#include "laat/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return laat::cli::run_cli(argc, argv, std::cout, std::cerr); }
