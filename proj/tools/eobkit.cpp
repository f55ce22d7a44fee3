#include <iostream>

#include "eobkit/cli.hpp"

int main(int argc, char** argv) { return eobkit::run_subcommand(argc, argv, std::cout, std::cerr); }
