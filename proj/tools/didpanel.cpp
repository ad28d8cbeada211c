#include <iostream>

#include "didpanel/cli.hpp"

int main(int argc, char** argv) { return didpanel::cli::run(argc, argv, std::cout, std::cerr); }
