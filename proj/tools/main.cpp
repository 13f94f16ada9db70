#include <iostream>

#include "phonoscope/cli.hpp"

int main(int argc, char** argv) { return phonoscope::cli::run(argc, argv, std::cout, std::cerr); }
