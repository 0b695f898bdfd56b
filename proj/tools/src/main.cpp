#include <iostream>

#include "mfai_cli/cli.hpp"

int main(int argc, char** argv) { return mfai::cli::run(argc, argv, std::cout, std::cerr); }
