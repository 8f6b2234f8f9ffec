#include <iostream>

#include "expflow/cli.hpp"

int main(int argc, char** argv) { return expflow::cli::run(argc, argv, std::cout, std::cerr); }
