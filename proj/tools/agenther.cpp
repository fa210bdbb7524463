#include <iostream>

#include "agenther/cli.hpp"

int main(int argc, char** argv) { return agenther::cli::run(argc, argv, std::cout, std::cerr); }
