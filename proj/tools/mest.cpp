#include <iostream>

#include "mest/cli.hpp"

int main(int argc, char** argv) { return mest::cli::run(argc, argv, std::cout, std::cerr); }
