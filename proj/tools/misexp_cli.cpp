#include <iostream>

#include "misexp/runner.hpp"

int main(int argc, char** argv) { return misexp::run_cli(argc, argv, std::cout, std::cerr); }
