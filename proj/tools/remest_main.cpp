#include <iostream>

#include "remest/commands.hpp"

int main(int argc, char** argv) { return remest::run_cli(argc, argv, std::cout, std::cerr); }
