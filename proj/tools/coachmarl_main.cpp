#include <iostream>

#include "coachmarl/cli.hpp"

int main(int argc, char** argv) { return coachmarl::run_cli(argc, argv, std::cout, std::cerr); }
