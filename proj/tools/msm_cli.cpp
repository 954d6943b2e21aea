#include <iostream>

#include "msm/cli.hpp"

int main(int argc, char** argv) { return msm::run_cli(argc, argv, std::cout, std::cerr); }
