#include "inrgan/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return inrgan::run_cli(argc, argv, std::cout, std::cerr); }
