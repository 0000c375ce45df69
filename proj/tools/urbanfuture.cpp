#include <iostream>

#include "urbanfuture/cli.hpp"

int main(int argc, char** argv) { return urbanfuture::run_cli(argc, argv, std::cout, std::cerr); }
