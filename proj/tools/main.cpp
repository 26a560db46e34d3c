#include "jnpdl/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return jnpdl::run_cli(argc, argv, std::cout, std::cerr); }
