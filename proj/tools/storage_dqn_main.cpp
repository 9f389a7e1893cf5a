#include <iostream>

#include "storage_dqn/cli.hpp"

int main(int argc, char** argv) { return storage_dqn::run_cli(argc, argv, std::cout, std::cerr); }
