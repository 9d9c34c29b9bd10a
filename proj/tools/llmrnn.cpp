#include <iostream>

#include "llmrnn/cli.hpp"

int main(int argc, char** argv) { return llmrnn::run_cli(argc, argv, std::cout, std::cerr); }
