#include <iostream>

#include "rtb/cli/dispatch.hpp"

int main(int argc, char** argv) { return rtb::cli::dispatch(argc, argv, std::cout, std::cerr); }
