// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "tgcn/cli.hpp"

int main(int argc, char** argv) { return tgcn::cli::run(argc, argv, std::cout, std::cerr); }
