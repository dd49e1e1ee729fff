#include <iostream>
#include <string>
#include <vector>

#include "akan/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return akan::cli::run_command(args, std::cout, std::cerr);
}
