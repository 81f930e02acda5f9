#include <iostream>
#include <string>
#include <vector>

#include "transient/cli_io.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return transient::cli_dispatch(args, std::cout, std::cerr);
}
