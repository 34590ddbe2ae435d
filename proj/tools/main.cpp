#include <iostream>
#include <string>
#include <vector>

#include "rnadesign/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rnadesign::run_cli(args, std::cerr);
}
