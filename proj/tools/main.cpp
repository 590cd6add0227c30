#include <iostream>

#include "wwho/cli.hpp"

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);
    return wwho::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
