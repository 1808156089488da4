#include <iostream>

#include "ewa/cli.hpp"

int main(int argc, char** argv) {
    return ewa::cli::run(argc, argv, std::cout, std::cerr);
}
