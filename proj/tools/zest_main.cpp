#include <iostream>

#include "zest/cli.hpp"

int main(int argc, char **argv)
{
    return zest::cli::main(argc, argv, std::cout, std::cerr);
}
