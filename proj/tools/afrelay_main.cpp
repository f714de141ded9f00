#include "afrelay/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return afrelay::cli::run(argc, argv, std::cout, std::cerr);
}
