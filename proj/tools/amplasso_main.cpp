#include <iostream>

#include "amplasso/cli.hpp"

int main(int argc, char** argv)
{
    return amplasso::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
