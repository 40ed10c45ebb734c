#include "fracthm/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return fracthm::app::cli_main(argc, argv, std::cout, std::cerr); }
