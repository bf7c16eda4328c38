#include <iostream>

#include "leafstress/app.hpp"

int main(int argc, char** argv) {
  return leafstress::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
