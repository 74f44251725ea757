#include <iostream>

#include "mediaflow/cli.hpp"

int main(int argc, char** argv) {
  return mediaflow::cli_dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
