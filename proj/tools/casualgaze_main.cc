#include <iostream>

#include "casualgaze/commands.h"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return casualgaze::RunCli(argc, argv, std::cin, std::cout, std::cerr);
}
