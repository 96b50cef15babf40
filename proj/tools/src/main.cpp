#include <iostream>
#include <string>
#include <vector>

#include "crowdloss/cli/commands.hpp"

int main(int argc, char** argv) {
  return crowdloss::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
