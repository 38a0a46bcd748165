#include "corrsync/cli.hpp"

#include <string>
#include <vector>

int main(int argc, char** argv) {
  return corrsync::run(std::vector<std::string>(argv, argv + argc));
}
