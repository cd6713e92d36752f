#include <string>
#include <vector>

#include "epd/cli.hpp"

int main(int argc, char** argv) {
  return epd::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
