#include "commands.hpp"

#include <spdlog/cfg/env.h>

int main(int argc, char** argv) {
  spdlog::cfg::load_env_levels();
  return pmmtalk::cli::run(std::vector<std::string>(argv, argv + argc));
}
