#include <cstdio>

// Command line entry point. Subcommands are registered as the modules land;
// see README for usage.
int main() {
  std::printf("hns: no subcommands wired yet\n");
  return 1;
}
