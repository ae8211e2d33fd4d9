#include <cstdio>

int main() {
  std::puts("mvl: subcommands not wired up yet");
  return 1;
}
