// Placeholder CLI entry point; filled in once the simulation stack exists.
#include <cstdio>

int main() {
  std::puts("qsme: not yet wired");
  return 0;
}
