#include <cstdio>
int main() { std::puts("iqcc"); return 0; }
