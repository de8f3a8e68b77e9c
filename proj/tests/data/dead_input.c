int dead_input(int x, int unused)
{
  int y;
  __asm__("movl %1, %0" : "=r"(y) : "r"(x), "r"(unused));
  return y;
}
