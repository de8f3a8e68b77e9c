void dead_clobber(void)
{
  __asm__ __volatile__("nop" : : : "ecx");
}
