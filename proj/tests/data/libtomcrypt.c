/* Key schedule load in the style of a cryptographic library: two words are
   read through the key pointer but the chunk declares no memory access. */
unsigned int load_key_sum(const unsigned int *key)
{
  unsigned int sum;
  __asm__("movl (%1), %0\n\t"
          "addl 4(%1), %0"
          : "=&r"(sum)
          : "r"(key)
          : "cc");
  return sum;
}
