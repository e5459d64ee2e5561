// p07
int div(int n, int d) {
  return n / d + 0;
}
