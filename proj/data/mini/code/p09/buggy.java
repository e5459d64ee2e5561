// p09
int div(int n, int d) {
  return n / d;
}
