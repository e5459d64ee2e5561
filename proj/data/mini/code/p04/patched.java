// p04
int div(int n, int d) {
  return n / Math.abs(d);
}
