// p01
int div(int n, int d) {
  return d == 0 ? 0 : n / d;
}
