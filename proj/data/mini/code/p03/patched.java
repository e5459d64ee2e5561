// p03
int div(int n, int d) {
  return n / (d == 0 ? 1 : d);
}
