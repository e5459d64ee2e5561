// p11
int div(int n, int d) {
  return n / d;
}
