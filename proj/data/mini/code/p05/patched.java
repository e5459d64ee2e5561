// p05
int div(int n, int d) {
  return n;
}
