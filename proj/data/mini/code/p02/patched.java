// p02
int div(int n, int d) {
  if (d == 0) return 0; return n / d;
}
