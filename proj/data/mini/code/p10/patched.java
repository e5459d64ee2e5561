// p10
int div(int n, int d) {
  if (d == 0) throw new IllegalArgumentException(); return n / d;
}
