// p09
int div(int n, int d) {
  if (d == 0) throw new ArithmeticException();
  return n / d;
}
