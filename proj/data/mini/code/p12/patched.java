// p12
int div(int n, int d) {
  if (d != 0) return n / d; throw new ArithmeticException();
}
