// p06
int div(int n, int d) {
  return 0;
}
