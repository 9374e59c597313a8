# Encoder source. Input instance file:
#   p <n> <m> u
#   <u> <v>        (m lines, vertices numbered 1..n)
# The bound k is a positive integer.
from pysat.formula import CNF, IDPool


def encode(instance, k):
    n, edges = instance
    pool = IDPool()

    def x(v, c):
        # x(v, c) == (v - 1) * k + c
        return pool.id(("x", v, c))

    for v in range(1, n + 1):
        for c in range(1, k + 1):
            x(v, c)

    cnf = CNF()
    for v in range(1, n + 1):
        cnf.append([x(v, c) for c in range(1, k + 1)])
    for (u, v) in edges:
        for c in range(1, k + 1):
            cnf.append([-x(u, c), -x(v, c)])
    return cnf, pool
