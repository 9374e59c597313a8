# Encoder source. Input instance file:
#   p <n> <m> d
#   <u> <v>        (m lines, arc from u to v, vertices numbered 1..n)
# The bound k is a non-negative integer.
from pysat.card import CardEnc, EncType
from pysat.formula import CNF, IDPool


def encode(instance, k):
    n, arcs = instance
    pool = IDPool()

    def d(v):
        # d(v) == v; true means v is removed
        return pool.id(("del", v))

    def r(u, v):
        return pool.id(("r", u, v))

    for v in range(1, n + 1):
        d(v)
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            if u != v:
                r(u, v)

    cnf = CNF()
    for (u, v) in arcs:
        cnf.append([d(u), d(v), r(u, v)])
        cnf.append([d(u), d(v), -r(v, u)])
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            for w in range(1, n + 1):
                if len({u, v, w}) == 3:
                    cnf.append([-r(u, v), -r(v, w), r(u, w)])

    # auxiliary variables follow all of the above
    card = CardEnc.atmost([d(v) for v in range(1, n + 1)], bound=min(k, n),
                          vpool=pool, encoding=EncType.seqcounter)
    cnf.extend(card.clauses)
    return cnf, pool
