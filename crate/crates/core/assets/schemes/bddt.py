# Encoder source. Input instance file: CSV, numeric columns followed by a
# label column; an optional first header line. The bound k is the number of
# levels below the root (k >= 1).
from itertools import combinations

from pysat.formula import CNF, IDPool


def exactly_one(cnf, lits):
    cnf.append(list(lits))
    for a, b in combinations(lits, 2):
        cnf.append([-a, -b])


def encode(instance, k):
    rows, labels = instance          # rows: list of feature vectors, labels: 0..C-1
    nf = len(rows[0])
    classes = max(labels) + 1
    inner = 2 ** k - 1               # nodes 1..inner, children of t are 2t and 2t+1
    leaves = 2 ** k                  # numbered 1..leaves from left to right

    cuts = []
    for f in range(nf):
        vals = sorted(set(row[f] for row in rows))
        cuts.append([(a + b) / 2 for a, b in zip(vals, vals[1:])] + [float("inf")])

    pool = IDPool()
    a = lambda t, f: pool.id(("a", t, f))          # node t tests feature f (1-based)
    s = lambda t, f, j: pool.id(("s", t, f, j))    # node t uses cuts[f-1][j-1]
    c = lambda l, y: pool.id(("c", l, y))          # leaf l predicts y
    d = lambda r, t: pool.id(("d", r, t))          # row r goes to 2t at node t

    for t in range(1, inner + 1):
        for f in range(1, nf + 1):
            a(t, f)
        for f in range(1, nf + 1):
            for j in range(1, len(cuts[f - 1]) + 1):
                s(t, f, j)
    for l in range(1, leaves + 1):
        for y in range(classes):
            c(l, y)
    for r in range(1, len(rows) + 1):
        for t in range(1, inner + 1):
            d(r, t)

    cnf = CNF()
    for t in range(1, inner + 1):
        exactly_one(cnf, [a(t, f) for f in range(1, nf + 1)])
        for f in range(1, nf + 1):
            js = range(1, len(cuts[f - 1]) + 1)
            cnf.append([-a(t, f)] + [s(t, f, j) for j in js])
            for j in js:
                cnf.append([-s(t, f, j), a(t, f)])
            for j1, j2 in combinations(js, 2):
                cnf.append([-s(t, f, j1), -s(t, f, j2)])
    for l in range(1, leaves + 1):
        exactly_one(cnf, [c(l, y) for y in range(classes)])

    for r, row in enumerate(rows, start=1):
        for t in range(1, inner + 1):
            for f in range(1, nf + 1):
                for j, cut in enumerate(cuts[f - 1], start=1):
                    cnf.append([-s(t, f, j), d(r, t) if row[f - 1] <= cut else -d(r, t)])
        for l in range(1, leaves + 1):
            clause, h = [], inner + l
            while h > 1:
                t = h // 2
                clause.append(-d(r, t) if h % 2 == 0 else d(r, t))
                h = t
            cnf.append(clause[::-1] + [c(l, labels[r - 1])])
    return cnf, pool
