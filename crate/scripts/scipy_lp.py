#!/usr/bin/env python3
"""External LP solver for `nnrepair --solver external`.

Reads an LP dump on stdin and answers with `optimal` followed by the
solution, or with `infeasible` / `unbounded`.
"""
import sys

import numpy as np
from scipy.optimize import linprog


def main():
    lines = [l for l in sys.stdin.read().splitlines() if l.strip()]
    m, n = (int(t) for t in lines[0].split())
    c = np.array([float(t) for t in lines[1].split()]) if m else np.zeros(0)
    a = np.zeros((n, m))
    b = np.zeros(n)
    for i, line in enumerate(lines[2 : 2 + n]):
        lhs, rhs = line.split("<=")
        a[i] = [float(t) for t in lhs.split()]
        b[i] = float(rhs)
    res = linprog(
        c,
        A_ub=a if n else None,
        b_ub=b if n else None,
        bounds=[(None, None)] * m,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 0:
        print("optimal")
        print(" ".join(repr(float(v)) for v in res.x))
    elif res.status == 2:
        print("infeasible")
    elif res.status == 3:
        print("unbounded")
    else:
        print(res.message, file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
