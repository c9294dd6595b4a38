#!/usr/bin/env python3
"""Textbook B-theta DC OPF on a MATPOWER case, solved with cvxpy.

    min  sum_i c2_i * base * pg_i^2            (p.u.)
    s.t. Bbus theta = Cg pg - pd,  theta_ref = 0
         |(theta_f - theta_t) / x| <= rateA / base   (rated branches)
         0 <= pg <= pmax

Bbus is built from 1/x only (no taps, shifts, resistance or shunts).
Writes the optimal dispatch in MW per generator bus.
"""
import argparse
import json
import re

import cvxpy as cp
import numpy as np


def read_matpower(path):
    text = re.sub(r"%.*", "", open(path).read())
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([^;\s]+)", text).group(1))
    out = {}
    for name in ("bus", "gen", "branch", "gencost"):
        body = re.search(r"mpc\.%s\s*=\s*\[(.*?)\]" % name, text, re.S).group(1)
        out[name] = np.array([r.split() for r in re.split(r"[;\n]", body) if r.strip()], dtype=float)
    return base, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    base, m = read_matpower(args.case)
    bus, gen, br, cost = m["bus"], m["gen"], m["branch"], m["gencost"]
    ids = [int(b) for b in bus[:, 0]]
    pos = {b: i for i, b in enumerate(ids)}
    nb = len(ids)
    ref = next(i for i in range(nb) if int(bus[i, 1]) == 3)

    br = br[br[:, 10] > 0]
    f = np.array([pos[int(b)] for b in br[:, 0]])
    t = np.array([pos[int(b)] for b in br[:, 1]])
    a = np.zeros((len(br), nb))
    a[np.arange(len(br)), f] = 1.0
    a[np.arange(len(br)), t] = -1.0
    y = 1.0 / br[:, 3]
    bbus = a.T @ np.diag(y) @ a

    on = gen[:, 7] > 0
    gen, cost = gen[on], cost[on]
    gbus = sorted({int(b) for b in gen[:, 0]})
    cg = np.zeros((nb, len(gbus)))
    pmax = np.zeros(len(gbus))
    c2 = np.zeros(len(gbus))
    for k, b in enumerate(gbus):
        cg[pos[b], k] = 1.0
        rows = gen[:, 0] == b
        pmax[k] = gen[rows, 8].sum() / base
        c2[k] = cost[rows, 4].min() * base

    pd = bus[:, 2] / base
    pg = cp.Variable(len(gbus))
    th = cp.Variable(nb)
    cons = [bbus @ th == cg @ pg - pd, th[ref] == 0, pg >= 0, pg <= pmax]
    rated = br[:, 5] > 0
    if rated.any():
        flow = cp.multiply(y[rated], (a[rated] @ th))
        cons += [cp.abs(flow) <= br[rated, 5] / base]
    prob = cp.Problem(cp.Minimize(cp.sum(cp.multiply(c2, cp.square(pg)))), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-13, tol_gap_rel=1e-13, tol_feas=1e-13)
    if prob.status != cp.OPTIMAL:
        raise SystemExit(f"solver status {prob.status}")

    flows = y * (a @ th.value)
    binding = [int(k) for k in np.where(rated)[0] if abs(abs(flows[k]) - br[k, 5] / base) < 1e-7]
    with open(args.out, "w") as fh:
        json.dump({"format": "optlin-dispatch", "version": 1, "gen_bus": gbus,
                   "pg_mw": [float(v) * base for v in pg.value],
                   "objective_pu": float(prob.value), "binding_branches": binding,
                   "source": "cvxpy/Clarabel, B-theta with 1/x susceptances"}, fh, indent=1)
    print(f"objective {prob.value:.12g}, binding branches {binding}")


if __name__ == "__main__":
    main()
