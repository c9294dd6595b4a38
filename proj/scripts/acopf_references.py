#!/usr/bin/env python3
"""Solve AC OPF with PYPOWER for every scenario of an optlin-scenarios file.

Output is an optlin-reference document: one dispatch (MW, per generator bus)
per scenario, null where the solver fails. Only the quadratic cost term is
kept so the reference optimizes the same objective as the DC model.
"""
import argparse
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from pypower.api import ppoption, runopf
from pypower.idx_bus import BUS_I, PD, QD
from pypower.idx_gen import GEN_BUS, GEN_STATUS, PG
from pypower.idx_cost import COST, NCOST

_CASE = None
_OPT = ppoption(VERBOSE=0, OUT_ALL=0)


def read_matpower(path):
    text = re.sub(r"%.*", "", open(path).read())
    ppc = {"version": "2", "baseMVA": float(re.search(r"mpc\.baseMVA\s*=\s*([^;\s]+)", text).group(1))}
    for name in ("bus", "gen", "branch", "gencost"):
        body = re.search(r"mpc\.%s\s*=\s*\[(.*?)\]" % name, text, re.S).group(1)
        rows = [r.split() for r in re.split(r"[;\n]", body) if r.strip()]
        ppc[name] = np.array(rows, dtype=float)
    return ppc


def _init(case_path):
    global _CASE
    ppc = read_matpower(case_path)
    cost = ppc["gencost"]
    n = cost[:, NCOST].astype(int)
    if np.any(n != 3):
        sys.exit("expected quadratic gencost rows (NCOST = 3)")
    cost[:, COST + 1] = 0.0
    cost[:, COST + 2] = 0.0
    _CASE = ppc


def _solve(args):
    bus_ids, pd, qd = args
    ppc = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in _CASE.items()}
    row = {int(b): i for i, b in enumerate(ppc["bus"][:, BUS_I])}
    for b, p, q in zip(bus_ids, pd, qd):
        ppc["bus"][row[b], PD] = p
        ppc["bus"][row[b], QD] = q
    res = runopf(ppc, _OPT)
    if not res["success"]:
        return None
    out = {}
    for g in res["gen"]:
        if g[GEN_STATUS] > 0:
            out[int(g[GEN_BUS])] = out.get(int(g[GEN_BUS]), 0.0) + float(g[PG])
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", required=True, help="MATPOWER case file")
    ap.add_argument("--scenarios", required=True, help="optlin-scenarios JSON")
    ap.add_argument("--out", required=True)
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()

    with open(args.scenarios) as f:
        doc = json.load(f)
    if doc.get("format") != "optlin-scenarios":
        sys.exit("not an optlin-scenarios file")
    bus_ids = doc["bus"]
    work = [(bus_ids, s["pd_mw"], s["qd_mvar"]) for s in doc["scenarios"]]

    with ProcessPoolExecutor(max_workers=args.jobs, initializer=_init, initargs=(args.case,)) as pool:
        results = list(pool.map(_solve, work, chunksize=8))

    gen_bus = sorted({b for r in results if r for b in r})
    pg = [None if r is None else [r[b] for b in gen_bus] for r in results]
    failed = sum(r is None for r in results)
    with open(args.out, "w") as f:
        json.dump({"format": "optlin-reference", "version": 1, "gen_bus": gen_bus, "pg_mw": pg,
                   "source": "pypower runopf, quadratic cost term only"}, f)
    print(f"{len(results) - failed} solved, {failed} failed -> {args.out}")


if __name__ == "__main__":
    main()
