#!/usr/bin/env python3
"""Write a PYPOWER built-in case as a MATPOWER m-file (five matrix blocks)."""
import argparse
import importlib


def fmt_row(row):
    return "\t" + "\t".join(f"{v:.10g}" for v in row) + ";"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("case", help="PYPOWER case name, e.g. case39")
    ap.add_argument("out")
    args = ap.parse_args()
    mod = importlib.import_module(f"pypower.{args.case}")
    ppc = getattr(mod, args.case)()
    lines = [f"function mpc = {args.case}", "%% exported from PYPOWER", "",
             "mpc.version = '2';", f"mpc.baseMVA = {ppc['baseMVA']:g};", ""]
    for name in ("bus", "gen", "branch", "gencost"):
        lines.append(f"mpc.{name} = [")
        lines.extend(fmt_row(r) for r in ppc[name])
        lines.append("];")
        lines.append("")
    with open(args.out, "w") as f:
        f.write("\n".join(lines))


if __name__ == "__main__":
    main()
