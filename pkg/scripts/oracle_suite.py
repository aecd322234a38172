"""Edge-diffraction model against the physical-optics oracle.

Runs the knife-edge, free-space and Babinet checks, then the randomized
silhouette comparison, and prints the per-region error and fallback rate.

    python scripts/oracle_suite.py [--n 150] [--seed 2024] [--csv agreement.csv]
"""

import argparse
import csv

from thzsim.hbs.validation import (
    babinet_suite,
    free_space_suite,
    knife_edge_suite,
    oracle_agreement,
    random_silhouettes,
    summarize_agreement,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=150)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--csv")
    args = ap.parse_args()
    for name, fn in (("knife edge", knife_edge_suite), ("free space", free_space_suite), ("babinet", babinet_suite)):
        print(f"{name:11s} {'pass' if fn()['pass'] else 'FAIL'}")
    rows = oracle_agreement(random_silhouettes(args.n, args.seed))
    s = summarize_agreement(rows)
    for region in ("lit", "transition", "shadow"):
        r = s[region]
        tol = "reported" if r["tol_db"] is None else f"tol {r['tol_db']} dB"
        print(
            f"{region:10s} n={r['n']:3d} max {r['max_abs_err_db']:.2f} dB  p95 {r['p95_abs_err_db']:.2f} dB  "
            f"fallback {r['fallback_fraction']:.0%}  ({tol})"
        )
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "nu_min", "edge_db", "po_db", "error_db", "fallback", "region"])
            for r in rows:
                w.writerow([r.kind, r.nu_min, r.edge_db, r.po_db, r.error_db, int(r.fallback), r.region])


if __name__ == "__main__":
    main()
