"""Beam-domain 4x4 capacity with and without passive reflecting surfaces.

Sweeps the SNR for one preset and prints the ensemble mean and 90 % interval
of the capacity with the PRS off and on all clusters.

    python scripts/capacity_study.py [--preset open_square] [--seeds 500] [--snr 0 10 20 30]
"""

import argparse

from thzsim.mimo import apply_prs, beam_capacity, capacity_summary
from thzsim.qd_channel import PRESET_NAMES, cir_ensemble, load_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="open_square", choices=PRESET_NAMES)
    ap.add_argument("--seeds", type=int, default=500)
    ap.add_argument("--beams", type=int, default=4)
    ap.add_argument("--snr", type=float, nargs="+", default=[0.0, 10.0, 20.0, 30.0])
    ap.add_argument("--waterfilling", action="store_true")
    args = ap.parse_args()
    cirs = cir_ensemble(load_preset(args.preset), range(args.seeds))
    boosted = [apply_prs(c) for c in cirs]
    print("snr_db,prs,mean,p5,p95")
    for snr in args.snr:
        for label, ens in (("off", cirs), ("all", boosted)):
            s = capacity_summary([beam_capacity(c, args.beams, snr, waterfilling=args.waterfilling) for c in ens])
            print(f"{snr:g},{label},{s['mean']:.3f},{s['p5']:.3f},{s['p95']:.3f}")


if __name__ == "__main__":
    main()
