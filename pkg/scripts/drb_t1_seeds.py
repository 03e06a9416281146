#!/usr/bin/env python3
"""Per-seed |log10(r/r_tomo)| of each protocol at one noise point; shows how much circuit sampling moves it."""

import argparse

import numpy as np

from qubench.noise import standard_noise_model
from qubench.protocols import ProtocolRunSpec, estimate, run_cells
from qubench.tomography import mean_layer_infidelity


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", default="t1")
    ap.add_argument("--strength", type=float, default=0.1)
    ap.add_argument("--seeds", type=int, default=6)
    ap.add_argument("--k", type=int, default=20)
    args = ap.parse_args()

    noise = standard_noise_model(args.kind, args.strength)
    print("seed " + " ".join(f"{p:>7s}" for p in ("DRB", "MRB", "CRB")))
    for seed in range(args.seeds):
        out = []
        for protocol in ("DRB", "MRB", "CRB"):
            spec = ProtocolRunSpec(protocol, 2, 0.75, circuits_per_depth=args.k, noise=noise, seed=seed)
            cells = run_cells(spec)
            fit = estimate(spec, [s for c in cells for s in c.samples], n_bootstrap=0)
            ref = mean_layer_infidelity([l for c in cells for l in c.core_layers], 2, noise)
            out.append(abs(np.log10(fit.r / ref)))
        print(f"{seed:4d} " + " ".join(f"{x:7.3f}" for x in out), flush=True)


if __name__ == "__main__":
    main()
