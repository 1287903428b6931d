"""Raw and corrected TPI visibility of both channels versus beamsplitter mode overlap.

Writes a CSV table (one row per overlap value) to stdout.
"""

import argparse
from dataclasses import replace

import numpy as np

from qdcascade.analysis import analyze_tpi, correlate
from qdcascade.config import preset_experiment_config
from qdcascade.constants import G2_RESIDUAL
from qdcascade.detection import BeamsplitterParams
from qdcascade.experiments import run_tpi


def visibilities(cfg, channel, bin_width=101):
    window = 3 * cfg.period + 2000
    hp = correlate(*run_tpi(cfg, channel, True), bin_width, window, period=cfg.period)
    hc = correlate(*run_tpi(cfg, channel, False), bin_width, window, period=cfg.period)
    return analyze_tpi(hp, hc, channel, cfg.detectors[0].dark_rate, cfg.beamsplitter.mode_overlap, G2_RESIDUAL[channel])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--periods", type=int, default=500_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--points", type=int, default=6)
    args = p.parse_args()
    base = preset_experiment_config("desk", seed=args.seed, workers=args.workers).with_periods(args.periods)
    print("mode_overlap,channel,method,raw,raw_error,apd_corrected,fully_corrected")
    for m in np.linspace(0.75, 1.0, args.points):
        cfg = replace(base, beamsplitter=BeamsplitterParams(0.5, float(m)))
        for ch in ("XX", "X"):
            for method, v in visibilities(cfg, ch).items():
                print(f"{m:.3f},{ch},{method},{v.raw:.4f},{v.raw_error:.4f},{v.apd_corrected:.4f},{v.fully_corrected:.4f}")


if __name__ == "__main__":
    main()
