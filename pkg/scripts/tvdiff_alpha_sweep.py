#!/usr/bin/env python3
"""Sweep the TV-differentiation penalty on the noisy benchmark signal.

This is the calibration run behind the shipped defaults: the benchmark
weight ``alpha = 1e-2`` used in the acceptance suite, and the pipeline
stage weights in the default config (``alpha_velocity = 1e-5`` for the
finely quantized positions, ``alpha_acceleration = 1e-4`` for the second
pass).  Run it after changing the differentiator to re-check the choice:

    python3 scripts/tvdiff_alpha_sweep.py
"""

import numpy as np

from frictionid.presets import benchmark_signal
from frictionid.signals import TVDiffConfig, finite_difference, tvdiff


def main():
    t, noisy, _, ydot_true, f_high = benchmark_signal()
    dt = t[1] - t[0]
    fd = finite_difference(noisy, dt)
    rmse_fd = np.sqrt(np.mean((fd - ydot_true) ** 2))
    print(f"benchmark: n={len(t)}, dt={dt:g}, finite-difference RMSE={rmse_fd:.4f}")

    w = 2 * np.pi * f_high
    basis = np.column_stack([np.cos(w * t), np.sin(w * t)])
    amp_true = np.linalg.norm(np.linalg.lstsq(basis, ydot_true, rcond=None)[0])

    print(f"{'alpha':>10} {'rmse':>8} {'fd/tv':>6} {'attenuation':>12}")
    for alpha in np.logspace(-4, -1, 13):
        res = tvdiff(noisy, TVDiffConfig(alpha=float(alpha), iterations=60,
                                         dt=dt))
        rmse = np.sqrt(np.mean((res.derivative - ydot_true) ** 2))
        amp = np.linalg.norm(np.linalg.lstsq(basis, res.derivative,
                                             rcond=None)[0])
        print(f"{alpha:10.2e} {rmse:8.4f} {rmse_fd / rmse:6.2f} "
              f"{1 - amp / amp_true:12.3f}")


if __name__ == "__main__":
    main()
