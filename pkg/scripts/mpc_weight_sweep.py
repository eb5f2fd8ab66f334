#!/usr/bin/env python3
"""Closed-loop sweep behind the default MPC tuning.

Runs the perfect-model and missing-friction scenarios over a small grid of
horizons and weight ratios and prints the tracking error and correction
effort for each.  The shipped defaults (horizon 15, position weight 100,
velocity weight 1, input weight 0.01) sit in the flat region of this table:

    python3 scripts/mpc_weight_sweep.py
"""

import numpy as np

from frictionid import presets
from frictionid.dynamics import Plant
from frictionid.mpc import MpcConfig, run_closed_loop
from frictionid.trajectory import (SineTrajectorySpec, attach_feedforward,
                                   gravity_compensated_pair)


def main():
    true_plant = Plant(presets.canonical_arm(), presets.inspan_friction())
    spec = SineTrajectorySpec(amplitude=0.5, omega_start=1.0, omega_end=2.2,
                              duration=6.0, ramp_duration=1.2, sample_dt=0.02)
    print(f"{'N':>3} {'q_pos':>7} {'r':>7} | {'rmse perfect':>13} "
          f"{'rmse no-fric':>13} {'mean|du| no-fric':>17}")
    for horizon in (10, 15, 25):
        for q_pos in (30.0, 100.0, 300.0):
            for r in (0.003, 0.01, 0.03):
                cfg = MpcConfig(horizon=horizon,
                                state_weight=np.diag([q_pos, q_pos, 1.0, 1.0]),
                                input_weight=np.diag([r, r]))
                ref = attach_feedforward(gravity_compensated_pair(spec),
                                         true_plant)
                perfect = run_closed_loop(true_plant, true_plant, ref, cfg)
                frictionless = Plant(true_plant.params, None)
                ref2 = attach_feedforward(gravity_compensated_pair(spec),
                                          frictionless)
                compensating = run_closed_loop(true_plant, frictionless, ref2,
                                               cfg)
                print(f"{horizon:3d} {q_pos:7.0f} {r:7.3f} | "
                      f"{perfect.summary()['tracking_rmse']:13.3e} "
                      f"{compensating.summary()['tracking_rmse']:13.3e} "
                      f"{compensating.summary()['mean_abs_umpc']:17.5f}")


if __name__ == "__main__":
    main()
