"""Canonical desk-scale setup used by the CLI defaults and the test suite.

The arm is a plausible 2-link stand-in for two stacked rotary modules of the
same product line: identical gear ratio and limits on both joints, distinct
friction per joint.  All synthetic experiments compare against this ground
truth, so the exact values only need to be physically reasonable.
"""

from __future__ import annotations

import numpy as np

from .dynamics import ArmParameters, Plant
from .friction import LibraryModel, StribeckModel, default_friction_library
from .signals import EncoderSpec

RPM_25 = 25.0 * 2.0 * np.pi / 60.0  # module velocity limit, rad/s


def canonical_arm() -> ArmParameters:
    return ArmParameters(
        link_mass=(4.0, 2.5),
        link_length=(0.35, 0.30),
        link_com_distance=(0.175, 0.15),
        link_inertia=(0.05, 0.03),
        gear_ratio=(161.0, 161.0),
        motor_constant=0.123,
        gravity=9.81,
        torque_limit=(44.8, 44.8),
        velocity_limit=(RPM_25, RPM_25),
    )


def canonical_friction() -> tuple[StribeckModel, StribeckModel]:
    """Ground-truth Stribeck curves; deliberately different per joint."""
    return (
        StribeckModel(a1=1.10, a2=1.80, a3=10.0, a4=0.30, a5=2.0),
        StribeckModel(a1=0.70, a2=1.30, a3=18.0, a4=0.20, a5=3.0),
    )


def canonical_plant() -> Plant:
    return Plant(canonical_arm(), canonical_friction())


def inspan_friction() -> tuple[LibraryModel, LibraryModel]:
    """Ground truth inside the candidate library span: viscous + one tanh."""
    library = default_friction_library()
    coef1 = np.zeros(len(library))
    coef1[library.labels.index("v")] = 1.50
    coef1[library.labels.index("tanh(10v)")] = 2.20
    coef2 = np.zeros(len(library))
    coef2[library.labels.index("v")] = 0.90
    coef2[library.labels.index("tanh(20v)")] = 1.60
    return LibraryModel(coef1, library), LibraryModel(coef2, library)


def inspan_plant() -> Plant:
    return Plant(canonical_arm(), inspan_friction())


def wrong_friction() -> tuple[StribeckModel, StribeckModel]:
    """A deliberately poor prior: isolated-module style, far too little drag."""
    return tuple(m.scaled(0.3) for m in canonical_friction())


def default_encoder() -> EncoderSpec:
    return EncoderSpec(resolution=1e-4, velocity_word_resolution=1e-2,
                       noise_std=1e-5)


def benchmark_signal(dt: float = 0.01, duration: float = 12.0,
                     snr_db: float = 20.0, seed: int = 0):
    """Smooth two-tone signal with white noise, for differentiator studies.

    Returns ``(t, y_noisy, y_clean, ydot_true, top_frequency_hz)``.  The
    noise level realizes the requested signal-to-noise ratio in power.
    """
    t = np.arange(int(round(duration / dt)) + 1) * dt
    f_low, f_high = 0.4, 2.0
    clean = np.sin(2.0 * np.pi * f_low * t) + 0.4 * np.sin(2.0 * np.pi * f_high * t)
    ydot = (2.0 * np.pi * f_low * np.cos(2.0 * np.pi * f_low * t)
            + 0.4 * 2.0 * np.pi * f_high * np.cos(2.0 * np.pi * f_high * t))
    rng = np.random.default_rng(seed)
    noise_std = float(np.sqrt(np.mean(clean**2) / 10.0 ** (snr_db / 10.0)))
    noisy = clean + rng.normal(0.0, noise_std, size=t.shape)
    return t, noisy, clean, ydot, f_high
