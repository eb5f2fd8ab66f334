"""Velocity-dependent joint friction models.

Two representations are supported: a five-parameter Stribeck curve

    tau(v) = a1*v + a2*tanh(a3*v) + a4*exp(-a5*|v|)*tanh(3*a3*v)

and a sparse linear combination of candidate functions of the joint
velocity (the form produced by sparse regression).  Both are odd in ``v``
as long as the candidate set contains no even terms with nonzero weight.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class StribeckModel:
    """Stribeck friction curve parameters.

    a1: viscous coefficient (N m s/rad), a2: Coulomb level (N m),
    a3: tanh sharpness (s/rad), a4: low-speed superelevation (N m),
    a5: superelevation decay rate (s/rad).
    """

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "a4", "a5"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.a3 <= 0:
            raise ValueError("a3 must be strictly positive")
        if self.a5 < 0:
            raise ValueError("a5 must be non-negative")

    @property
    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4, self.a5])

    def torque(self, v):
        v = np.asarray(v, dtype=float)
        return (self.a1 * v
                + self.a2 * np.tanh(self.a3 * v)
                + self.a4 * np.exp(-self.a5 * np.abs(v)) * np.tanh(3.0 * self.a3 * v))

    def slope(self, v):
        """d tau / d v; smooth everywhere (the |v| kink multiplies tanh(0))."""
        v = np.asarray(v, dtype=float)
        sech2 = 1.0 / np.cosh(self.a3 * v) ** 2
        sech2_3 = 1.0 / np.cosh(3.0 * self.a3 * v) ** 2
        decay = np.exp(-self.a5 * np.abs(v))
        return (self.a1
                + self.a2 * self.a3 * sech2
                + self.a4 * decay * (3.0 * self.a3 * sech2_3
                                     - self.a5 * np.sign(v) * np.tanh(3.0 * self.a3 * v)))

    def scaled(self, factor: float) -> "StribeckModel":
        """Same shape with all torque-valued parameters scaled."""
        return StribeckModel(self.a1 * factor, self.a2 * factor, self.a3,
                             self.a4 * factor, self.a5)


@dataclass(frozen=True)
class LibraryColumn:
    label: str
    fn: callable
    dfn: callable


def _tanh_column(gain: float) -> LibraryColumn:
    g = float(gain)
    label = f"tanh({g:g}v)"
    return LibraryColumn(label,
                         lambda v, g=g: np.tanh(g * v),
                         lambda v, g=g: g / np.cosh(g * v) ** 2)


_BASE_COLUMNS = {
    "1": LibraryColumn("1", lambda v: np.ones_like(np.asarray(v, dtype=float)),
                       lambda v: np.zeros_like(np.asarray(v, dtype=float))),
    "v": LibraryColumn("v", lambda v: np.asarray(v, dtype=float),
                       lambda v: np.ones_like(np.asarray(v, dtype=float))),
    # sgn(0) := 0; the derivative is taken as 0 everywhere (subgradient at 0).
    "sgn(v)": LibraryColumn("sgn(v)", lambda v: np.sign(v),
                            lambda v: np.zeros_like(np.asarray(v, dtype=float))),
}

_TANH_LABEL = re.compile(r"^tanh\((\d+(?:\.\d+)?)v\)$")


@dataclass(frozen=True)
class FunctionLibrary:
    """Ordered candidate functions of the joint velocity."""

    columns: tuple[LibraryColumn, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(col.label for col in self.columns)

    @property
    def definition_hash(self) -> str:
        digest = hashlib.sha256("|".join(self.labels).encode()).hexdigest()
        return digest[:16]

    def __post_init__(self):
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise ValueError("library column labels must be unique")

    def __len__(self):
        return len(self.columns)

    def evaluate(self, v) -> np.ndarray:
        """Design matrix; one row per velocity sample, one column per term."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return np.column_stack([col.fn(v) for col in self.columns])

    def evaluate_slope(self, v) -> np.ndarray:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return np.column_stack([col.dfn(v) for col in self.columns])


def tanh_velocity_library(gains=(5.0, 10.0, 20.0, 100.0)) -> FunctionLibrary:
    """Constant, linear, sign and tanh terms with fixed sharpness gains."""
    columns = [_BASE_COLUMNS["1"], _BASE_COLUMNS["v"], _BASE_COLUMNS["sgn(v)"]]
    columns += [_tanh_column(g) for g in gains]
    return FunctionLibrary(tuple(columns))


def default_friction_library() -> FunctionLibrary:
    """The seven-term candidate set used throughout the pipeline."""
    return tanh_velocity_library()


def library_from_labels(labels) -> FunctionLibrary:
    columns = []
    for label in labels:
        if label in _BASE_COLUMNS:
            columns.append(_BASE_COLUMNS[label])
            continue
        m = _TANH_LABEL.match(label)
        if m is None:
            raise ValueError(f"unknown library column label: {label!r}")
        columns.append(_tanh_column(float(m.group(1))))
    return FunctionLibrary(tuple(columns))


@dataclass(frozen=True)
class LibraryModel:
    """Friction model as coefficients over a function library."""

    coefficients: np.ndarray
    library: FunctionLibrary = field(default_factory=default_friction_library)

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 1 or len(coef) != len(self.library):
            raise ValueError(
                f"coefficient vector length {coef.shape} does not match "
                f"library size {len(self.library)}")
        object.__setattr__(self, "coefficients", coef)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)

    def torque(self, v):
        v = np.asarray(v, dtype=float)
        out = self.library.evaluate(v) @ self.coefficients
        return out.reshape(v.shape) if v.shape else float(out[0])

    def slope(self, v):
        v = np.asarray(v, dtype=float)
        out = self.library.evaluate_slope(v) @ self.coefficients
        return out.reshape(v.shape) if v.shape else float(out[0])


_FILE_FORMAT = "frictionid/models-v1"
_UNITS = {"velocity": "rad/s", "torque": "N m"}


def _model_to_dict(model) -> dict:
    if isinstance(model, StribeckModel):
        return {"form": "stribeck", "a": list(model.as_array)}
    if isinstance(model, LibraryModel):
        return {
            "form": "library",
            "coefficients": list(model.coefficients),
            "labels": list(model.library.labels),
            "library_hash": model.library.definition_hash,
        }
    raise TypeError(f"cannot serialize friction model of type {type(model)!r}")


def _model_from_dict(entry: dict):
    form = entry.get("form")
    if form == "stribeck":
        return StribeckModel(*entry["a"])
    if form == "library":
        library = library_from_labels(entry["labels"])
        if library.definition_hash != entry["library_hash"]:
            raise ValueError(
                "library definition hash mismatch: file says "
                f"{entry['library_hash']}, rebuilt library is "
                f"{library.definition_hash}")
        return LibraryModel(np.asarray(entry["coefficients"], dtype=float), library)
    raise ValueError(f"unknown friction model form tag: {form!r}")


def save_friction_models(path, models) -> None:
    """Write per-joint friction models to a JSON model file."""
    payload = {
        "format": _FILE_FORMAT,
        "units": _UNITS,
        "joints": [_model_to_dict(m) for m in models],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_friction_models(path) -> list:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != _FILE_FORMAT:
        raise ValueError(f"{path}: not a friction model file "
                         f"(format tag {payload.get('format')!r})")
    if payload.get("units") != _UNITS:
        raise ValueError(f"{path}: incompatible units {payload.get('units')!r}, "
                         f"expected {_UNITS!r}")
    return [_model_from_dict(entry) for entry in payload["joints"]]
