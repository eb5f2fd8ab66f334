"""Friction model evaluation, properties and serialization."""

import numpy as np
import pytest
from mpmath import mp

from frictionid.friction import (FunctionLibrary, LibraryModel, StribeckModel,
                                 default_friction_library, library_from_labels,
                                 load_friction_models, save_friction_models,
                                 tanh_velocity_library)


def test_stribeck_validation():
    with pytest.raises(ValueError):
        StribeckModel(1.0, 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        StribeckModel(1.0, 1.0, 1.0, 0.0, -0.1)


def test_stribeck_zero_and_odd():
    model = StribeckModel(1.1, 1.8, 10.0, 0.3, 2.0)
    assert model.torque(0.0) == 0.0
    rng = np.random.default_rng(0)
    v = rng.uniform(-3, 3, 100)
    np.testing.assert_allclose(model.torque(-v), -model.torque(v), atol=1e-15)


def test_stribeck_high_precision_value():
    # term-by-term oracle in 50-digit arithmetic
    a = (1.0, 2.0, 10.0, 0.5, 3.0)
    v = 0.2
    mp.dps = 50
    expected = (mp.mpf(a[0]) * mp.mpf(v)
                + mp.mpf(a[1]) * mp.tanh(mp.mpf(a[2]) * mp.mpf(v))
                + mp.mpf(a[3]) * mp.e**(-mp.mpf(a[4]) * abs(mp.mpf(v)))
                * mp.tanh(3 * mp.mpf(a[2]) * mp.mpf(v)))
    model = StribeckModel(*a)
    assert model.torque(v) == pytest.approx(float(expected), abs=1e-12)


def test_stribeck_sign_agreement():
    # non-negative a1, a2, a4: torque sign follows velocity sign
    rng = np.random.default_rng(1)
    for _ in range(20):
        model = StribeckModel(rng.uniform(0, 2), rng.uniform(0, 3),
                              rng.uniform(1, 30), rng.uniform(0, 1),
                              rng.uniform(0, 5))
        v = rng.uniform(0.01, 3, 50)
        assert np.all(model.torque(v) > 0)
        assert np.all(model.torque(-v) < 0)


def test_stribeck_slope_matches_finite_differences():
    model = StribeckModel(1.1, 1.8, 10.0, 0.3, 2.0)
    h = 1e-7
    for v in np.linspace(-2, 2, 41):
        fd = (model.torque(v + h) - model.torque(v - h)) / (2 * h)
        assert model.slope(v) == pytest.approx(fd, abs=1e-5)


def test_default_library_columns():
    lib = default_friction_library()
    assert len(lib) == 7
    assert lib.labels == ("1", "v", "sgn(v)", "tanh(5v)", "tanh(10v)",
                          "tanh(20v)", "tanh(100v)")
    row0 = lib.evaluate(0.0)[0]
    np.testing.assert_array_equal(row0, [1, 0, 0, 0, 0, 0, 0])  # sgn(0) := 0
    row = lib.evaluate(0.1)[0]
    expected = [1.0, 0.1, 1.0, np.tanh(0.5), np.tanh(1.0), np.tanh(2.0),
                np.tanh(10.0)]
    np.testing.assert_allclose(row, expected, rtol=1e-15)


def test_library_model_evaluation():
    lib = default_friction_library()
    zero = LibraryModel(np.zeros(7), lib)
    assert zero.torque(1.23) == 0.0
    linear = np.zeros(7)
    linear[1] = 2.5
    assert LibraryModel(linear, lib).torque(0.4) == pytest.approx(1.0)
    coef = np.array([0.0, 0.8, 0.0, 0.0, 3.1, 0.0, 0.0])
    model = LibraryModel(coef, lib)
    assert model.torque(0.5) == pytest.approx(0.8 * 0.5 + 3.1 * np.tanh(5.0),
                                              rel=1e-15)


def test_library_model_zero_at_rest_without_constant():
    lib = default_friction_library()
    rng = np.random.default_rng(2)
    coef = rng.normal(size=7)
    coef[0] = 0.0
    assert LibraryModel(coef, lib).torque(0.0) == 0.0


def test_library_model_length_mismatch():
    with pytest.raises(ValueError):
        LibraryModel(np.zeros(6), default_friction_library())


def test_library_slope_and_sign_column():
    lib = default_friction_library()
    coef = np.zeros(7)
    coef[2] = 1.5  # sgn column only
    model = LibraryModel(coef, lib)
    assert model.slope(0.5) == 0.0
    assert model.slope(0.0) == 0.0  # subgradient convention
    coef2 = np.zeros(7)
    coef2[1], coef2[4] = 0.8, 3.1
    model2 = LibraryModel(coef2, lib)
    h = 1e-7
    fd = (model2.torque(0.3 + h) - model2.torque(0.3 - h)) / (2 * h)
    assert model2.slope(0.3) == pytest.approx(fd, abs=1e-6)


def test_library_from_labels_round_trip():
    lib = tanh_velocity_library(gains=(5.0, 15.0))
    rebuilt = library_from_labels(lib.labels)
    assert rebuilt.labels == lib.labels
    assert rebuilt.definition_hash == lib.definition_hash
    with pytest.raises(ValueError):
        library_from_labels(("sin(v)",))


def test_serialization_round_trip(tmp_path):
    lib = default_friction_library()
    models = [StribeckModel(1.1, 1.8, 10.0, 0.3, 2.0),
              LibraryModel(np.array([0.0, 1.5, 0.0, 0.0, 2.2, 0.0, 0.0]), lib)]
    path = tmp_path / "models.json"
    save_friction_models(path, models)
    loaded = load_friction_models(path)
    assert isinstance(loaded[0], StribeckModel)
    np.testing.assert_allclose(loaded[0].as_array, models[0].as_array)
    assert isinstance(loaded[1], LibraryModel)
    np.testing.assert_allclose(loaded[1].coefficients, models[1].coefficients)
    grid = np.linspace(-2, 2, 17)
    np.testing.assert_allclose(loaded[1].torque(grid), models[1].torque(grid))


def test_serialization_hash_mismatch(tmp_path):
    import json

    lib = default_friction_library()
    path = tmp_path / "models.json"
    save_friction_models(path, [LibraryModel(np.zeros(7), lib)])
    payload = json.loads(path.read_text())
    payload["joints"][0]["library_hash"] = "0000000000000000"
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="hash"):
        load_friction_models(path)


def test_duplicate_labels_rejected():
    col = default_friction_library().columns[1]
    with pytest.raises(ValueError):
        FunctionLibrary((col, col))
