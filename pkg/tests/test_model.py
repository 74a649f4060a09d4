import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranfront.model import (
    InstanceError,
    InvalidQuantizer,
    NetworkInstance,
    QuantizerB,
    RateFronthaulTuple,
    b_from_q,
    background_quantizer,
    check_quantizer,
    full_resolution_quantizer,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    load_quantizer,
    q_from_b,
    quantizer_to_dict,
    random_instance,
    random_quantizer,
    save_instance,
    scalar_unit,
    validate,
    whitened_eigs,
)

from conftest import dims, seeds, snrs


def test_scalar_unit_validates(unit):
    rep = validate(unit)
    assert rep.ok and rep.invariants() == set()


def test_zero_noise_covariance_fails_validation(unit):
    bad = unit.replace(Sigma=np.zeros((1, 1, 1)))
    rep = validate(bad)
    assert not rep.ok
    assert "sigma_positive_definite" in rep.invariants()
    assert rep.violations[0].index == 0


def test_power_violation_reported(unit):
    bad = unit.replace(Kx=2.0 * np.ones((1, 1, 1)))
    rep = validate(bad)
    assert rep.invariants() == {"power"}


def test_negative_fronthaul_reported(unit):
    assert "fronthaul_nonnegative" in validate(unit.with_fronthaul([-1.0])).invariants()


def test_shape_mismatch_raises():
    with pytest.raises(InstanceError):
        NetworkInstance(K=1, L=1, M=1, N=1, H=np.ones((1, 2, 1, 1)), Sigma=np.ones((1, 1, 1)),
                        Kx=np.ones((1, 1, 1)), P=[1.0], C=[1.0])


def test_non_hermitian_raises():
    with pytest.raises(InstanceError):
        NetworkInstance(K=1, L=1, M=1, N=2, H=np.ones((1, 1, 2, 1)),
                        Sigma=np.array([[[1.0, 0.5], [0.0, 1.0]]]),
                        Kx=np.ones((1, 1, 1)), P=[1.0], C=[1.0])


def test_arrays_read_only(unit):
    with pytest.raises(ValueError):
        unit.H[0, 0, 0, 0] = 2.0


def test_b_from_q_examples():
    I2 = np.eye(2)
    assert np.allclose(b_from_q(I2, I2), 0.5 * I2)
    assert np.allclose(b_from_q(np.zeros((2, 2)), I2), I2)
    assert np.allclose(b_from_q(np.array([[3.0]]), np.array([[1.0]])), [[0.25]])


@given(seeds, st.integers(1, 3))
def test_q_b_roundtrip(seed, N):
    r = np.random.default_rng(seed)
    A = r.standard_normal((N, N)) + 1j * r.standard_normal((N, N))
    Sigma = A @ A.conj().T + 0.5 * np.eye(N)
    Bq = r.standard_normal((N, N)) + 1j * r.standard_normal((N, N))
    Q = Bq @ Bq.conj().T + 0.1 * np.eye(N)
    assert np.allclose(q_from_b(b_from_q(Q, Sigma), Sigma), Q, atol=1e-8)


def test_random_instance_snr_is_exact():
    inst = random_instance(1, 1, 1, 1, 1, 0.0)
    h = inst.H[0, 0, 0, 0]
    assert abs(abs(h) ** 2 * inst.Kx[0, 0, 0].real / inst.Sigma[0, 0, 0].real - 1.0) < 1e-12


def test_random_instance_deterministic():
    a = random_instance(5, 2, 3, 2, 1, 10.0)
    b = random_instance(5, 2, 3, 2, 1, 10.0)
    assert np.array_equal(a.H, b.H) and np.array_equal(a.C, b.C)


def test_random_instance_validates():
    assert validate(random_instance(2, 2, 2, 1, 2, 10.0)).ok


@given(seeds, dims, snrs)
def test_random_quantizer_in_box(seed, d, snr):
    inst = random_instance(seed, *d, snr)
    b = random_quantizer(inst, np.random.default_rng(seed))
    check_quantizer(inst, b)
    w = whitened_eigs(inst, b)
    assert w.min() >= 0.05 - 1e-9 and w.max() <= 0.95 + 1e-9


def test_background_and_full_resolution_endpoints(unit):
    assert np.allclose(whitened_eigs(unit, background_quantizer(unit)), 0.5)
    assert np.allclose(whitened_eigs(unit, full_resolution_quantizer(unit)), 1.0)


def test_quantizer_outside_box_rejected(unit):
    with pytest.raises(InvalidQuantizer):
        check_quantizer(unit, QuantizerB(np.array([[[1.5]]])))
    with pytest.raises(InvalidQuantizer):
        check_quantizer(unit, QuantizerB(np.array([[[-0.1]]])))


def test_rate_tuple_rounding_and_rejection():
    t = RateFronthaulTuple([-5e-10, 1.0], [0.0])
    assert t.R[0] == 0.0
    with pytest.raises(ValueError):
        RateFronthaulTuple([-1e-6], [0.0])
    with pytest.raises(ValueError):
        RateFronthaulTuple([np.nan], [0.0])


def test_instance_json_roundtrip(tmp_path):
    inst = random_instance(3, 2, 2, 2, 2, 10.0)
    save_instance(inst, tmp_path / "i.json")
    back = load_instance(tmp_path / "i.json")
    assert np.allclose(back.H, inst.H) and np.allclose(back.Sigma, inst.Sigma)
    assert np.allclose(back.C, inst.C)


def test_json_error_reports_index():
    d = instance_to_dict(scalar_unit())
    d["H"][0][0][0][0] = [1.0]
    with pytest.raises(InstanceError, match=r"H\[0\]\[0\]\[0\]\[0\]"):
        instance_from_dict(d)
    d = instance_to_dict(scalar_unit())
    del d["Sigma"]
    with pytest.raises(InstanceError, match="Sigma"):
        instance_from_dict(d)


def test_quantizer_file_b_and_q(tmp_path, unit):
    b = background_quantizer(unit)
    (tmp_path / "b.json").write_text(json.dumps(quantizer_to_dict(b)))
    assert np.allclose(load_quantizer(tmp_path / "b.json", unit).B, b.B)
    (tmp_path / "q.json").write_text(json.dumps({"Q": [[[[1.0, 0.0]]]]}))
    assert np.allclose(load_quantizer(tmp_path / "q.json", unit).B, 0.5)
