import itertools

import numpy as np
import pytest
from hypothesis import given

from cranfront.equivalence import (
    CERT_TOL,
    csum_grid,
    sd_timesharing_sum_rate,
    theorem1_campaign,
    theorem1_certificate,
    theorem2_campaign,
    theorem2_certificate,
)
from cranfront.gaussinfo import cond_mutual_info, i_x_yhat_cond, i_y_yhat_all, joint_covariance, ys, yhats
from cranfront.model import background_quantizer, scalar_unit, zero_quantizer
from cranfront.regions import jd_sum_rate_fixed_b

from conftest import dims, make_pair, seeds, snrs


# -------------------------------------------------------------- theorem 1

def test_case1_single_order_and_markov_identity():
    inst, b = make_pair(4, 2, 2, 1, 1)
    cert = theorem1_certificate(inst, b, 1e3)
    assert cert.case == "A-Case1" and len(cert.components) == 1
    jc = joint_covariance(inst, b, include_y=True)
    full = cond_mutual_info(jc, ys(range(2)), yhats(range(2)))
    assert abs(cert.components[0].C[0] - full) < 1e-8
    assert cert.dominates()


def test_case_boundary_is_degenerate_mix():
    inst, b = make_pair(4, 2, 2, 1, 1)
    at = float(np.sum(i_y_yhat_all(inst, b))) + i_x_yhat_cond(inst, b, range(2), range(2))
    cert = theorem1_certificate(inst, b, at)
    assert cert.boundary and cert.dominates()
    if cert.mixing is not None:
        assert min(abs(cert.mixing), abs(cert.mixing - 1.0)) < 1e-9


def test_case2_interior_mix():
    inst, b = make_pair(9, 2, 2, 1, 1, background=True)
    grid = csum_grid(inst, b)
    cert = theorem1_certificate(inst, b, grid[1], (1, 0))
    assert cert.case == "A-Case2"
    assert 0.0 < cert.mixing < 1.0
    assert cert.min_slack >= -CERT_TOL
    # the target vertex is a JD point at the realized fronthaul split
    R, C = cert.mixed()
    assert abs(C[0] - grid[1]) < 1e-8


def test_empty_region_when_budget_below_quantization_cost():
    inst, b = make_pair(9, 2, 2, 1, 1, background=True)
    assert theorem1_certificate(inst, b, 0.1).case == "empty"


@given(seeds, dims, snrs)
def test_theorem1_dominates(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    for Csum in csum_grid(inst, b):
        for perm in itertools.permutations(range(inst.K)):
            cert = theorem1_certificate(inst, b, Csum, perm)
            assert cert.dominates(), cert.to_dict()
            if cert.case == "A-Case2":
                assert -1e-9 <= cert.mixing <= 1 + 1e-9


def test_bad_ordering_rejected():
    inst, b = make_pair(1, 2, 1, 1, 1)
    with pytest.raises(ValueError):
        theorem1_certificate(inst, b, 3.0, (0, 0))


# -------------------------------------------------------------- theorem 2

def test_zero_quantizer_trivial_certificate():
    inst, _ = make_pair(3, 2, 2, 1, 1)
    cert = theorem2_certificate(inst, zero_quantizer(inst))
    assert cert.target_R[0] == 0.0 and cert.dominates()


def test_single_bs_certificate():
    inst, b = make_pair(3, 2, 1, 1, 1)
    # loose fronthaul: scheme 2 alone, SD rate equals the JD sum rate
    loose = inst.with_fronthaul([1e3])
    cert = theorem2_certificate(loose, b)
    R, _ = cert.mixed()
    assert abs(cert.mixing - 1.0) < 1e-9
    assert abs(R[0] - jd_sum_rate_fixed_b(loose, b)) < 1e-8
    # binding fronthaul: the mix uses exactly the target fronthaul
    cert = theorem2_certificate(inst, b)
    R, C = cert.mixed()
    assert cert.dominates()
    assert abs(C[0] - cert.target_C[0]) < 1e-8
    assert abs(cert.target_C[0] - inst.C[0]) < 1e-8


@given(seeds, dims, snrs)
def test_theorem2_dominates(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    for perm in itertools.permutations(range(inst.L)):
        cert = theorem2_certificate(inst, b, perm)
        assert cert.dominates(), cert.to_dict()
        if cert.case == "C" and not cert.notes:
            assert -1e-9 <= cert.mixing <= 1 + 1e-9


def test_k2_l3_background_certificate():
    inst, b = make_pair(21, 2, 3, 1, 1, background=True)
    cert = theorem2_certificate(inst, b)
    assert 0.0 <= cert.mixing <= 1.0
    R, _ = cert.mixed()
    assert R[0] - jd_sum_rate_fixed_b(inst, b) >= -CERT_TOL


@given(seeds, dims, snrs)
def test_sd_timesharing_reaches_jd_sum_rate(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    assert sd_timesharing_sum_rate(inst, b) >= jd_sum_rate_fixed_b(inst, b) - 1e-7


# -------------------------------------------------------------- campaigns

def test_empty_campaign():
    rep = theorem2_campaign([])
    assert rep.runs == 0 and rep.to_dict()["worst_slack"] is None


def test_scalar_campaign_single_ordering():
    inst = scalar_unit(2.0)
    rep = theorem1_campaign([(inst, background_quantizer(inst))])
    assert rep.runs == 5 and rep.violations == 0
    assert set(rep.cases) <= {"A-Case1", "A-Case2"}


def test_campaign_report_is_sorted_and_binned():
    pairs = [make_pair(s, 2, 2, 1, 1) for s in range(3)]
    d = theorem2_campaign(pairs).to_dict()
    assert d["violations"] == 0
    assert len(d["mixing"]["histogram_0_1_10bins"]) == 10
    assert list(d["cases"]) == sorted(d["cases"])
