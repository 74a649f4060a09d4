import csv
import json
import math

import numpy as np
import pytest

from cranfront.cli import (
    EXIT_BUDGET,
    EXIT_CAP,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_VIOLATION,
    campaign_instance,
    main,
    run_campaign,
)
from cranfront.model import quantizer_to_dict, save_instance, scalar_unit, background_quantizer
from cranfront.optimize import Objective, grid_oracle


@pytest.fixture
def unit_file(tmp_path):
    p = tmp_path / "unit.json"
    save_instance(scalar_unit(2.0), p)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_eval_region_scalar(tmp_path, unit_file):
    out = tmp_path / "o"
    assert main(["eval-region", "--instance", str(unit_file), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "jd_constraints.csv")
    assert len(rows) == 3 and "bits_per_complex_dim" in rows[0][3]
    summary = json.loads((out / "summary.json").read_text())
    assert abs(summary["jd_sum_rate"] - math.log2(1.5)) < 1e-12
    assert (out / "metadata.json").exists()


def test_eval_region_quantizer_file(tmp_path, unit_file):
    q = tmp_path / "b.json"
    q.write_text(json.dumps(quantizer_to_dict(background_quantizer(scalar_unit()))))
    out = tmp_path / "o"
    assert main(["eval-region", "--instance", str(unit_file), "--quantizer", f"file:{q}",
                 "--out", str(out)]) == EXIT_OK


def test_eval_region_k2_boundary(tmp_path):
    out = tmp_path / "o"
    assert main(["eval-region", "--random", "2,2,1,1,10,3", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "boundary_k2.csv")
    r1 = [float(r[0]) for r in rows[1:]]
    assert rows[0][0].startswith("R1_") and r1 == sorted(r1)
    assert len(read_csv(out / "gsd_orders.csv")) == 1 + 24


def test_missing_file_exit_2(tmp_path, capsys):
    assert main(["eval-region", "--instance", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "cannot read" in capsys.readouterr().err


def test_bad_arguments_exit_2(tmp_path, unit_file):
    out = str(tmp_path / "o")
    assert main(["eval-region", "--random", "1,1,1", "--out", out]) == EXIT_INPUT
    assert main(["eval-region", "--instance", str(unit_file), "--quantizer", "bogus", "--out", out]) == EXIT_INPUT
    assert main(["optimize", "--instance", str(unit_file), "--objective", "jd-weighted",
                 "--weights", "1,2", "--out", out]) == EXIT_INPUT
    assert main(["optimize", "--instance", str(unit_file), "--tol", "-1", "--out", out]) == EXIT_INPUT
    assert main(["eval-region", "--out", out]) == EXIT_INPUT


def test_cap_exceeded_exit_3(tmp_path):
    assert main(["eval-region", "--random", "7,1,1,1,0,1", "--out", str(tmp_path / "o")]) == EXIT_CAP
    assert main(["verify", "--count", "1", "--max-dim", "7", "--out", str(tmp_path / "v")]) == EXIT_CAP


def test_optimize_scalar_matches_oracle(tmp_path, unit_file):
    out = tmp_path / "o"
    assert main(["optimize", "--instance", str(unit_file), "--objective", "sd-sum",
                 "--trace", "--out", str(out)]) == EXIT_OK
    res = json.loads((out / "result.json").read_text())
    oracle = grid_oracle(scalar_unit(2.0), Objective("sd-sum")).value
    assert abs(res["value_bits"] - oracle) <= 1e-4
    assert read_csv(out / "trace.csv")[0][1].endswith("per_complex_dim")


def test_optimize_zero_weights(tmp_path, unit_file):
    out = tmp_path / "o"
    assert main(["optimize", "--instance", str(unit_file), "--objective", "jd-weighted",
                 "--weights", "0", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "result.json").read_text())["value_bits"] == 0.0


def test_optimize_budget_exit_4(tmp_path):
    out = tmp_path / "o"
    assert main(["optimize", "--random", "2,2,1,1,10,1", "--max-iters", "1", "--out", str(out)]) == EXIT_BUDGET
    res = json.loads((out / "result.json").read_text())
    assert res["converged"] is False and res["iterations"] == 1


def test_gap_check(tmp_path, unit_file):
    out = tmp_path / "o"
    assert main(["gap-check", "--instance", str(unit_file), "--sum-fronthaul", "2",
                 "--out", str(out)]) == EXIT_OK
    d = json.loads((out / "gap_certificates.json").read_text())
    assert [c["kind"] for c in d["certificates"]] == ["jd", "sd-sum", "gsd-sumfronthaul"]
    assert all(c["passed"] for c in d["certificates"])


def test_verify_small_campaign(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--count", "3", "--seed", "5", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["instances"] == 3 and rep["total_violations"] == 0
    assert (out / "certificates" / "theorem2_worst.json").exists()


def test_verify_planted_fault(tmp_path):
    out = tmp_path / "v"
    code = main(["verify", "--count", "3", "--seed", "0", "--max-dim", "3", "--checks", "lemma3",
                 "--plant-fault", "--out", str(out)])
    rep = json.loads((out / "report.json").read_text())
    assert code == EXIT_VIOLATION
    assert rep["lemma3"]["violations"] > 0
    assert rep["lemma3"]["first_violation"]["witness"] is not None


def test_verify_zero_instances(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--count", "0", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["instances"] == 0 and rep["theorem1"]["runs"] == 0


def test_verify_deterministic_across_workers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["verify", "--count", "4", "--seed", "9", "--out", str(a)])
    main(["verify", "--count", "4", "--seed", "9", "--workers", "3", "--out", str(b)])
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_campaign_instances_reproducible():
    a, qa = campaign_instance(3, 7)
    b, qb = campaign_instance(3, 7)
    assert np.array_equal(a.H, b.H) and np.array_equal(qa[1][1].B, qb[1][1].B)
    assert run_campaign(0, 1)["total_violations"] == 0
