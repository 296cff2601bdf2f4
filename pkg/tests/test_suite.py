import pytest

from betasde import reference_c2, run_suite
from betasde import suite as suite_mod


def test_resolve_names_and_numbers():
    assert suite_mod.resolve("all") == list(range(1, 17))
    assert suite_mod.resolve(["hitting_law", "15"]) == [1, 15]
    with pytest.raises(KeyError):
        suite_mod.resolve(["17"])
    with pytest.raises(KeyError):
        suite_mod.resolve(["nope"])


def test_subset_run_is_bit_identical(tmp_path):
    cfg = reference_c2(replicas=300)
    a, b = tmp_path / "a", tmp_path / "b"
    run_suite(cfg, only=["2", "4", "15"], out=a)
    run_suite(cfg, only=["2", "4", "15"], out=b)
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "timing.json").exists()


def test_failing_criterion_does_not_abort(monkeypatch):
    def boom(ctx):
        raise RuntimeError("boom")
    crit = list(suite_mod.CRITERIA)
    crit[1] = boom
    monkeypatch.setattr(suite_mod, "CRITERIA", crit)
    reps = run_suite(reference_c2(replicas=300), only=["2", "15"])
    assert reps[0].error == "RuntimeError: boom" and not reps[0].passed
    assert reps[0].name == "02_nu_normalization" and reps[1].name.startswith("15_")
    assert reps[1].passed
