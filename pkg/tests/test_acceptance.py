"""Acceptance suite: one PASS/FAIL line per criterion at the reference sizes.

The full run takes several minutes on one core.  ``BETASDE_REPLICAS`` scales
every replica count (reference 10000); smaller values are for smoke runs
only, since some criteria need the full size to collect enough samples.

Run directly with ``python3 tests/test_acceptance.py`` or through pytest.
"""

import os
import sys

import pytest

from betasde import reference_c2, run_suite
from betasde.suite import CRITERIA, SUITES

REPLICAS = int(os.environ.get("BETASDE_REPLICAS", "10000"))
OUT = os.environ.get("BETASDE_ACCEPTANCE_OUT", "acceptance_out")


def _line(rep) -> str:
    return rep.summary() + (f"  [{rep.wall_clock:.1f}s]" if rep.wall_clock else "")


def run():
    def progress(k, rep):
        print(_line(rep), flush=True)
    return run_suite(reference_c2(replicas=REPLICAS), out=OUT, progress=progress)


@pytest.fixture(scope="module")
def reports(request):
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print(f"\nacceptance suite, reference size scaled to {REPLICAS} replicas")
        reps = run()
    return {int(r.name[:2]): r for r in reps}


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1),
                         ids=[f"{k:02d}_{name}" for name, k in SUITES.items()])
def test_criterion(reports, number):
    rep = reports[number]
    assert rep.passed, rep.summary()


if __name__ == "__main__":
    reps = run()
    print(f"{sum(r.passed for r in reps)}/{len(reps)} criteria passed")
    sys.exit(0 if all(r.passed for r in reps) else 1)
