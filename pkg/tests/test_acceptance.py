"""Acceptance suite: every top-level criterion at its stated tolerance.

Each test prints one pass/fail line per criterion metric.  The criteria
run at desk scale (finest meshes hmax = 0.005), so this module is the
slow part of the suite; run it with ``pytest tests/test_acceptance.py -v -s``.
"""

import numpy as np
import pytest

from polyshape import campaign as cp


def _report(results):
    ok = True
    for r in results:
        print(r.line())
        ok &= r.passed
    return ok


@pytest.fixture(scope="module")
def cfg():
    return cp.default_config()


def test_criterion_01_exponent_solver(cfg):
    """gamma1 closed form to 1e-10; insulating 2/3 exact; 200-point grid
    with gamma1 in (1/2,1), gamma2 > 1 and residual < 1e-11."""
    assert _report(cp.check_exponents(cfg))


def test_criterion_02_coupling_matrix(cfg):
    """|det Y| < 1e-8 at roots; rank 2 at the integer eigenvalue for
    k in {2,3,10}; |det Y(gamma1 - 1)| > 1e-6 over the grid."""
    assert _report(cp.check_matrix(cfg))


def test_criterion_03_forward_solver(cfg):
    """Annulus oracle < 1e-2 at hmax=0.02, order >= 1.5 over 3 meshes,
    reciprocity < 1e-9 for 10 Fourier pairs and all three contrasts."""
    assert _report(cp.check_forward(cfg))


def test_criterion_04_corner_expansion(cfg):
    """Fitted gamma1 within 5% (k=2); insulating and conducting square
    corners give 2/3 +- 0.05."""
    assert _report(cp.check_corner_fit(cfg))


def test_criterion_05_taylor_remainder(cfg):
    """Log-log remainder slope in [1.8, 2.2] over t in {0.08,...,0.01}
    for vertex-motion, dilation and single-edge-normal presets at
    hmax <= 0.01."""
    assert _report(cp.check_taylor(cfg))


def test_criterion_06_route_equivalence(cfg):
    """Pairwise distances among the boundary-integral, material-derivative
    and enriched-transmission routes < 5% at hmax = 0.01 and decreasing
    over 2 further refinements, for k in {2, 0.5}."""
    assert _report(cp.check_routes(cfg))


def test_criterion_07_compatibility_and_cancellation(cfg):
    """Net-source residual decreasing over delta in {0.2,...,0.025} r_i;
    vertex-term cancellation at delta = 0.1 r_i below 10%."""
    assert _report(cp.check_compatibility_cancellation(cfg))


def test_criterion_08_degenerate_cases(cfg):
    """Insulating and perfectly conducting variants: two-route
    equivalence and Taylor slopes (forward oracles and corner fits for
    the degenerate kinds are covered inside criteria 3 and 4)."""
    assert _report(cp.check_degenerate(cfg))


def test_criterion_09_reconstruction(cfg):
    """Perturbed-square recovery: < 5e-3 noiseless, < 5e-2 with 1% noise
    and monotone residual decrease to the plateau."""
    assert _report(cp.check_reconstruction(cfg))


def test_criterion_10_determinism(cfg, tmp_path):
    """`verify` twice with one config and seed: byte-identical reports."""
    from polyshape.cli import main

    conf = tmp_path / "acc.cfg"
    conf.write_text(
        "[mesh]\nhmax = 0.02\nlevels = 7\n"
        "[experiment]\nchecks = exponents,matrix,corner_fit,compatibility,determinism\n"
    )
    reports = []
    for d in ("a", "b"):
        out = tmp_path / d
        code = main(["verify", "--config", str(conf), "--out", str(out), "--seed", "1"])
        assert code == 0
        reports.append((out / "report.txt").read_bytes())
    same = reports[0] == reports[1]
    print(f"[{'PASS' if same else 'FAIL'}] verify reports byte-identical: {same}")
    assert same
    assert _report(cp.check_determinism(cfg))
