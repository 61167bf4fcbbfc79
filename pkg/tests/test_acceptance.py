"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones; nothing here is loosened to make a run green.
Grids are the default 40 x 40 at n = 3 unless a criterion says otherwise.
"""

import math
import time

import numpy as np
import pytest

from finslerlab.catalog import FAMILIES, MetricSpec, PointSample, eval_phi
from finslerlab.curvature import compute_chi, compute_H
from finslerlab.oracle import cfc_tensor_check, oracle_at
from finslerlab.verifier import (
    Grid,
    SuiteConfig,
    evaluate_grid,
    frame_from_rs,
    oracle_equivalence,
    phi_from_q,
    random_points,
    run_suite,
    solve_q,
    verify_constant_flag,
    verify_projective_Q0,
    verify_thm14,
)

GRID = Grid(40, 40)


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def flag_residuals(spec, K):
    """Largest normalized ``R1 - K phi^2``, ``R2`` and ``R3`` over the grid."""
    res = verify_constant_flag(spec, K, GRID, tol=1e-8)
    return {p.name: p.max for p in res.parts if p.name in ("R1", "R2", "R3")}


def test_criterion_01_funk_constant_flag(verdict):
    worst = flag_residuals(MetricSpec("funk", {}), -0.25)
    verdict(1, max(worst.values()) <= 1e-8, f"funk K=-1/4 residuals {fmt(worst)} (tol 1e-8)")


def test_criterion_02_berwald_zero_flag(verdict):
    worst = flag_residuals(MetricSpec("berwald", {}), 0.0)
    verdict(2, max(worst.values()) <= 1e-8, f"berwald K=0 residuals {fmt(worst)} (tol 1e-8)")


def test_criterion_03_shen_family(verdict):
    worst = {eps: max(flag_residuals(MetricSpec("shen", {"eps": eps}), -1.0).values())
             for eps in (-1.0, -0.5, 0.0, 0.5)}
    ok = max(worst.values()) <= 1e-8

    funk, shen0 = MetricSpec("funk", {}), MetricSpec("shen", {"eps": 0.0})
    pts = GRID.points(shen0)
    half = 0.5 * eval_phi(funk, pts, 0).value
    pointwise = float(np.max(np.abs(eval_phi(shen0, pts, 0).value - half) / np.abs(half)))
    ok &= pointwise <= 1e-14

    k_funk = evaluate_grid(funk, GRID).bundle.K_hat.astype(float)
    k_shen = evaluate_grid(shen0, GRID).bundle.K_hat.astype(float)
    scaling = float(np.max(np.abs(k_shen - 4 * k_funk)))
    ok &= scaling <= 1e-8
    verdict(3, ok, f"shen K=-1 max residual per eps {fmt(worst)}; shen(0) vs funk/2 {pointwise:.1e}; "
                   f"|K_shen0 - 4 K_funk| {scaling:.1e}")


def test_criterion_04_bryant(verdict):
    spec = MetricSpec("bryant", {"C": 1.0, "D": 0.3})
    res = verify_thm14(spec, GRID, tol=1e-8)
    k = res.extra["K_hat"]
    ok = res.passed and abs(k["mean"] - 1) <= 1e-7 and k["spread"] <= 1e-7

    rng = np.random.default_rng(42)
    _, x, y, _ = random_points(spec, 20, rng)
    _, cfc = cfc_tensor_check(oracle_at(spec, x, y, "R"), 1.0)
    ok &= cfc <= 1e-7
    verdict(4, ok, f"bryant R2/R3 max {res.max_residual:.1e}; K_hat {k['mean']:.12f} spread {k['spread']:.1e}; "
                   f"oracle cfc residual {cfc:.1e} (tol 1e-7)")


def test_criterion_05_berwald_and_shen_type_solutions(verdict):
    detail, ok = [], True
    for family, K in (("soln_k0", 0.0), ("soln_km1", -1.0)):
        spec = MetricSpec(family, {"C": 2.0, "D": 0.5})
        worst = max(flag_residuals(spec, K).values())
        q0 = verify_projective_Q0(spec, GRID, tol=1e-10).max_residual
        ok &= worst <= 1e-8 and q0 <= 1e-10
        detail.append(f"{family} K={K:g}: flag {worst:.1e}, Q=0 {q0:.1e}")
    verdict(5, ok, "; ".join(detail) + " (tol 1e-8 / 1e-10)")


def test_criterion_06_oracle_equivalence(verdict):
    worst, where = 0.0, ""
    for family in sorted(FAMILIES):
        for n in (3, 4):
            rep = oracle_equivalence(MetricSpec(family, {}, n=n), npoints=20, seed=42, tol=1e-6, need="chi")
            for c in rep.checks:
                if c.max_residual > worst:
                    worst, where = c.max_residual, f"{family} n={n} {c.name}"
    verdict(6, worst <= 1e-6, f"{len(FAMILIES)} families x n in (3, 4): max rel diff {worst:.1e} at {where} (tol 1e-6)")


def test_criterion_07_identities_on_test_profile(verdict):
    spec = MetricSpec("test_poly", {"a": 0.1, "b": 0.05})
    ev = evaluate_grid(spec, GRID)
    b = ev.bundle
    u = b.r**2 - b.s**2
    phi_s = b.phi.partial((0, 1))
    req2 = b.R4.value + b.s * b.R2.value + phi_s / b.phi.value * (u * b.R2.value + b.R1.value)
    req2_ratio = float(np.max(np.abs(req2) / (1 + np.abs(b.R1.value))))

    rep = run_suite(spec, SuiteConfig(grid=GRID))
    ry = rep.check("identity_riemann_y").max_residual
    ric = rep.check("identity_ricci_tensor").max_residual
    h = oracle_equivalence(spec, npoints=20, seed=42, tol=1e-6, need="H").checks
    h_diff = next(c for c in h if c.name == "H").max_residual
    ok = req2_ratio <= 1e-9 and ry <= 1e-10 and ric <= 1e-10 and h_diff <= 1e-6
    verdict(7, ok, f"Req2/(1+|R1|) {req2_ratio:.1e} (1e-9); R y {ry:.1e}; Ric_ij y y - Ric {ric:.1e} (1e-10); "
                   f"H vs oracle {h_diff:.1e} (1e-6)")


def _lemma_sides(spec):
    ev = evaluate_grid(spec, GRID)
    b = ev.bundle
    x, y = frame_from_rs(ev.points.r, ev.points.s, spec.n)
    phi2 = ev.phi2.astype(float)
    u = (b.r**2 - b.s**2).astype(float)
    chi = np.linalg.norm(compute_chi(b, x, y), axis=-1).astype(float)
    t = ((spec.n + 1) * b.R3.value + u * b.R2_s).astype(float)
    H = np.abs(compute_H(b, x, y)).max(axis=(-1, -2)).astype(float)
    M = (np.abs(b.M) + np.abs(b.M_s * u)).astype(float)
    return chi / phi2, t / phi2, u, H / phi2, M / phi2


def test_criterion_08_lemma_equivalences(verdict):
    chi, t, u, H, M = _lemma_sides(MetricSpec("funk", {}))
    zero_side = max(chi.max(), np.abs(t).max(), H.max(), M.max())
    ok = zero_side <= 1e-8

    chi, t, u, H, M = _lemma_sides(MetricSpec("test_poly", {}))
    inner = u > 1e-8 * u.max()
    nonzero = min(np.abs(t[inner]).min(), H[inner].min(), M[inner].min())
    ratio = chi[inner] / (0.5 * np.abs(t[inner]) * np.sqrt(u[inner]))
    proportional = float(np.max(np.abs(ratio - 1)))
    ok &= nonzero > 1e-8 and proportional <= 1e-8
    verdict(8, ok, f"funk: all sides <= {zero_side:.1e}; test profile: sides >= {nonzero:.1e}, "
                   f"|chi| / (|t| sqrt(u)/2) - 1 <= {proportional:.1e}")


def _printed_shen_type(r, s, C, D):
    u = r * r - s * s
    return 0.5 * (1 / (math.sqrt(C + 2 * D - u) - s) - 1 / (math.sqrt(C - 2 * D - u) - s))


def test_criterion_09_quartic(verdict):
    rng = np.random.default_rng(42)
    worst = 0.0
    for u, C, D, K in rng.uniform(-5, 5, size=(2000, 4)):
        for root in solve_q(u, C, D, K).roots:
            scale = max(1.0, abs(K), D * D * root.q2**2)
            worst = max(worst, root.residual / scale)

    C, D = 2.0, 0.5
    r = rng.uniform(0.05, 0.9, 20)
    s = r * rng.uniform(-0.9, 0.9, 20)
    match = {}
    for br in ("++", "+-", "-+", "--"):
        err = 0.0
        for ri, si in zip(r, s):
            vals = [v for v in phi_from_q(solve_q(ri * ri - si * si, C, D, -1.0), si) if v.branch == br]
            ref = _printed_shen_type(ri, si, C, D)
            err = max(err, abs(vals[0].phi - ref) / abs(ref)) if vals else math.inf
        match[br] = err
    best = min(match, key=match.get)
    ok = worst <= 1e-12 and match[best] <= 1e-8
    verdict(9, ok, f"root residual/scale {worst:.1e} (1e-12); branch {best} reproduces the K=-1 closed form "
                   f"to {match[best]:.1e} (1e-8)")


def test_criterion_10_determinism(verdict):
    cfg = SuiteConfig(grid=GRID, seed=7)
    start = time.perf_counter()
    first = run_suite(MetricSpec("shen", {"eps": 0.5}), cfg).to_json()
    second = run_suite(MetricSpec("shen", {"eps": 0.5}), cfg).to_json()
    elapsed = time.perf_counter() - start
    verdict(10, first == second, f"two runs, {len(first)} bytes each, identical={first == second} ({elapsed:.1f} s)")


def fmt(values):
    return "{" + ", ".join(f"{k}: {v:.1e}" for k, v in values.items()) + "}"
