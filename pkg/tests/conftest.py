"""Shared fixtures: independent high-precision reference profiles."""

import mpmath as mp
import numpy as np
import pytest

from finslerlab.catalog import FAMILIES, MetricSpec

mp.mp.dps = 40


def _sqrt(x):
    return mp.sqrt(x)


def ref_phi(family, params):
    """Profiles rewritten in mpmath straight from their closed forms (no shared code)."""
    p = {**FAMILIES[family].defaults, **params}

    def funk(r, s):
        return (_sqrt(1 - r**2 + s**2) + s) / (1 - r**2)

    table = {
        "euclidean": lambda r, s: mp.mpf(1),
        "klein": lambda r, s: _sqrt(1 - r**2 + s**2) / (1 - r**2),
        "proj_sphere": lambda r, s: _sqrt(1 + r**2 - s**2) / (1 + r**2),
        "funk": funk,
        "berwald": lambda r, s: (_sqrt(1 - r**2 + s**2) + s) ** 2 / ((1 - r**2) ** 2 * _sqrt(1 - r**2 + s**2)),
        "shen": lambda r, s: (funk(r, s) - p["eps"] * (_sqrt(1 - p["eps"] ** 2 * (r**2 - s**2)) + p["eps"] * s)
                              / (1 - p["eps"] ** 2 * r**2)) / 2,
        "soln1": lambda r, s: 1 / (2 * _sqrt(-p["K"])) / (_sqrt(p["C"] - r**2 + s**2) + s),
        "soln_k0": lambda r, s: abs(p["D"]) / (_sqrt(p["C"] - r**2 + s**2) * (_sqrt(p["C"] - r**2 + s**2) - s) ** 2),
        "soln_km1": lambda r, s: -mp.sign(p["D"]) * (1 / (_sqrt(p["C"] + 2 * p["D"] - r**2 + s**2) - s)
                                                      - 1 / (_sqrt(p["C"] - 2 * p["D"] - r**2 + s**2) - s)) / 2,
        "bryant": lambda r, s: mp.sign(p["D"]) * mp.re(1j / (_sqrt(p["C"] + 2j * p["D"] - r**2 + s**2) - s)),
        "bryant_printed": lambda r, s: mp.re(1 / (_sqrt(p["C"] + 2j * p["D"] - r**2 + s**2) - 1j * s)),
        "test_poly": lambda r, s: 1 + p["a"] * s + p["b"] * r**2,
    }

    def implicit(r, s):
        C, D, K = p["C"], p["D"], p["K"]
        u = r**2 - s**2
        w = C - u
        sign_root = 1 if p["branch"][0] == "+" else -1
        q2 = (w + sign_root * _sqrt(w**2 + 4 * D**2 * K)) / (2 * D**2)
        q = _sqrt(q2) * (1 if p["branch"][1] == "+" else -1)
        return q / (q**2 * (D * q + s) ** 2 + K)

    table["soln_family"] = implicit
    return table[family]


@pytest.fixture(scope="session")
def catalog_specs():
    return {name: MetricSpec(name, {}) for name in FAMILIES}


def interior_points(spec, count, seed=0, margin=0.9):
    """Random ``(r, s)`` comfortably inside the domain."""
    rng = np.random.default_rng(seed)
    rho = spec.radius
    r = rng.uniform(max(0.05, spec.r_min), margin * rho, count)
    s = r * rng.uniform(-margin, margin, count)
    return r, s
