"""Shared brute-force oracles and fixtures.

The oracles here deliberately avoid the library's own enumeration and
closed-form paths: distances come from explicit lattice scans, candidate
components from raw segment data, and Hessian spectra from the explicit
circulant quadratic form in the universal cover.
"""

import itertools
import math

import numpy as np
import pytest


def brute_torus_distance(periods, p, q, radius=3):
    """Distance on a flat torus by scanning all lattice translates |lam| <= radius."""
    periods = np.asarray(periods, dtype=float)
    best = math.inf
    for lam in itertools.product(range(-radius, radius + 1), repeat=len(periods)):
        disp = np.asarray(q, dtype=float) - np.asarray(p, dtype=float) + np.array(lam) * periods
        best = min(best, float(np.linalg.norm(disp)))
    return best


def brute_torus_minimizers(periods, p, q, tol=1e-9, radius=3):
    """All minimizing displacements on a flat torus within tol of the minimum."""
    periods = np.asarray(periods, dtype=float)
    disps = []
    for lam in itertools.product(range(-radius, radius + 1), repeat=len(periods)):
        disp = np.asarray(q, dtype=float) - np.asarray(p, dtype=float) + np.array(lam) * periods
        disps.append((float(np.linalg.norm(disp)), tuple(disp)))
    dmin = min(d for d, _ in disps)
    return sorted(t for d, t in disps if d <= dmin + tol)


def double_embed(b, coords, face):
    x, y = coords
    return np.array([x, y]) if face == "top" else np.array([x, 2.0 * b - y])


def brute_double_distance(a, b, p_coords, p_face, q_coords, q_face, radius=3):
    """Distance on the doubled rectangle by scanning both sheets of the cover."""
    P = np.array([2.0 * a, 2.0 * b])
    pc = double_embed(b, p_coords, p_face)
    qc = double_embed(b, q_coords, q_face)
    best = math.inf
    for sheet in (qc, -qc):
        for lam in itertools.product(range(-radius, radius + 1), repeat=2):
            best = min(best, float(np.linalg.norm(sheet + np.array(lam) * P - pc)))
    return best


def brute_double_minimizer_count(a, b, p_coords, p_face, q_coords, q_face, tol=1e-9, radius=3):
    P = np.array([2.0 * a, 2.0 * b])
    pc = double_embed(b, p_coords, p_face)
    qc = double_embed(b, q_coords, q_face)
    lengths = []
    for sheet in (qc, -qc):
        for lam in itertools.product(range(-radius, radius + 1), repeat=2):
            lengths.append(float(np.linalg.norm(sheet + np.array(lam) * P - pc)))
    dmin = min(lengths)
    return sum(1 for l in lengths if l <= dmin + tol)


def circulant_hessian_eigenvalues(k, n):
    """Eigenvalues of the loop-energy Hessian at a straight configuration:
    the cyclic second-difference form scaled by 2k, each with multiplicity n."""
    vals = []
    for m in range(k):
        vals.extend([2.0 * k * (2.0 - 2.0 * math.cos(2.0 * math.pi * m / k))] * n)
    return sorted(vals)


def straight_chain_deviation(seglists):
    """Smallest over per-segment choices of the largest joint defect
    ``l_prev * v1_prev - l_cur * v0_cur``; zero exactly when some choice of
    minimizers chains into one closed geodesic."""
    k = len(seglists)
    best = math.inf
    for combo in itertools.product(*seglists):
        worst = 0.0
        for i in range(k):
            prev = combo[(i - 1) % k]
            cur = combo[i]
            defect = np.linalg.norm(prev.length * prev.v1 - cur.length * cur.v0)
            worst = max(worst, float(defect))
        best = min(best, worst)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
