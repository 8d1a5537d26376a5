"""Small dense real-matrix helpers used by the harmonic observer.

Only what the 7-state observer needs: a matrix exponential, the
characteristic polynomial and single-output pole placement.  Matrices are
plain ``numpy`` float arrays.  Polynomials are monic coefficient arrays in
descending order (``z**n`` first).
"""
from __future__ import annotations

import math

import numpy as np


class DimensionError(ValueError):
    """Matrix shapes do not fit the operation."""


class RankError(ValueError):
    """The (A, C) pair is not observable."""


def as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    return m


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """Return ``exp(a * t)`` by scaling and squaring a truncated Taylor series.

    The argument is halved until its infinity norm is at most 0.5, the series
    is summed until a term drops below 1e-16 (relative), and the result is
    squared back up.
    """
    m = _square(a)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    x = m * t
    n = x.shape[0]
    norm = np.abs(x).sum(axis=1).max() if n else 0.0
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    x = x / (2.0 ** s)

    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ x / k
        result = result + term
        if np.abs(term).max() < 1e-16 * max(1.0, np.abs(result).max()):
            break
    for _ in range(s):
        result = result @ result
    return result


def char_poly(a) -> np.ndarray:
    """Characteristic polynomial ``det(zI - a)`` by Faddeev-LeVerrier.

    Returns ``n + 1`` coefficients, highest power first, leading one exactly 1.
    """
    m = _square(a)
    n = m.shape[0]
    if n > 16:
        raise DimensionError("char_poly is limited to n <= 16")
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.zeros_like(m)
    eye = np.eye(n)
    for k in range(1, n + 1):
        mk = m @ mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(m @ mk) / k
    return coeffs


def poly_from_roots(roots) -> np.ndarray:
    """Monic real polynomial with the given conjugate-closed roots."""
    roots = np.asarray(roots, dtype=complex)
    if not conjugate_closed(roots):
        raise ValueError("target roots must be closed under complex conjugation")
    coeffs = np.array([1.0 + 0j])
    for r in roots:
        coeffs = np.convolve(coeffs, [1.0, -r])
    return coeffs.real.copy()


def conjugate_closed(roots, tol: float = 1e-9) -> bool:
    remaining = list(np.asarray(roots, dtype=complex))
    while remaining:
        r = remaining.pop()
        if abs(r.imag) <= tol * max(1.0, abs(r)):
            continue
        j = min(range(len(remaining)), key=lambda i: abs(remaining[i] - r.conjugate()), default=None)
        if j is None or abs(remaining[j] - r.conjugate()) > tol * max(1.0, abs(r)):
            return False
        remaining.pop(j)
    return True


def poly_eval(coeffs, z):
    """Horner evaluation of a descending-order polynomial (complex-safe)."""
    acc = 0.0 + 0j
    for c in coeffs:
        acc = acc * z + c
    return acc


def poly_eval_matrix(coeffs, a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    acc = np.zeros((n, n))
    for c in coeffs:
        acc = acc @ a + c * np.eye(n)
    return acc


def observability_matrix(a, c) -> np.ndarray:
    a = _square(a)
    c = as_matrix(np.atleast_2d(c))
    if c.shape != (1, a.shape[0]):
        raise DimensionError(f"output map must be 1x{a.shape[0]}, got {c.shape}")
    rows = [c[0]]
    for _ in range(a.shape[0] - 1):
        rows.append(rows[-1] @ a)
    return np.vstack(rows)


def pole_place_observer(a, c, targets) -> np.ndarray:
    """Observer gain ``l`` (length n) so that ``a - outer(l, c)`` has ``targets`` as eigenvalues.

    Single-output Ackermann formula applied to the dual pair:
    ``l = phi(a) @ inv(O) @ e_n`` with ``O`` the observability matrix and
    ``phi`` the desired characteristic polynomial.
    """
    a = _square(a)
    n = a.shape[0]
    targets = np.asarray(targets, dtype=complex)
    if targets.shape != (n,):
        raise DimensionError(f"need {n} target poles, got {targets.shape}")
    phi = poly_from_roots(targets)
    obs = observability_matrix(a, c)
    if np.linalg.matrix_rank(obs) < n:
        raise RankError("pair is not observable")
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    return poly_eval_matrix(phi, a) @ np.linalg.solve(obs, e_n)
