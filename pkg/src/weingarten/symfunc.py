"""Normalized elementary symmetric functions and the curvature operator built on them.

Everything here works on principal-curvature candidate vectors ``lam`` of
length n (batched along leading axes) or on symmetric n x n matrices whose
eigenvalues play that role.  ``S_k`` always denotes the k-th elementary
symmetric function normalized so that S_k(1, ..., 1) = 1; the curvature
operator is F(A) = S_k(eig(A))^(1/k), positively homogeneous of degree one
and concave on the positive cone.
"""

from __future__ import annotations

from math import comb

import numpy as np

__all__ = [
    "ConeViolationError",
    "cone_epsilon",
    "in_positive_cone",
    "elem_sym",
    "elem_sym_norm",
    "weingarten_F",
    "dual_F",
    "F_gradient",
    "maclaurin_report",
    "eigenvalues_sym",
]


class ConeViolationError(ValueError):
    """Raised when an argument must lie in the positive cone but does not."""


def cone_epsilon(lam: np.ndarray) -> float:
    """Strictness margin for cone membership: 1e-12 * max(1, |lam|_inf)."""
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return 1e-12
    return 1e-12 * max(1.0, float(np.max(np.abs(lam))))


def in_positive_cone(lam) -> bool:
    """True iff every entry exceeds the cone tolerance (strict positivity)."""
    lam = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(lam)):
        return False
    return bool(np.min(lam) > cone_epsilon(lam))


def _require_cone(lam: np.ndarray, what: str) -> None:
    lam = np.asarray(lam, dtype=float)
    eps = cone_epsilon(lam)
    if not np.all(np.isfinite(lam)) or np.min(lam) <= eps:
        raise ConeViolationError(
            f"{what}: values must lie strictly in the positive cone "
            f"(min={np.min(lam):.3e}, tol={eps:.3e})"
        )


def elem_sym(lam: np.ndarray) -> np.ndarray:
    """All unnormalized elementary symmetric polynomials of ``lam``.

    ``lam`` has shape (..., n); the result has shape (..., n+1) with entry j
    equal to e_j.  Uses the stable product-coefficient recurrence, O(n^2).
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,), dtype=float)
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i]
        for j in range(i + 1, 0, -1):
            e[..., j] = e[..., j] + li * e[..., j - 1]
    return e


def elem_sym_norm(lam: np.ndarray, k: int) -> np.ndarray:
    """Normalized S_k(lam) = e_k(lam) / C(n, k); requires 1 <= k <= n."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    return elem_sym(lam)[..., k] / comb(n, k)


def eigenvalues_sym(A: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a (stack of) symmetric matrices."""
    return np.linalg.eigvalsh(np.asarray(A, dtype=float))


def weingarten_F(A: np.ndarray, k: int) -> float | np.ndarray:
    """F(A) = S_k(eig(A))^(1/k) for A with eigenvalues in the positive cone."""
    lam = eigenvalues_sym(A)
    _require_cone(lam, "weingarten_F")
    out = elem_sym_norm(lam, k) ** (1.0 / k)
    return float(out) if out.ndim == 0 else out


def dual_F(A: np.ndarray, k: int) -> float | np.ndarray:
    """Quotient form (S_n / S_{n-k})^(1/k) evaluated on the eigenvalues of A.

    With S_0 = 1 the k = n case degenerates to S_n^(1/n) as it should.
    """
    lam = eigenvalues_sym(A)
    _require_cone(lam, "dual_F")
    n = lam.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    e = elem_sym(lam)
    sn = e[..., n]  # C(n, n) = 1
    snk = e[..., n - k] / comb(n, n - k)
    out = (sn / snk) ** (1.0 / k)
    return float(out) if np.ndim(out) == 0 else out


def _dSk_dlam(lam: np.ndarray, k: int) -> np.ndarray:
    """Partials of the normalized S_k with respect to each eigenvalue.

    dS_k/dlam_i = e_{k-1}(lam with entry i removed) / C(n, k).
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    cols = []
    for i in range(n):
        rest = np.delete(lam, i, axis=-1)
        cols.append(elem_sym(rest)[..., k - 1])
    return np.stack(cols, axis=-1) / comb(n, k)


def F_gradient(A: np.ndarray, k: int) -> np.ndarray:
    """Matrix derivative of F at A: the elliptic coefficient matrix {F^{ij}}.

    For a symmetric function of eigenvalues the gradient is
    Q diag(df/dlam) Q^T, valid through repeated eigenvalues.
    """
    A = np.asarray(A, dtype=float)
    lam, Q = np.linalg.eigh(A)
    _require_cone(lam, "F_gradient")
    sk = elem_sym_norm(lam, k)
    dF = (sk ** (1.0 / k - 1.0))[..., None] / k * _dSk_dlam(lam, k)
    return np.einsum("...ij,...j,...kj->...ik", Q, dF, Q)


def maclaurin_report(lam: np.ndarray) -> np.ndarray:
    """The chain (S_1, S_2^(1/2), ..., S_n^(1/n)); non-increasing on the cone."""
    lam = np.asarray(lam, dtype=float)
    _require_cone(lam, "maclaurin_report")
    n = lam.shape[-1]
    e = elem_sym(lam)
    chain = [(e[..., j] / comb(n, j)) ** (1.0 / j) for j in range(1, n + 1)]
    return np.stack(chain, axis=-1)
