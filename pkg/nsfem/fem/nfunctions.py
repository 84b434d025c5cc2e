"""N-functions of (p, delta)-type and the tensor maps S, DS and F.

Scalar functions take and return floats. Tensor functions accept arrays whose
trailing two axes are a 2x2 matrix, so a whole quadrature table can be pushed
through them at once.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np
import numpy.typing as npt
from scipy.integrate import quad
from scipy.optimize import brentq

from nsfem.core.config import settings
from nsfem.core.errors import DomainError, NumericError
from nsfem.models.models import FlowLaw

# A 2x2 matrix, or a stack of them along leading axes.
Tensor2 = npt.NDArray[np.float64]

SHIFT_QUAD_RTOL = 1e-10
_SERIES_CUTOFF = 1e-4


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not value >= 0.0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return value


def _phi_values(p: float, delta, t) -> np.ndarray:
    """Vectorised closed form of int_0^t (delta+s)^(p-2) s ds.

    With u = t/delta the integral is delta^p g(u), where
    g(u) = ((1+u)^p - 1)/p - ((1+u)^(p-1) - 1)/(p-1). For small u a Taylor
    series replaces the cancelling difference.
    """
    t = np.asarray(t, dtype=float)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), t.shape)
    if p == 2.0:
        return 0.5 * t * t
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        pure = t**p / p
        u = t / delta
        log_term = np.log1p(u)
        closed = delta**p * (np.expm1(p * log_term) / p - np.expm1((p - 1.0) * log_term) / (p - 1.0))
        series = delta**p * u * u * (
            0.5 + u * ((p - 2.0) / 3.0 + u * ((p - 2.0) * (p - 3.0) / 8.0 + u * (p - 2.0) * (p - 3.0) * (p - 4.0) / 30.0))
        )
        out = np.where(delta == 0.0, pure, np.where(u < _SERIES_CUTOFF, series, closed))
    return out


def phi(law: FlowLaw, t: float) -> float:
    """phi(t) = int_0^t phi'(s) ds in closed form."""
    t = _check_nonneg("t", t)
    return float(_phi_values(law.p, law.delta, t))


def phi_prime(law: FlowLaw, t: float) -> float:
    t = _check_nonneg("t", t)
    base = law.delta + t
    if base == 0.0:
        return 0.0
    return base ** (law.p - 2.0) * t


def phi_prime_shifted(law: FlowLaw, a: float, t: float) -> float:
    """phi'_a(t) = phi'(a+t) t/(a+t) = (delta+a+t)^(p-2) t."""
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    base = law.delta + a + t
    if base == 0.0:
        return 0.0
    return base ** (law.p - 2.0) * t


def phi_shifted(law: FlowLaw, a: float, t: float) -> float:
    """Shifted N-function phi_a(t) by adaptive quadrature."""
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    if t == 0.0:
        return 0.0
    result = quad(
        lambda s: phi_prime_shifted(law, a, s),
        0.0,
        t,
        epsabs=0.0,
        epsrel=SHIFT_QUAD_RTOL,
        limit=200,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        achieved = abserr / abs(value) if value else abserr
        raise NumericError(f"phi_shifted quadrature did not converge for a={a}, t={t}", achieved)
    return value


def shifted_regularization_identity(law: FlowLaw, a: float, t: float) -> float:
    """phi_a(t) through the identity phi_a = phi_{p, delta+a} (closed form)."""
    a = _check_nonneg("a", a)
    t = _check_nonneg("t", t)
    return float(_phi_values(law.p, law.delta + a, t))


def phi_conjugate(law: FlowLaw, a: float, s: float) -> float:
    """Legendre transform (phi_a)*(s) = s t* - phi_a(t*) with phi'_a(t*) = s."""
    a = _check_nonneg("a", a)
    s = _check_nonneg("s", s)
    if s == 0.0:
        return 0.0

    def gap(t: float) -> float:
        return phi_prime_shifted(law, a, t) - s

    hi = 1.0
    for _ in range(400):
        if gap(hi) >= 0.0:
            break
        hi *= 2.0
    else:
        raise NumericError(f"could not bracket phi'_a(t) = {s}", hi)
    try:
        t_star = brentq(gap, 0.0, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    except (ValueError, RuntimeError) as exc:
        raise NumericError(f"root finding for the conjugate failed: {exc}") from exc
    return s * t_star - phi_shifted(law, a, t_star)


# ---- tensor maps ----

def sym(A: Tensor2) -> Tensor2:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def frobenius(A: Tensor2, B: Tensor2) -> np.ndarray:
    return np.einsum("...ij,...ij->...", A, B)


def tensor_norm(A: Tensor2) -> np.ndarray:
    return np.sqrt(frobenius(A, A))


def _guarded_power(law: FlowLaw, n: np.ndarray, exponent: float) -> Tuple[np.ndarray, np.ndarray]:
    """(delta+n)^exponent and the mask of points caught by the singularity guard."""
    guard = settings.SINGULARITY_GUARD
    small = n < guard
    if law.delta == 0.0:
        base = np.maximum(n, guard)
    else:
        base = law.delta + np.where(small, 0.0, n)
    return base**exponent, small


def stress_S(law: FlowLaw, A: Tensor2) -> Tensor2:
    """S(A) = nu0 (delta + |A^sym|)^(p-2) A^sym."""
    As = sym(A)
    n = tensor_norm(As)
    factor, small = _guarded_power(law, n, law.p - 2.0)
    if law.delta == 0.0:
        factor = np.where(small, 0.0, factor)
    return law.nu0 * factor[..., None, None] * As


def stress_coefficients(law: FlowLaw, As: Tensor2) -> Tuple[np.ndarray, np.ndarray]:
    """Scalar factors (a, b) with DS(A)[H] = a H^s + b (A^s:H^s) A^s.

    As must already be symmetric.
    """
    n = tensor_norm(As)
    first, small = _guarded_power(law, n, law.p - 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        second = (law.p - 2.0) * (law.delta + n) ** (law.p - 3.0) / n
    second = np.where(small, 0.0, second)
    return law.nu0 * first, law.nu0 * second


def stress_tangent(law: FlowLaw, A: Tensor2, H: Tensor2) -> Tensor2:
    """Directional derivative DS(A)[H]."""
    As = sym(A)
    Hs = sym(H)
    a, b = stress_coefficients(law, As)
    return a[..., None, None] * Hs + (b * frobenius(As, Hs))[..., None, None] * As


def map_F(law: FlowLaw, A: Tensor2) -> Tensor2:
    """F(A) = (delta + |A^sym|)^((p-2)/2) A^sym (no nu0 factor)."""
    As = sym(A)
    n = tensor_norm(As)
    factor, small = _guarded_power(law, n, 0.5 * (law.p - 2.0))
    if law.delta == 0.0:
        factor = np.where(small, 0.0, factor)
    return factor[..., None, None] * As


def shifted_modular_density(law: FlowLaw, shift: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Pointwise phi_{shift}(t) for arrays, via phi_a = phi_{p, delta+a}."""
    shift = np.asarray(shift, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(shift < 0.0) or np.any(t < 0.0):
        raise DomainError("shift and argument must be non-negative")
    return _phi_values(law.p, law.delta + shift, t)


def delta2_exponent(p: float) -> float:
    """Exponent K = 2^max(2,p) bounding phi(2t) <= K phi(t)."""
    return 2.0 ** max(2.0, p)


__all__ = [
    "Tensor2",
    "phi",
    "phi_prime",
    "phi_prime_shifted",
    "phi_shifted",
    "shifted_regularization_identity",
    "phi_conjugate",
    "sym",
    "frobenius",
    "tensor_norm",
    "stress_S",
    "stress_coefficients",
    "stress_tangent",
    "map_F",
    "shifted_modular_density",
    "delta2_exponent",
]

