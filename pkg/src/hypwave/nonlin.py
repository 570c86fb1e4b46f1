"""The logarithmic nonlinearity family.

Two concrete nonlinearities are provided. The canonical one,

    F_p(u) = (asinh(1/|u|))^{-(p-1)} |u|,

is even, C^1, vanishes to first order at the origin, and behaves like
(ln 1/|u|)^{1-p} |u| for small u and like |u|^p for large u. The generic
one realizes the two lower bounds

    F(u) >= delta0 (ln 1/|u|)^{1-p} |u|   for |u| <= delta0,
    F(u) >= delta0 |u|^q                  for |u| >= 1/delta0,

with equality on both outer branches and a single C^1 cubic Hermite blend
in log-log coordinates between them: writing x = ln|u| and g(x) = ln F(e^x),
the two branches give

    g_left(x)  = ln(delta0) + x + (1-p) ln(-x),      x <= ln(delta0),
    g_right(x) = ln(delta0) + q x,                   x >= -ln(delta0),

and on [ln(delta0), -ln(delta0)] the module uses the cubic Hermite
interpolant of (g_left, g_left') and (g_right, g_right') at the endpoints.
That interpolant is the published formula of the piecewise nonlinearity.

The Lipschitz envelope G(u) = A (ln 1/u)^{1-p} controls difference
quotients of either nonlinearity on (0, 1/A] once A is large enough;
fit_A computes such an A numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hypgeo import DomainError

__all__ = [
    "NonlinearitySpec",
    "F_canonical",
    "F_generic",
    "G_envelope",
    "nonlinearity",
    "fit_A",
    "lipschitz_diff_bound",
]

_KINDS = ("canonical_sinh_inverse", "piecewise_generic")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Parameters of one member of the nonlinearity family.

    p is the logarithmic exponent, q the large-u power on the blow-up
    side, delta0 the constant in the lower bounds, and A the constant of
    the Lipschitz envelope G.
    """

    p: float
    q: float
    delta0: float
    A: float
    kind: str = "canonical_sinh_inverse"

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError("p must exceed 1")
        if not self.q > 1:
            raise DomainError("q must exceed 1")
        if not 0 < self.delta0 < 1:
            raise DomainError("delta0 must lie in (0, 1)")
        if not self.A > 0:
            raise DomainError("A must be positive")
        if self.kind not in _KINDS:
            raise DomainError(f"kind must be one of {_KINDS}")


def F_canonical(u, p):
    """(asinh(1/|u|))^{-(p-1)} |u|, extended by 0 at u = 0; even in u."""
    if not p > 1:
        raise DomainError("p must exceed 1")
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    safe = np.where(au > 0, au, 1.0)
    # 1/u overflows for subnormal u; arcsinh(inf)^(1-p) = 0 is the correct
    # limit, so the overflow is benign
    with np.errstate(over="ignore"):
        out = np.where(au > 0, np.arcsinh(1.0 / safe) ** (1.0 - p) * au, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@lru_cache(maxsize=64)
def _blend_coeffs(p, q, delta0):
    """Cubic Hermite data for the log-log blend of F_generic on
    [ln delta0, -ln delta0], plus a construction-time monotonicity check."""
    xl = np.log(delta0)
    xr = -np.log(delta0)
    gl = np.log(delta0) + xl + (1.0 - p) * np.log(-xl)
    dgl = 1.0 + (1.0 - p) / xl
    gr = np.log(delta0) + q * xr
    dgr = q
    h = xr - xl
    # monotone means g' >= 0 across the blend; for a cubic Hermite the
    # derivative is a quadratic in the panel coordinate, sampled densely
    s = np.linspace(0.0, 1.0, 257)
    dH = (gl * (6 * s * s - 6 * s) / h + dgl * (3 * s * s - 4 * s + 1)
          + gr * (6 * s - 6 * s * s) / h + dgr * (3 * s * s - 2 * s))
    if np.any(dH < 0):
        raise DomainError(
            f"(p={p}, q={q}, delta0={delta0}) gives a non-monotone blend; "
            "the piecewise nonlinearity requires branch slopes close enough "
            "to the chord")
    return xl, xr, gl, dgl, gr, dgr


def _hermite(x, xl, xr, gl, dgl, gr, dgr):
    h = xr - xl
    s = (x - xl) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * gl + h10 * h * dgl + h01 * gr + h11 * h * dgr


def F_generic(u, spec: NonlinearitySpec):
    """The piecewise nonlinearity described in the module docstring."""
    if spec.kind != "piecewise_generic":
        raise DomainError("F_generic needs a spec of kind piecewise_generic")
    coeffs = _blend_coeffs(spec.p, spec.q, spec.delta0)
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    safe = np.where(au > 0, au, 0.5)
    x = np.log(safe)
    log_base = np.where(x < 0, -x, 1.0)
    small = spec.delta0 * log_base ** (1.0 - spec.p) * safe
    large = spec.delta0 * safe**spec.q
    blend = np.exp(_hermite(x, *coeffs))
    out = np.select(
        [au == 0.0, au <= spec.delta0, au >= 1.0 / spec.delta0],
        [0.0, small, large],
        default=blend,
    )
    if out.ndim == 0:
        return float(out)
    return out


def G_envelope(u_abs, p, A):
    """The Lipschitz envelope A (ln 1/u)^{1-p} on (0, 1/A]."""
    if not p > 1:
        raise DomainError("p must exceed 1")
    if not A > 0:
        raise DomainError("A must be positive")
    u_abs = np.asarray(u_abs, dtype=float)
    if np.any(u_abs <= 0) or np.any(u_abs > 1.0 / A + 1e-15):
        raise DomainError(f"G_envelope domain is (0, 1/A] = (0, {1.0 / A:.6g}]")
    out = A * (-np.log(u_abs)) ** (1.0 - p)
    if out.ndim == 0:
        return float(out)
    return out


def nonlinearity(spec: NonlinearitySpec):
    """The nonlinearity of a spec as a plain callable of u."""
    if spec.kind == "canonical_sinh_inverse":
        return lambda u: F_canonical(u, spec.p)
    return lambda u: F_generic(u, spec)


def fit_A(spec: NonlinearitySpec, floor=0.0, u_star=0.5, n_grid=4001):
    """A numeric constant A for the envelope G of this nonlinearity.

    Computes sup |F'(u)| (ln 1/u)^{p-1} over a log grid on (0, u_star]
    through central difference quotients, pads it by 5 percent, and
    returns at least max(1/u_star, floor). The returned A satisfies
    |F'(w)| <= G(w) for all w in (0, 1/A], which is what the difference
    bound needs, because 1/A <= u_star and G only grows with A.
    """
    if not 0 < u_star < 1:
        raise DomainError("u_star must lie in (0, 1)")
    F = nonlinearity(spec)
    u = np.geomspace(1e-16, u_star, n_grid)
    h = 1e-6 * u
    dF = (F(u + h) - F(u - h)) / (2.0 * h)
    sup = float(np.max(np.abs(dF) * (-np.log(u)) ** (spec.p - 1.0)))
    return max(1.0 / u_star, floor, 1.05 * sup)


def lipschitz_diff_bound(u, v, spec: NonlinearitySpec):
    """(|F(u) - F(v)|, G(max(|u|,|v|)) |u - v|) for |u|, |v| <= 1/A.

    The second component bounds the first whenever A was fitted for this
    nonlinearity; equal arguments give (0, 0).
    """
    cap = 1.0 / spec.A
    if abs(u) > cap + 1e-15 or abs(v) > cap + 1e-15:
        raise DomainError(f"lipschitz_diff_bound needs |u|, |v| <= 1/A = {cap:.6g}")
    F = nonlinearity(spec)
    diff = abs(float(F(u)) - float(F(v)))
    m = max(abs(u), abs(v))
    if m == 0.0 or u == v:
        return 0.0, 0.0
    bound = float(G_envelope(m, spec.p, spec.A)) * abs(u - v)
    return diff, bound
