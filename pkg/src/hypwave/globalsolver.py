"""Small-data global solving in the weighted space X_eps.

The integral equation

    u = eps u0 + int_0^t I(t - tau, r, F(u(tau, .))) dtau

is solved by Picard iteration on a uniform (t, r) grid, with convergence
measured in the norm ||Phi_h u||_inf, Phi_h = e^{r/2} <t-r>^h. The module
also measures the contraction factor of the Duhamel-composed nonlinearity
on random pairs from the ball of radius 2 eps N_h (the empirical content
of the contraction lemma), locates the largest admissible eps by
bisection, checks the claim integral that drives the lemma's proof,
verifies the dispersive decay of the linear evolution by regression, and
computes the guaranteed local existence window.

Heavy objects (the gridded propagation table, the linear data evolution,
and the empirical N_h) are cached per grid and quadrature configuration,
so repeated probes at different eps share one table build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .hypgeo import (
    DomainError,
    EnvelopeParams,
    K_factor,
    QuadratureConfig,
    WeightParams,
    bracket,
    phi_weight,
    theta_k,
)
from .meanprop import (
    MonotoneWeight,
    PropagatorTable,
    RadialProfile,
    SpaceTimeField,
    W_evaluator,
    _as_profile,
    linear_field,
)
from .nonlin import NonlinearitySpec, nonlinearity

__all__ = [
    "SolverConfig",
    "ContractionReport",
    "DecayFitReport",
    "ConvergenceError",
    "EscapeError",
    "weighted_norm",
    "phi_weight_grid",
    "linear_data_field",
    "estimate_N_h",
    "picard_solve",
    "contraction_probe",
    "epsilon_threshold",
    "claim_bound_check",
    "decay_fit",
    "local_existence_window",
    "clear_caches",
]


class ConvergenceError(RuntimeError):
    """Picard iteration exhausted max_iters; carries the history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class EscapeError(RuntimeError):
    """An iterate left the ball where the nonlinearity is controlled."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one Picard run.

    grid is (t_max, r_max, dt, dr). The weight exponent h must lie in
    (1, p - 2), which forces p > 3: this is the contraction regime.
    """

    p: float
    h: float
    epsilon: float
    grid: tuple = (8.0, 8.0, 0.05, 0.05)
    max_iters: int = 40
    fixed_point_tol: float = 1e-10

    def __post_init__(self):
        if not self.p > 3 or not 1.0 < self.h < self.p - 2.0:
            raise DomainError(
                f"h must lie in (1, p-2); got h = {self.h} with p = {self.p}")
        if self.epsilon < 0:
            raise DomainError("epsilon must be nonnegative")
        t_max, r_max, dt, dr = self.grid
        if min(t_max, r_max, dt, dr) <= 0:
            raise DomainError("grid entries must be positive")
        if t_max < dt:
            raise DomainError("t_max must be at least dt")
        for span, step, name in ((t_max, dt, "t_max/dt"), (r_max, dr, "r_max/dr")):
            if abs(span / step - round(span / step)) > 1e-9:
                raise DomainError(f"{name} must be an integer")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if not self.fixed_point_tol > 0:
            raise DomainError("fixed_point_tol must be positive")

    @property
    def t_grid(self):
        t_max, _, dt, _ = self.grid
        return np.linspace(0.0, t_max, round(t_max / dt) + 1)

    @property
    def r_grid(self):
        _, r_max, _, dr = self.grid
        return np.linspace(0.0, r_max, round(r_max / dr) + 1)


@dataclass(frozen=True)
class ContractionReport:
    epsilon: float
    sampled_pairs: int
    max_ratio: float
    ratios: tuple

    def __post_init__(self):
        if self.ratios and not np.isclose(self.max_ratio, max(self.ratios)):
            raise DomainError("max_ratio must be the maximum of ratios")
        if self.max_ratio < 0:
            raise DomainError("max_ratio must be nonnegative")


@dataclass(frozen=True)
class DecayFitReport:
    slope_r: float
    slope_tr: float
    sup_weighted: float
    fit_window: str

    def __post_init__(self):
        for name in ("slope_r", "slope_tr", "sup_weighted"):
            if not np.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")


# ---------------------------------------------------------------------------
# weights and norms


def phi_weight_grid(t_grid, r_grid, h):
    """Phi_h = e^{r/2} <t-r>^h evaluated on the product grid."""
    T, R = np.meshgrid(np.asarray(t_grid, float), np.asarray(r_grid, float),
                       indexing="ij")
    return phi_weight(T, R, WeightParams(h=h))


def weighted_norm(u: SpaceTimeField, h):
    """max over the grid of Phi_h |u|."""
    if not h > 0:
        raise DomainError("h must be positive")
    return float(np.max(phi_weight_grid(u.t_grid, u.r_grid, h) * np.abs(u.values)))


# ---------------------------------------------------------------------------
# cached heavy objects

_TABLE_CACHE = {}
_NH_CACHE = {}


def clear_caches():
    _TABLE_CACHE.clear()
    _NH_CACHE.clear()


def _grid_key(cfg: SolverConfig, q: QuadratureConfig):
    return cfg.grid + (q.nodes_inner, q.nodes_outer)


def _get_table(cfg: SolverConfig, q: QuadratureConfig):
    key = _grid_key(cfg, q)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = PropagatorTable(cfg.t_grid, cfg.r_grid, q)
    return _TABLE_CACHE[key]


def linear_data_field(u0, u1, cfg: SolverConfig, q=QuadratureConfig()):
    """The linear evolution u0_lin of unit data (u0, u1) on the grid.

    For position data u0 = 0 (the common case) this is the gridded sine
    propagation of u1 through the cached table. A nonzero u0 adds the time
    derivative of its sine propagation, computed by centered differencing
    with step dt/2; the t = 0 row is u0 itself.

    Data beyond r_max is treated as zero, so the values are exact only on
    the triangle t + r <= r_max; the solver's other consumers share this
    truncation, which keeps the fixed-point problem self-consistent.
    """
    u0 = _as_profile(u0)
    u1 = _as_profile(u1)
    r_grid = cfg.r_grid
    u0_samples = u0(r_grid)
    out = _get_table(cfg, q).apply_linear(u1(r_grid))
    if np.any(u0_samples != 0.0):
        t_max, _, dt, _ = cfg.grid
        delta = 0.5 * dt
        up = linear_field(u0, cfg.t_grid[1:] + delta, r_grid, q).values
        dn = linear_field(u0, cfg.t_grid[1:] - delta, r_grid, q).values
        out[1:] += (up - dn) / (2.0 * delta)
        out[0] += u0_samples
    return out


def estimate_N_h(k, h, cfg: SolverConfig, q=QuadratureConfig()):
    """Empirical N_h: sup of Phi_h times the linear evolution of data
    (0, theta_k), padded by 10 percent. Cached per (k, h, grid)."""
    key = (k, h) + _grid_key(cfg, q)
    if key not in _NH_CACHE:
        env = EnvelopeParams(k=k)
        vals = linear_data_field(0.0, lambda lam: theta_k(lam, env), cfg, q)
        sup = float(np.max(phi_weight_grid(cfg.t_grid, cfg.r_grid, h) * np.abs(vals)))
        _NH_CACHE[key] = 1.1 * sup
    return _NH_CACHE[key]


# ---------------------------------------------------------------------------
# Picard iteration


def _check_envelope(prof, name, k, r_grid):
    vals = np.abs(_as_profile(prof)(r_grid))
    env = theta_k(r_grid, EnvelopeParams(k=k))
    if np.any(vals > env * (1.0 + 1e-9)):
        j = int(np.argmax(vals - env))
        raise DomainError(
            f"{name} violates the data envelope theta_k at r = {r_grid[j]:.4g} "
            f"(|{name}| = {vals[j]:.3e} > {env[j]:.3e}, k = {k})")


def picard_solve(u0, u1, spec, cfg: SolverConfig, data_k=1.0,
                 q=QuadratureConfig()):
    """Fixed-point iteration for the nonlinear integral equation.

    Returns (field, history) where history[n] is the weighted norm of the
    difference between iterates n+1 and n. spec = None solves the linear
    problem (F = 0). Raises EscapeError if an iterate leaves the ball
    |u| <= 1/A where the nonlinearity's envelope applies, and
    ConvergenceError (carrying the history) if max_iters sweeps do not
    reach fixed_point_tol.
    """
    r_grid = cfg.r_grid
    _check_envelope(u0, "u0", data_k, r_grid)
    _check_envelope(u1, "u1", data_k, r_grid)
    table = _get_table(cfg, q)
    lin = cfg.epsilon * linear_data_field(u0, u1, cfg, q)
    if spec is None:
        F = None
        cap = np.inf
    else:
        F = nonlinearity(spec)
        cap = 1.0 / spec.A
    phi = phi_weight_grid(cfg.t_grid, cfg.r_grid, cfg.h)

    cur = lin.copy()
    history = []
    for n in range(cfg.max_iters):
        if np.max(np.abs(cur)) > cap:
            raise EscapeError(
                f"iterate {n} exceeds the envelope ball 1/A = {cap:.4g}; "
                "epsilon is too large for the contraction regime")
        nxt = lin if F is None else lin + table.duhamel_field(F(cur))
        diff = float(np.max(phi * np.abs(nxt - cur)))
        history.append(diff)
        cur = nxt
        if diff < cfg.fixed_point_tol:
            return SpaceTimeField(cfg.t_grid, r_grid, cur), history
    raise ConvergenceError(
        f"no fixed point within {cfg.max_iters} sweeps "
        f"(last difference {history[-1]:.3e})", history)


# ---------------------------------------------------------------------------
# contraction measurement


def _random_ball_field(rng, t_grid, r_grid, phi, radius, n_features=6):
    """A smooth random field with weighted norm exactly radius: tensor
    random Fourier features, normalized to sup 1, divided by the weight."""
    T, R = np.meshgrid(t_grid, r_grid, indexing="ij")
    xi = np.zeros_like(T)
    amps = rng.standard_normal(n_features)
    w_t = rng.uniform(0.0, 1.5, n_features)
    w_r = rng.uniform(0.0, 1.5, n_features)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_features)
    for a, wt, wr, ph in zip(amps, w_t, w_r, phase):
        xi += a * np.cos(wt * T + wr * R + ph)
    sup = np.max(np.abs(xi))
    if sup == 0.0:
        xi[:] = 1.0
        sup = 1.0
    return radius * (xi / sup) / phi


def _contraction_ratio(table, F, phi, u, v):
    """||L F(u) - L F(v)|| / ||u - v|| in the Phi norm; None if u = v."""
    denom = float(np.max(phi * np.abs(u - v)))
    if denom == 0.0:
        return None
    lu = table.duhamel_field(F(u))
    lv = table.duhamel_field(F(v))
    return float(np.max(phi * np.abs(lu - lv))) / denom


def contraction_probe(spec: NonlinearitySpec, cfg: SolverConfig, n_pairs=20,
                      rng_seed=0, data_k=1.0, q=QuadratureConfig()):
    """Empirical contraction factor of u -> duhamel(F(u)) on the ball.

    Samples n_pairs independent pairs (u, v) with weighted norm equal to
    the ball radius 2 eps N_h and reports the largest ratio
    ||L F(u) - L F(v)|| / ||u - v|| in the Phi_h norm. Degenerate pairs
    (u = v) are skipped.
    """
    rng = np.random.default_rng(rng_seed)
    table = _get_table(cfg, q)
    F = nonlinearity(spec)
    phi = phi_weight_grid(cfg.t_grid, cfg.r_grid, cfg.h)
    radius = 2.0 * cfg.epsilon * estimate_N_h(data_k, cfg.h, cfg, q)
    if radius > 1.0 / spec.A:
        raise EscapeError(
            f"ball radius 2 eps N_h = {radius:.4g} exceeds 1/A = "
            f"{1.0 / spec.A:.4g}; the envelope does not apply")
    ratios = []
    for _ in range(n_pairs):
        u = _random_ball_field(rng, cfg.t_grid, cfg.r_grid, phi, radius)
        v = _random_ball_field(rng, cfg.t_grid, cfg.r_grid, phi, radius)
        ratio = _contraction_ratio(table, F, phi, u, v)
        if ratio is not None:
            ratios.append(ratio)
    max_ratio = max(ratios) if ratios else 0.0
    return ContractionReport(epsilon=cfg.epsilon, sampled_pairs=len(ratios),
                             max_ratio=max_ratio, ratios=tuple(ratios))


def epsilon_threshold(spec: NonlinearitySpec, cfg: SolverConfig,
                      target_ratio=0.5, rng_seed=0, data_k=1.0,
                      n_pairs=20, n_steps=20, q=QuadratureConfig()):
    """Largest probed eps whose contraction factor stays below target_ratio.

    Bisection with n_steps steps on [1e-12, 1]; the returned value is the
    lower bracket end, so it is itself admissible: a contraction_probe at
    the result with the same rng_seed and n_pairs reproduces a max_ratio
    within target_ratio, because the sampled pair shapes do not depend on
    eps (only the ball radius scales). Deterministic for a fixed rng_seed.
    Raises ConvergenceError when even the floor 1e-12 fails the probe.
    """

    def ratio_at(eps):
        probe_cfg = SolverConfig(p=cfg.p, h=cfg.h, epsilon=eps, grid=cfg.grid,
                                 max_iters=cfg.max_iters,
                                 fixed_point_tol=cfg.fixed_point_tol)
        try:
            rep = contraction_probe(spec, probe_cfg, n_pairs=n_pairs,
                                    rng_seed=rng_seed, data_k=data_k, q=q)
        except EscapeError:
            return np.inf
        return rep.max_ratio

    lo, hi = 1e-12, 1.0
    if ratio_at(lo) > target_ratio:
        raise ConvergenceError(
            f"no admissible epsilon found down to the floor {lo:g} "
            f"(target ratio {target_ratio})")
    for _ in range(n_steps):
        mid = 0.5 * (lo + hi)
        if ratio_at(mid) <= target_ratio:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# the claim integral


def claim_bound_check(p, h, epsilon, t, r, q=QuadratureConfig(),
                      tau_per_unit=4):
    """The double integral controlling the contraction lemma.

    claim_value = int_0^t W(t - tau, r, f_tau) dtau with

        f_tau(lam) = (ln(1/eps) + lam)^{1-p} sinh(lam) <tau-lam>^{-h}
                     (cosh lam)^{-1/2},

    and weighted = claim_value (cosh r)^{1/2} <t-r>^h, the quantity the
    lemma needs to be small. The tau integral is composite Simpson; the
    inner W uses the 2cosh weight.
    """
    if not p > 3 or not 1.0 < h < p - 2.0:
        raise DomainError("claim_bound_check needs p > 3 and h in (1, p-2)")
    if not 0 < epsilon <= 1:
        raise DomainError("epsilon must lie in (0, 1]")
    if t < 0 or r < 0:
        raise DomainError("t and r must be nonnegative")
    if t == 0.0:
        return 0.0, 0.0
    a = MonotoneWeight.two_cosh()
    log_inv_eps = np.log(1.0 / epsilon)

    def f_tau(tau):
        def f(lam):
            lam = np.asarray(lam, dtype=float)
            return ((log_inv_eps + lam) ** (1.0 - p) * np.sinh(lam)
                    * bracket(tau - lam) ** (-h) / np.sqrt(np.cosh(lam)))

        return f

    n_tau = max(8, 2 * int(np.ceil(0.5 * tau_per_unit * t)))
    taus = np.linspace(0.0, t, n_tau + 1)
    vals = np.array([W_evaluator(t - tau, r, f_tau(tau), a, q) for tau in taus])
    claim_value = float(simpson(vals, x=taus))
    weighted = claim_value * np.sqrt(np.cosh(r)) * bracket(t - r) ** h
    return claim_value, float(weighted)


# ---------------------------------------------------------------------------
# dispersive decay


def decay_fit(u0_field: SpaceTimeField, k, ray_offset=1.0, min_r=1.0):
    """Regression checks of the linear dispersive decay.

    slope_r fits ln|u| against r along the ray t - r = ray_offset (the
    expected slope is -1/2); slope_tr fits ln|u| against t - r at the
    fixed radius nearest to half the time horizon; sup_weighted is the
    empirical decay constant sup |u| (cosh r)^{1/2} (cosh(t-r))^{1/2} / K_k.
    """
    t, r = u0_field.t_grid, u0_field.r_grid
    T, R = np.meshgrid(t, r, indexing="ij")
    U = np.abs(u0_field.values)

    on_ray = np.abs(T - R - ray_offset) < 1e-9
    sel = on_ray & (R >= min_r - 1e-9) & (U > 0)
    if np.count_nonzero(sel) < 4:
        raise DomainError("fewer than 4 points on the fit ray")
    slope_r = float(np.polyfit(R[sel], np.log(U[sel]), 1)[0])

    r_star_idx = int(np.argmin(np.abs(r - 0.5 * t[-1])))
    col = U[:, r_star_idx]
    tr = t - r[r_star_idx]
    sel_c = (tr >= ray_offset - 1e-9) & (col > 0)
    if np.count_nonzero(sel_c) < 4:
        raise DomainError("fewer than 4 points in the fixed-radius window")
    slope_tr = float(np.polyfit(tr[sel_c], np.log(col[sel_c]), 1)[0])

    weight = np.sqrt(np.cosh(R) * np.cosh(T - R)) / K_factor(T - R, k)
    sup_weighted = float(np.max(U * weight))
    window = (f"ray t-r={ray_offset}, r>={min_r}; "
              f"column r={r[r_star_idx]:.3g}, t-r>={ray_offset}")
    return DecayFitReport(slope_r=slope_r, slope_tr=slope_tr,
                          sup_weighted=sup_weighted, fit_window=window)


def local_existence_window(M):
    """The guaranteed contraction window T = 1/(2 sqrt(2) e M), capped at 1."""
    if not M > 0:
        raise DomainError("M must be positive")
    return min(1.0, 1.0 / (2.0 * np.sqrt(2.0) * np.e * M))
