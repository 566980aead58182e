"""Free propagator, time-cutoff Duhamel operator, Picard solver, split-step oracle.

The Duhamel integral is evaluated per spatial mode with a Filon-type rule:
the forcing samples are interpolated by cubics while the free-evolution
phase factor e^{i s |xi|^2} is integrated exactly.  This keeps the operator
accurate for every representable mode, including modes whose phase rotates
much faster than the time sampling (no spectral-in-time step is involved).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import partition as pt
from .gauge import RangeViolationError, nonlinearity_array
from .grid import (
    DomainError,
    GridSpec,
    SpaceTimeField,
    SpatialField,
    fft_space,
    fft_space_slices,
    ifft_space,
)
from .norms import ZkConfig, DEFAULT_ZK, besov_norm, fsigma_norm

__all__ = [
    "SolverConfig",
    "IterationTrace",
    "DivergenceError",
    "WindowError",
    "psi_profile",
    "psi_hat",
    "psi_hat_deriv",
    "free_evolution",
    "cutoff_free_solution",
    "duhamel",
    "picard_solve",
    "splitstep_solve",
    "lipschitz_probe",
]


class WindowError(ValueError):
    """Time window too short for the cutoff support."""


class DivergenceError(RuntimeError):
    """Picard iteration stopped contracting; carries the trace so far."""

    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


PSI_SUPPORT = 8.0 / 5.0


def psi_profile(t) -> np.ndarray:
    """Even time cutoff, 1 on [-5/4,5/4], supported in [-8/5,8/5] (same profile as eta0)."""
    return pt.eta0(t)


_PSI_QUAD_N = 8192


def _psi_quad_nodes() -> tuple[np.ndarray, np.ndarray]:
    # composite Simpson nodes/weights on [0, support]
    n = _PSI_QUAD_N
    t = np.linspace(0.0, PSI_SUPPORT, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (PSI_SUPPORT / n) / 3.0
    return t, w


def psi_hat(tau) -> np.ndarray:
    """Continuum Fourier transform of the time cutoff: 2*int_0^A psi(t) cos(t tau) dt."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    t, w = _psi_quad_nodes()
    vals = psi_profile(t) * w
    out = np.empty(tau.shape)
    chunk = max(1, 2_000_000 // len(t))
    flat = tau.ravel()
    res = np.empty(flat.shape)
    for i in range(0, len(flat), chunk):
        res[i : i + chunk] = 2.0 * np.cos(np.outer(flat[i : i + chunk], t)) @ vals
    out = res.reshape(tau.shape)
    return out


def psi_hat_deriv(tau) -> np.ndarray:
    """d/dtau of psi_hat: -2*int_0^A t psi(t) sin(t tau) dt."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    t, w = _psi_quad_nodes()
    vals = t * psi_profile(t) * w
    flat = tau.ravel()
    res = np.empty(flat.shape)
    chunk = max(1, 2_000_000 // len(t))
    for i in range(0, len(flat), chunk):
        res[i : i + chunk] = -2.0 * np.sin(np.outer(flat[i : i + chunk], t)) @ vals
    return res.reshape(tau.shape)


def _check_window(grid: GridSpec) -> None:
    if grid.t_window < 2.0 * PSI_SUPPORT:
        raise WindowError(
            f"time window {grid.t_window} too short for the cutoff support [-{PSI_SUPPORT}, {PSI_SUPPORT}]"
        )


# --- free evolution ---


def free_evolution(phi: SpatialField, t: float) -> SpatialField:
    """Multiply the spatial spectrum by e^(-i t |xi|^2); exact on the lattice."""
    g = phi.grid
    phase = np.exp(-1j * t * g.xi_square())
    if phi.domain == "freq":
        return SpatialField(g, phi.data * phase, "freq")
    return ifft_space(SpatialField(g, fft_space(phi).data * phase, "freq"))


def cutoff_free_solution(phi: SpatialField) -> SpaceTimeField:
    """psi(t) W(t) phi as a space-time field (physical domain)."""
    g = phi.grid
    _check_window(g)
    phat = phi.data if phi.domain == "freq" else fft_space(phi).data
    tt = g.t_axis()
    phases = np.exp(-1j * np.multiply.outer(g.xi_square(), tt))
    data = fft_space_slices(phat[..., None] * phases, g, inverse=True)
    data *= psi_profile(tt)
    return SpaceTimeField(g, data, "phys")


# --- Filon moments and the cumulative oscillatory integral ---

_SERIES_CUT = 0.5
_SERIES_TERMS = 20

# cubic Lagrange coefficients on nodes sigma in {-1,0,1,2}, rows = node, cols = sigma^q
_LAGRANGE = np.array(
    [
        [0.0, -1.0 / 3.0, 1.0 / 2.0, -1.0 / 6.0],
        [1.0, -1.0 / 2.0, -1.0, 1.0 / 2.0],
        [0.0, 1.0, 1.0 / 2.0, -1.0 / 2.0],
        [0.0, -1.0 / 6.0, 0.0, 1.0 / 6.0],
    ]
)


def filon_moments(theta: np.ndarray) -> np.ndarray:
    """mu_q(theta) = int_0^1 sigma^q e^(i theta sigma) d sigma for q = 0..3.

    Recursion mu_q = (e^(i theta) - q mu_(q-1)) / (i theta) cancels badly for
    small theta; a truncated series takes over below the cutoff.
    """
    theta = np.asarray(theta, dtype=float)
    mu = np.empty((4,) + theta.shape, dtype=complex)
    small = np.abs(theta) < _SERIES_CUT
    th_s = theta[small]
    acc = np.zeros((4,) + th_s.shape, dtype=complex)
    term = np.ones_like(th_s, dtype=complex)
    for n in range(_SERIES_TERMS):
        for q in range(4):
            acc[q] += term / (q + n + 1.0)
        term = term * (1j * th_s) / (n + 1.0)
    th_b = np.where(small, 1.0, theta)
    e = np.exp(1j * th_b)
    m0 = (e - 1.0) / (1j * th_b)
    m1 = (e - m0) / (1j * th_b)
    m2 = (e - 2.0 * m1) / (1j * th_b)
    m3 = (e - 3.0 * m2) / (1j * th_b)
    for q, mq in enumerate((m0, m1, m2, m3)):
        mu[q] = mq
        mu[q][small] = acc[q]
    return mu


def filon_weights(theta: np.ndarray) -> np.ndarray:
    """Interval weights w_r(theta), r = 0..3, for samples at sigma = -1,0,1,2."""
    mu = filon_moments(theta)
    return np.tensordot(_LAGRANGE, mu, axes=([1], [0]))


def oscillatory_cumulative(values: np.ndarray, a: np.ndarray, dt: float, i_zero: int) -> np.ndarray:
    """Phi_m = int_0^{t_m} e^(i a s) v(s) ds for samples v on an ascending time lattice.

    `values` has shape (..., n_t) with matching broadcastable `a`;
    t_m = (m - i_zero) * dt.  Cubic ghost extrapolation closes the stencil at
    both ends.
    """
    nt = values.shape[-1]
    ghost_lo = 4 * values[..., 0] - 6 * values[..., 1] + 4 * values[..., 2] - values[..., 3]
    ghost_hi = 4 * values[..., -1] - 6 * values[..., -2] + 4 * values[..., -3] - values[..., -4]
    ext = np.concatenate(
        [ghost_lo[..., None], values, ghost_hi[..., None]], axis=-1
    )  # index i+1 holds sample i
    theta = np.asarray(a, dtype=float) * dt
    w = filon_weights(theta)  # (4, ...) broadcastable with a
    t_nodes = (np.arange(nt, dtype=float) - i_zero) * dt
    phase = np.exp(1j * np.multiply.outer(np.asarray(a, dtype=float), t_nodes[:-1]))
    # contribution of interval [t_i, t_{i+1}]: dt * e^{i a t_i} * sum_r w_r * v[i-1+r]
    contrib = np.zeros(np.broadcast_shapes(values.shape[:-1], np.shape(a)) + (nt - 1,), dtype=complex)
    for r in range(4):
        vv = ext[..., r : r + nt - 1]
        contrib = contrib + w[r][..., None] * vv
    contrib = contrib * phase * dt
    csum = np.cumsum(contrib, axis=-1)
    csum = np.concatenate([np.zeros(csum.shape[:-1] + (1,), dtype=complex), csum], axis=-1)
    return csum - csum[..., i_zero : i_zero + 1]


def duhamel(u: SpaceTimeField) -> SpaceTimeField:
    """psi(t) * int_0^t W(t-s) u(s) ds, evaluated mode-wise with the Filon rule."""
    if u.domain != "phys":
        raise DomainError("duhamel expects a physical-domain forcing")
    g = u.grid
    _check_window(g)
    nt, half = g.n_time, g.n_time // 2
    uhat = fft_space_slices(u.data, g)
    uhat = np.roll(uhat, half, axis=-1)  # ascending times, t=0 at index `half`
    a = g.xi_square()
    phi = oscillatory_cumulative(uhat, a, g.dt, half)
    t_sorted = (np.arange(nt, dtype=float) - half) * g.dt
    phi *= np.exp(-1j * np.multiply.outer(a, t_sorted))
    phi *= psi_profile(t_sorted)
    phi = np.roll(phi, -half, axis=-1)
    return SpaceTimeField(g, fft_space_slices(phi, g, inverse=True), "phys")


# --- Picard fixed point ---


@dataclass
class SolverConfig:
    eps: float = 0.01
    max_iters: int = 50
    tol: float = 1e-10
    dealias: bool = True
    track_fnorm: bool = True
    zk: ZkConfig = field(default_factory=lambda: DEFAULT_ZK)

    def __post_init__(self):
        if self.tol <= 0 or self.eps <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class IterationTrace:
    data_norm: float = 0.0
    increments: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    f_increments: list[float] = field(default_factory=list)
    residual: float = float("nan")
    converged: bool = False

    @property
    def n_iters(self) -> int:
        return len(self.increments)

    def rows(self) -> list[dict]:
        out = []
        for i, inc in enumerate(self.increments):
            out.append(
                {
                    "iter": i + 1,
                    "increment_l2": inc,
                    "ratio": self.ratios[i] if i < len(self.ratios) else float("nan"),
                    "increment_fnorm": self.f_increments[i] if i < len(self.f_increments) else float("nan"),
                }
            )
        return out


def picard_solve(phi: SpatialField, cfg: SolverConfig | None = None) -> tuple[SpaceTimeField, IterationTrace]:
    """Iterate u <- psi W phi - i * Duhamel(N(u)) until the L^2 increment settles.

    Divergence (increment ratio >= 1 five times in a row) raises
    DivergenceError with the trace; |u| reaching 1 raises RangeViolationError.
    """
    cfg = cfg or SolverConfig()
    g = phi.grid
    trace = IterationTrace(data_norm=besov_norm(phi, g.d / 2.0).total)
    u_lin = cutoff_free_solution(phi)
    u = u_lin
    prev_inc = None
    bad_streak = 0
    for _ in range(cfg.max_iters):
        if float(np.max(np.abs(u.data))) >= 1.0:
            raise RangeViolationError("iterate left the unit disc")
        nl = nonlinearity_array(u.data, g, dealias=cfg.dealias)
        u_next = SpaceTimeField(g, u_lin.data - 1j * duhamel(SpaceTimeField(g, nl, "phys")).data, "phys")
        diff = SpaceTimeField(g, u_next.data - u.data, "phys")
        inc = diff.l2()
        trace.increments.append(inc)
        if cfg.track_fnorm:
            trace.f_increments.append(fsigma_norm(diff, g.d / 2.0, cfg.zk))
        if prev_inc is not None and prev_inc > 0:
            ratio = inc / prev_inc
            trace.ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 5:
                raise DivergenceError(
                    f"increment ratio >= 1 for {bad_streak} consecutive iterations", trace
                )
        prev_inc = inc
        u = u_next
        if inc <= cfg.tol * max(1.0, u.l2()):
            trace.converged = True
            break
    # residual of the integral equation for the returned iterate
    nl = nonlinearity_array(u.data, g, dealias=cfg.dealias)
    rhs = u_lin.data - 1j * duhamel(SpaceTimeField(g, nl, "phys")).data
    trace.residual = SpaceTimeField(g, u.data - rhs, "phys").l2()
    return u, trace


# --- split-step oracle ---


def _dealias_spatial(vhat: np.ndarray, g: GridSpec) -> np.ndarray:
    ax = np.abs(g.xi_axis())
    keep = ax <= (2.0 / 3.0) * g.xi_nyquist
    for axis in range(g.d):
        shape = [1] * g.d
        shape[axis] = g.n_space
        vhat = vhat * keep.reshape(shape)
    return vhat


def splitstep_solve(phi: SpatialField, t_end: float, steps: int, dealias: bool = True) -> SpatialField:
    """Strang splitting oracle for the gauged equation, independent of the Picard path.

    Kinetic half-steps are exact Fourier multipliers; the nonlinear step
    freezes the coefficient c = 2 (1+|u|^2)^-1 sum_j (d_j u)^2 and applies the
    exact pointwise flow of du/dt = -i c conj(u), which is
    u cosh(|c| dt) - i c conj(u) sinh(|c| dt)/|c|.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    g = phi.grid
    dt = t_end / steps
    vhat = phi.data.copy() if phi.domain == "freq" else fft_space(phi).data
    half_phase = np.exp(-1j * (dt / 2.0) * g.xi_square())
    xi = g.xi_axis()
    for _ in range(steps):
        vhat = vhat * half_phase
        if dealias:
            vhat = _dealias_spatial(vhat, g)
        u = _ifft_single(vhat, g)
        if float(np.max(np.abs(u))) >= 1.0:
            raise RangeViolationError("split-step iterate left the unit disc")
        grad_sq = np.zeros_like(u)
        for ax in range(g.d):
            shape = [1] * g.d
            shape[ax] = g.n_space
            du = _ifft_single(1j * xi.reshape(shape) * vhat, g)
            grad_sq = grad_sq + du * du
        c = 2.0 * grad_sq / (1.0 + np.abs(u) ** 2)
        ac = np.abs(c)
        x = ac * abs(dt)
        sinhc = np.where(x < 1e-6, 1.0 + x * x / 6.0, np.sinh(np.maximum(x, 1e-300)) / np.maximum(x, 1e-300))
        u_new = np.cosh(x) * u - 1j * dt * sinhc * c * np.conj(u)
        vhat = fft_space(SpatialField(g, u_new, "phys")).data
        vhat = vhat * half_phase
    return ifft_space(SpatialField(g, vhat, "freq"))


def _ifft_single(vhat: np.ndarray, g: GridSpec) -> np.ndarray:
    return fft_space_slices(vhat[..., None], g, inverse=True)[..., 0]


# --- solution-map probes ---


@dataclass
class LipschitzResult:
    ratio: float
    degenerate: bool
    denom: float
    sup_diff: float
    times: list[float]


def lipschitz_probe(
    phi: SpatialField,
    phi2: SpatialField,
    cfg: SolverConfig | None = None,
    t_samples: tuple[float, ...] = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0),
) -> LipschitzResult:
    """sup_t ||u(t) - u'(t)||_{B^{d/2}} / ||phi - phi'||_{B^{d/2}} over sampled times in [-1,1]."""
    cfg = cfg or SolverConfig(track_fnorm=False)
    g = phi.grid
    diff0 = SpatialField(g, phi.data - phi2.data, "phys" if phi.domain == "phys" else "freq")
    if phi.domain != phi2.domain:
        raise DomainError("data must share a domain")
    denom = besov_norm(diff0, g.d / 2.0).total
    if denom == 0.0:
        return LipschitzResult(0.0, True, 0.0, 0.0, list(t_samples))
    u1, _ = picard_solve(phi, cfg)
    u2, _ = picard_solve(phi2, cfg)
    tt = g.t_axis()
    sup = 0.0
    for ts in t_samples:
        idx = int(np.argmin(np.abs(tt - ts)))
        slice_diff = SpatialField(g, u1.data[..., idx] - u2.data[..., idx], "phys")
        sup = max(sup, besov_norm(slice_diff, g.d / 2.0).total)
    return LipschitzResult(sup / denom, False, denom, sup, list(t_samples))
