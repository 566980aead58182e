"""Stereographic gauge between sphere-valued maps near the north pole and
small complex fields, the map equation residual, the null-form identity, and
the gauged nonlinearity.
"""

from __future__ import annotations

import numpy as np

from .grid import (
    DomainError,
    GridSpec,
    SpaceTimeField,
    SpatialField,
    SphereField,
    fft_space_slices,
    fft_spacetime,
    ifft_spacetime,
)

__all__ = [
    "GaugeDomainError",
    "RangeViolationError",
    "AliasingError",
    "stereo_project",
    "stereo_lift",
    "schrodinger_map_residual",
    "null_form_residual",
    "nonlinearity",
    "nonlinearity_array",
]


class GaugeDomainError(ValueError):
    """Sphere field too close to the south pole for the projection."""


class RangeViolationError(ValueError):
    """Complex field left the unit disc where the gauged equation lives."""


class AliasingError(ValueError):
    """Pointwise product would wrap around the frequency lattice."""


def stereo_project(f: SphereField, margin: float = 0.5) -> SpatialField:
    """g = (f1 + i f2) / (1 + f3); requires f3 > -1 + margin everywhere."""
    f3min = float(np.min(f.data[..., 2]))
    if f3min <= -1.0 + margin:
        raise GaugeDomainError(
            f"min third component {f3min:.4g} <= {-1.0 + margin:.4g}; map leaves the working chart"
        )
    den = 1.0 + f.data[..., 2]
    g = (f.data[..., 0] + 1j * f.data[..., 1]) / den
    return SpatialField(f.grid, g, "phys")


def stereo_lift(g: SpatialField) -> SphereField:
    """Inverse chart: always lands exactly on the unit sphere."""
    if g.domain != "phys":
        raise DomainError("stereo_lift expects a physical-domain field")
    z = g.data
    den = 1.0 + (z * np.conj(z)).real
    f1 = (z + np.conj(z)).real / den
    f2 = (-1j * (z - np.conj(z))).real / den
    f3 = (1.0 - (z * np.conj(z)).real) / den
    return SphereField(g.grid, np.stack([f1, f2, f3], axis=-1))


def _spectral_laplacian_frames(frames: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Laplacian of (n_frames, *space, 3) real frames via the spatial transform."""
    nf = frames.shape[0]
    r2 = grid.xi_square()
    out = np.empty_like(frames)
    # transform each component stack at once: move components/time into one batch axis
    batch = frames.reshape(nf, *grid.space_shape, 3)
    spec = np.fft.fftn(batch, axes=tuple(range(1, 1 + grid.d)))
    spec *= -r2[None, ..., None]
    out = np.fft.ifftn(spec, axes=tuple(range(1, 1 + grid.d))).real
    return out


def schrodinger_map_residual(frames: np.ndarray, grid: GridSpec, dt: float) -> float:
    """Discrete residual of d_t s = s x Lap(s) over interior times.

    `frames` has shape (n_frames, *space, 3) with uniform step dt.  Time
    derivative: 4th-order central differences (so the measurement error stays
    subordinate to the spectral space accuracy); Laplacian: spectral.
    Returns the L^2(dx dt) norm of the defect over the interior frames.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != grid.d + 2 or frames.shape[-1] != 3:
        raise ValueError("frames must have shape (n_frames, *space, 3)")
    if frames.shape[0] < 5:
        raise ValueError("need at least 5 frames for the 4th-order stencil")
    defect = np.abs(np.linalg.norm(frames, axis=-1) - 1.0).max()
    if defect > 1e-6:
        raise ValueError(f"frames leave the unit sphere by {defect:.3g}")
    ds_dt = (-frames[4:] + 8 * frames[3:-1] - 8 * frames[1:-3] + frames[:-4]) / (12.0 * dt)
    inner = frames[2:-2]
    lap = _spectral_laplacian_frames(inner, grid)
    rhs = np.cross(inner, lap)
    resid = ds_dt - rhs
    return float(np.sqrt(np.sum(resid**2) * grid.dx**grid.d * dt))


def _freq_extent(fhat: np.ndarray, grid: GridSpec, tol: float = 0.0) -> tuple[float, float]:
    """(max |xi|_inf, max |tau|) over modes carrying more than tol of the field."""
    mags = np.abs(fhat)
    cut = tol * mags.max() if mags.size else 0.0
    idx = np.argwhere(mags > cut)
    if idx.size == 0:
        return 0.0, 0.0
    n, nt = grid.n_space, grid.n_time
    sx = np.abs((idx[:, : grid.d] + n // 2) % n - n // 2).max() * grid.dxi
    st = np.abs((idx[:, -1] + nt // 2) % nt - nt // 2).max() * grid.dtau
    return float(sx), float(st)


def null_form_residual(v: SpaceTimeField, w: SpaceTimeField) -> float:
    """Relative defect of 2 sum_l d_l v d_l w = H(vw) - w Hv - v Hw, H = i d_t + Lap.

    The identity is algebraic, so with band-limited inputs whose product does
    not wrap the lattice the residual is pure rounding.  Inputs must satisfy
    bandwidth(v) + bandwidth(w) <= Nyquist on every axis.
    """
    if v.grid != w.grid:
        raise ValueError("operands on different grids")
    g = v.grid
    vh = v if v.domain == "freq" else fft_spacetime(v)
    wh = w if w.domain == "freq" else fft_spacetime(w)
    bx_v, bt_v = _freq_extent(vh.data, g)
    bx_w, bt_w = _freq_extent(wh.data, g)
    if bx_v + bx_w > g.xi_nyquist or bt_v + bt_w > g.tau_max:
        raise AliasingError(
            "product bandwidth exceeds the lattice: "
            f"space {bx_v:.3g}+{bx_w:.3g} vs {g.xi_nyquist:.3g}, "
            f"time {bt_v:.3g}+{bt_w:.3g} vs {g.tau_max:.3g}"
        )
    m = g.modulation()
    xi = g.xi_axis()

    def h_op(fh: np.ndarray) -> np.ndarray:
        return -m * fh

    def grad(fh: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * (g.d + 1)
        shape[axis] = g.n_space
        return 1j * xi.reshape(shape) * fh

    vp = ifft_spacetime(SpaceTimeField(g, vh.data, "freq")).data
    wp = ifft_spacetime(SpaceTimeField(g, wh.data, "freq")).data
    lhs = np.zeros_like(vp)
    for ax in range(g.d):
        dv = ifft_spacetime(SpaceTimeField(g, grad(vh.data, ax), "freq")).data
        dw = ifft_spacetime(SpaceTimeField(g, grad(wh.data, ax), "freq")).data
        lhs += 2.0 * dv * dw
    prod_hat = fft_spacetime(SpaceTimeField(g, vp * wp, "phys")).data
    h_prod = ifft_spacetime(SpaceTimeField(g, h_op(prod_hat), "freq")).data
    hv = ifft_spacetime(SpaceTimeField(g, h_op(vh.data), "freq")).data
    hw = ifft_spacetime(SpaceTimeField(g, h_op(wh.data), "freq")).data
    rhs = h_prod - wp * hv - vp * hw
    scale = max(
        float(np.sqrt(np.sum(np.abs(lhs) ** 2))),
        float(np.sqrt(np.sum(np.abs(rhs) ** 2))),
    )
    if scale == 0.0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2)) / scale)


def _dealias_mask(grid: GridSpec) -> np.ndarray:
    ax = np.abs(grid.xi_axis())
    keep = ax <= (2.0 / 3.0) * grid.xi_nyquist
    mask = np.ones(grid.space_shape, dtype=bool)
    for axis in range(grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.n_space
        mask &= keep.reshape(shape)
    return mask


def nonlinearity_array(u: np.ndarray, grid: GridSpec, dealias: bool = True) -> np.ndarray:
    """2 conj(u) (1+|u|^2)^-1 sum_j (d_j u)^2 for (space..., time...) sample arrays.

    Gradients are spectral in space; products are evaluated pointwise with
    2/3-rule truncation of the inputs and the result (spatial axes only; the
    time axis is a sample index here, not a spectral one).
    """
    amax = float(np.max(np.abs(u))) if u.size else 0.0
    if amax >= 1.0:
        raise RangeViolationError(f"|u| reached {amax:.4g}; the gauged equation needs |u| < 1")
    uhat = fft_space_slices(u, grid)
    if dealias:
        uhat = uhat * _dealias_mask(grid)[(...,) + (None,) * (u.ndim - grid.d)]
    xi = grid.xi_axis()
    grad_sq = np.zeros_like(u)
    for ax in range(grid.d):
        shape = [1] * u.ndim
        shape[ax] = grid.n_space
        du = fft_space_slices(1j * xi.reshape(shape) * uhat, grid, inverse=True)
        grad_sq = grad_sq + du * du
    if dealias:
        u = fft_space_slices(uhat, grid, inverse=True)
    out = 2.0 * np.conj(u) / (1.0 + np.abs(u) ** 2) * grad_sq
    if dealias:
        ohat = fft_space_slices(out, grid) * _dealias_mask(grid)[(...,) + (None,) * (u.ndim - grid.d)]
        out = fft_space_slices(ohat, grid, inverse=True)
    return out


def nonlinearity(u: SpaceTimeField, dealias: bool = True) -> SpaceTimeField:
    """Gauged nonlinearity as a field operation (physical domain in and out)."""
    if u.domain != "phys":
        raise DomainError("nonlinearity expects a physical-domain field")
    return SpaceTimeField(u.grid, nonlinearity_array(u.data, u.grid, dealias), "phys")
