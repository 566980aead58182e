"""Frequency-localized random atoms with certified norm bounds.

Atoms are built directly on the Fourier lattice.  Every atom returns the
exact value of its defining norm (evaluated, not estimated), normalized to
the requested target, so probe right-hand sides are certified bounds by
construction.  Construction regions can be intersected with a "safe box"
(half the lattice extent) so that convolutions of atoms never wrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import partition as pt
from .grid import GridSpec, SpaceTimeField, SpatialField
from .norms import ZkConfig, DEFAULT_ZK, beta_weight, besov_norm, xk_norm, yk_norm, zk_norm_upper, _xi_dot
from .partition import Direction

__all__ = ["AtomSpec", "UnrepresentableAtomError", "make_atom", "safe_box_mask"]


class UnrepresentableAtomError(ValueError):
    """The requested localization region contains no lattice points."""


@dataclass(frozen=True)
class AtomSpec:
    """Recipe for one random atom.

    kind: "x" (modulation plateau piece of D_{k,j}), "y" (sector atom via the
    one-dimensional resolvent representation along an axis), "besov_shell"
    (spatial shell plateau), "packet" (cap-localized bump, optionally
    modulation-localized).
    """

    kind: str
    k: int
    j: int | None = None
    kp: int | None = None
    e: tuple[int, ...] | None = None
    seed: int = 0
    target: float = 1.0
    safe: bool = True
    cap: float | None = None  # half-width (inf norm) of a spatial-frequency cap
    n_bumps: int = 3
    j_le: int | None = None  # packet: restrict |modulation| below 1.25 * 2^j_le


def safe_box_mask(g: GridSpec, frac: float = 0.5, tau_frac: float | None = None) -> np.ndarray:
    """Mask keeping |xi|_inf and |tau| below a fraction of the lattice extent."""
    tau_frac = frac if tau_frac is None else tau_frac
    ax = np.abs(g.xi_axis())
    keep = ax <= frac * g.xi_nyquist * (1.0 - 1e-9)
    mask = np.ones(g.space_shape, dtype=bool)
    for axis in range(g.d):
        shape = [1] * g.d
        shape[axis] = g.n_space
        mask &= keep.reshape(shape)
    tmask = np.abs(g.tau_axis()) <= tau_frac * g.tau_max * (1.0 - 1e-9)
    return mask[..., None] & tmask.reshape((1,) * g.d + (g.n_time,))


def _shell_plateau(g: GridSpec, k: int) -> np.ndarray:
    r = g.xi_radii()
    return (r >= 0.8 * 2.0**k) & (r <= 1.25 * 2.0**k)


def _mod_plateau(g: GridSpec, j: int) -> np.ndarray:
    m = np.abs(g.modulation())
    if j == 0:
        return m <= 1.25
    return (m >= 1.6 * 2.0 ** (j - 1)) & (m <= 1.25 * 2.0**j)


def _random_on_mask(g: GridSpec, mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    data = np.zeros(mask.shape, dtype=complex)
    npts = int(mask.sum())
    vals = rng.standard_normal(npts) + 1j * rng.standard_normal(npts)
    data[mask] = vals
    return data

def _x_atom(g: GridSpec, spec: AtomSpec, rng: np.random.Generator, cfg: ZkConfig):
    if spec.j is None:
        raise ValueError("x atoms need a modulation index j")
    mask = _shell_plateau(g, spec.k)[..., None] & _mod_plateau(g, spec.j)
    if spec.safe:
        mask &= safe_box_mask(g)
    if spec.cap is not None:
        mask &= _cap_mask(g, spec.k, spec.cap, rng)
    if not mask.any():
        raise UnrepresentableAtomError(f"D_({spec.k},{spec.j}) plateau empty on this grid")
    f = SpaceTimeField(g, _random_on_mask(g, mask, rng), "freq")
    bound = xk_norm(f, spec.k, tol=cfg.support_tol)
    return f, bound


def _cap_mask(g: GridSpec, k: int, half_width: float, rng: np.random.Generator) -> np.ndarray:
    # random cap center on the shell, box of the requested half width around it
    r = g.xi_radii()
    cand = np.argwhere((r >= 0.9 * 2.0**k) & (r <= 1.1 * 2.0**k))
    if len(cand) == 0:
        cand = np.argwhere(_shell_plateau(g, k))
    if len(cand) == 0:
        raise UnrepresentableAtomError(f"shell {k} empty on this grid")
    center_idx = cand[rng.integers(len(cand))]
    ax = g.xi_axis()
    center = np.array([ax[i] for i in center_idx])
    mask = np.ones(g.space_shape, dtype=bool)
    for axis in range(g.d):
        shape = [1] * g.d
        shape[axis] = g.n_space
        mask &= (np.abs(ax - center[axis]) <= half_width).reshape(shape)
    return mask[..., None]


def _besov_shell_atom(g: GridSpec, spec: AtomSpec, rng: np.random.Generator, sigma: float):
    mask = _shell_plateau(g, spec.k)
    if spec.safe:
        ax = np.abs(g.xi_axis())
        keep = ax <= 0.5 * g.xi_nyquist * (1.0 - 1e-9)
        for axis in range(g.d):
            shape = [1] * g.d
            shape[axis] = g.n_space
            mask &= keep.reshape(shape)
    if not mask.any():
        raise UnrepresentableAtomError(f"shell {spec.k} plateau empty")
    data = np.zeros(g.space_shape, dtype=complex)
    data[mask] = rng.standard_normal(int(mask.sum())) + 1j * rng.standard_normal(int(mask.sum()))
    f = SpatialField(g, data, "freq")
    return f, besov_norm(f, sigma).total


def _y_atom(g: GridSpec, spec: AtomSpec, rng: np.random.Generator, cfg: ZkConfig):
    """Sector atom along a signed axis via the resolvent representation.

    On each selected transverse point (xi', tau) in the admissible region the
    atom's profile in the axis frequency xi_1 is
    eta^+_{[k'-1,k'+1]}(M) * 2^(-k'/2) * eta_{<=k'-off}(xi_1 - M) / (xi_1 - M + i 2^(-k')),
    M = sqrt(-tau - |xi'|^2), modulated by a random y_1-shift phase; this is
    the shape produced by the representation formula for sector functions.
    """
    if spec.kp is None or spec.e is None:
        raise ValueError("y atoms need kp and an axis direction e")
    k, kp, off = spec.k, spec.kp, cfg.desk_offset
    if k < cfg.k_y:
        raise ValueError(f"y atoms need k >= k_y = {cfg.k_y}")
    e = Direction(spec.e)
    axis = int(np.argmax(np.abs(np.asarray(spec.e))))
    sign = int(np.sign(spec.e[axis]))
    if sum(c != 0 for c in spec.e) != 1:
        raise ValueError("y atoms are built along signed coordinate axes")
    # move the e-axis to the front
    perm = (axis,) + tuple(i for i in range(g.d) if i != axis)
    ax_vals = g.xi_axis() * sign  # xi_1 = xi . e along the signed axis
    # transverse radii on the remaining axes
    tr_shape = (g.n_space,) * (g.d - 1)
    axsq = g.xi_axis() ** 2
    r2p = np.zeros(tr_shape)
    for i in range(g.d - 1):
        shape = [1] * (g.d - 1)
        shape[i] = g.n_space
        r2p = r2p + axsq.reshape(shape)
    tau = g.tau_axis()
    msq = -tau.reshape((1,) * (g.d - 1) + (-1,)) - r2p[..., None]  # M^2 on (xi', tau)
    region = (msq >= 2.0 ** (2 * kp - off)) & (msq <= 2.0 ** (2 * kp + off)) & (
        r2p[..., None] <= 2.0 ** (2 * k)
    )
    # bumps centered in the eta_k' bin plateau, with dominated transverse
    # components, so the sector pieces of the decomposition recover the atom
    region &= (msq >= (0.8 * 2.0**kp) ** 2) & (msq <= (1.25 * 2.0**kp) ** 2)
    axabs = np.abs(g.xi_axis())
    tr_dom = np.ones(tr_shape, dtype=bool)
    for i in range(g.d - 1):
        shape = [1] * (g.d - 1)
        shape[i] = g.n_space
        tr_dom &= (axabs <= 0.99 * 0.8 * 2.0**kp).reshape(shape)
    region &= tr_dom[..., None]
    if spec.safe:
        # keep the final support (xi_1 near M, xi', tau) inside the no-wrap box
        safe_xi = 0.5 * g.xi_nyquist * (1.0 - 1e-9)
        safe_tau = 0.5 * g.tau_max * (1.0 - 1e-9)
        tr_ok = np.ones(tr_shape, dtype=bool)
        for i in range(g.d - 1):
            shape = [1] * (g.d - 1)
            shape[i] = g.n_space
            tr_ok &= (axabs <= safe_xi).reshape(shape)
        region &= tr_ok[..., None]
        region &= np.abs(tau).reshape((1,) * (g.d - 1) + (-1,)) <= safe_tau
        region &= msq <= (0.9 * safe_xi) ** 2
    # keep the singular center M at least a quarter cell away from the xi_1
    # lattice: sub-cell spikes of the resolvent profile are not representable
    # and would distort every modulation-resolved norm of the atom
    with np.errstate(invalid="ignore"):
        mdist = np.abs(np.sqrt(np.maximum(msq, 0.0)) / g.freq_unit + 0.5) % 1.0 - 0.5
    region &= np.abs(mdist) >= 0.25
    pts = np.argwhere(region)
    if len(pts) == 0:
        raise UnrepresentableAtomError(f"sector region empty for k={k}, k'={kp}")
    data_p = np.zeros((g.n_space,) + tr_shape + (g.n_time,), dtype=complex)
    nb = min(spec.n_bumps, len(pts))
    choice = pts[rng.choice(len(pts), size=nb, replace=False)]
    x1 = g.x_axis()
    for row in choice:
        m_val = np.sqrt(msq[tuple(row)])
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        y_shift = rng.choice(x1)
        prof = (
            pt.eta_range_signed(kp - 1, kp + 1, m_val * np.ones_like(ax_vals), 1)
            * 2.0 ** (-kp / 2.0)
            * pt.eta_le(max(kp - off, 0), ax_vals - m_val)
            / (ax_vals - m_val + 1j * 2.0 ** (-kp))
            * np.exp(-1j * y_shift * ax_vals)
        )
        data_p[(slice(None),) + tuple(row)] += amp * prof
    # restore axis order and enforce the sector support
    inv = np.argsort(perm)
    data = np.transpose(data_p, tuple(inv) + (g.d,))
    dot = _xi_dot(g, e)
    # plateau window of the k' bin, so the sector decomposition recovers the
    # atom as a single piece (eta^+_{k'} = 1 on it, neighbors vanish); the
    # modulation cap likewise stays on the plateau of the top candidate cut,
    # well inside the sector support ceiling 2^(2k+off+1)
    sector = (dot >= 0.8 * 2.0**kp) & (dot <= 1.25 * 2.0**kp * (1.0 - 1e-12))
    mask = (g.shell_mask(k) & sector)[..., None] & (
        np.abs(g.modulation()) <= 1.25 * 2.0 ** (2 * k + off - 1)
    )
    if spec.safe:
        mask &= safe_box_mask(g)
    data *= mask
    if not np.any(data):
        raise UnrepresentableAtomError(
            f"y atom support vanished after projection (k={k}, k'={kp}, e={spec.e})"
        )
    f = SpaceTimeField(g, data, "freq")
    bound = yk_norm(f, k, e, kp, cfg)
    return f, bound


def _packet_atom(g: GridSpec, spec: AtomSpec, rng: np.random.Generator, cfg: ZkConfig):
    """Cap-localized random piece of shell k, optionally modulation-limited."""
    cap = spec.cap if spec.cap is not None else 2.0 ** (spec.k - 1)
    mask3 = _cap_mask(g, spec.k, cap, rng) & g.shell_mask(spec.k)[..., None]
    if spec.j_le is not None:
        mask3 = mask3 & (np.abs(g.modulation()) <= 1.25 * 2.0**spec.j_le)
    if spec.safe:
        mask3 = mask3 & safe_box_mask(g)
    if not mask3.any():
        raise UnrepresentableAtomError(f"packet region empty (k={spec.k})")
    f = SpaceTimeField(g, _random_on_mask(g, mask3, rng), "freq")
    bound, _ = zk_norm_upper(f, spec.k, cfg)
    return f, bound


def make_atom(spec: AtomSpec, grid: GridSpec, cfg: ZkConfig = DEFAULT_ZK, sigma: float | None = None):
    """Build the atom and return (field, certified_norm_bound), scaled to spec.target.

    The bound is the exact evaluation of the atom's defining norm (X, Y, Z
    upper, or Besov), so after scaling the bound equals spec.target.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    builders = {
        "x": lambda: _x_atom(grid, spec, rng, cfg),
        "y": lambda: _y_atom(grid, spec, rng, cfg),
        "packet": lambda: _packet_atom(grid, spec, rng, cfg),
        "besov_shell": lambda: _besov_shell_atom(grid, spec, rng, sigma if sigma is not None else grid.d / 2.0),
    }
    if spec.kind not in builders:
        raise ValueError(f"unknown atom kind {spec.kind!r}")
    f, bound = builders[spec.kind]()
    if spec.target == 0.0:
        f.data[...] = 0.0
        return f, 0.0
    if bound == 0.0:
        raise UnrepresentableAtomError("atom has zero norm bound")
    f.data *= spec.target / bound
    return f, spec.target
