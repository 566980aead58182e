"""Inequality probe harness: registry, random trials, sweeps, verdicts.

Every registered estimate pairs an evaluable left side (sum-space values via
the certified upper-bound evaluator) with a right side assembled from atom
norm bounds, mirroring one display of the theory.  A bounded ratio across
the dyadic sweep is evidence; growth (log-regression slope above the
threshold) is a FAIL.  "Bounded C" is unfalsifiable at finite scale, so the
absence of growth is the testable surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import partition as pt
from .atoms import AtomSpec, UnrepresentableAtomError, make_atom, safe_box_mask
from .gauge import AliasingError, nonlinearity_array, null_form_residual
from .grid import (
    GridMismatchError,
    GridSpec,
    SpaceTimeField,
    SpatialField,
    conjugate_reflect,
    fft_spacetime,
    ifft_space,
    ifft_spacetime,
)
from .evolution import cutoff_free_solution, psi_hat, psi_hat_deriv
from .norms import (
    ZkConfig,
    axis_directions,
    besov_norm,
    beta_weight,
    fsigma_norm,
    mixed_norm,
    nsigma_norm,
    t_k_range,
    xk_norm,
    zk_norm_upper,
    _xi_dot,
)
from .partition import Direction, LatticeCutoffFamily

__all__ = [
    "convolve",
    "resolvent_multiplier",
    "EstimateSpec",
    "TrialResult",
    "ProbeRow",
    "ProbeRunResult",
    "registry",
    "estimate_ids",
    "run_probe",
    "SLOPE_THRESHOLD",
]

SLOPE_THRESHOLD = 0.1

# grids used by the probes; chosen so that the swept regions are genuinely
# representable (paraboloid reachable in tau, convolutions wrap-free)
GRID_CONV = GridSpec(d=3, n_space=16, n_time=128, freq_unit=2.0, t_window=2.0)
GRID_FINE = GridSpec(d=3, n_space=16, n_time=128, freq_unit=1.0, t_window=2.0)
GRID_PSI = GridSpec(d=3, n_space=16, n_time=256, freq_unit=1.0, t_window=8.0)
GRID_NULL = GridSpec(d=3, n_space=32, n_time=64, freq_unit=1.0, t_window=8.0)

ZK_PROBE = ZkConfig(k_y=4)
ZK_SECTOR = ZkConfig(k_y=2)


# --- elementary Fourier-side operations ---


def _axis_extent(data: np.ndarray, g: GridSpec, rel_tol: float = 1e-12) -> list[int]:
    """Largest |signed index| carrying more than rel_tol of the peak, per axis."""
    out = []
    nd = data.ndim
    for ax in range(nd):
        n = data.shape[ax]
        other = tuple(i for i in range(nd) if i != ax)
        prof = np.abs(data).max(axis=other)
        cut = rel_tol * prof.max() if prof.size else 0.0
        nz = np.nonzero(prof > cut)[0]
        if len(nz) == 0:
            out.append(0)
            continue
        signed = np.abs((nz + n // 2) % n - n // 2)
        out.append(int(signed.max()))
    return out


def convolve(f: SpaceTimeField, g: SpaceTimeField) -> SpaceTimeField:
    """Continuum-normalized convolution of Fourier-domain fields.

    Computed as a pointwise product on the dual side; raises AliasingError
    unless the index supports satisfy extent(f) + extent(g) < lattice half
    size on every axis, which makes the periodic result exact.
    """
    if f.grid != g.grid:
        raise GridMismatchError("convolution operands on different grids")
    if f.domain != "freq" or g.domain != "freq":
        raise ValueError("convolve expects Fourier-domain fields")
    gr = f.grid
    ef, eg = _axis_extent(f.data, gr), _axis_extent(g.data, gr)
    halves = [gr.n_space // 2] * gr.d + [gr.n_time // 2]
    for af, ag, h in zip(ef, eg, halves):
        if af + ag > h - 1:
            raise AliasingError(f"convolution would wrap: extents {ef} + {eg} vs half sizes {halves}")
    a = sfft.fftn(f.data, workers=1)
    b = sfft.fftn(g.data, workers=1)
    out = sfft.ifftn(a * b, workers=1) * gr.cell_xi
    return SpaceTimeField(gr, out, "freq")


def resolvent_multiplier(f: SpaceTimeField, mode: str = "multiply") -> SpaceTimeField:
    """Multiply or divide by (tau + |xi|^2 + i); division is total (|.| >= 1)."""
    if f.domain != "freq":
        raise ValueError("resolvent_multiplier expects a Fourier-domain field")
    m = f.grid.modulation() + 1j
    if mode == "multiply":
        return SpaceTimeField(f.grid, f.data * m, "freq")
    if mode == "divide":
        return SpaceTimeField(f.grid, f.data / m, "freq")
    raise ValueError(f"mode must be 'multiply' or 'divide', got {mode!r}")


def _l2_norm(data: np.ndarray, g: GridSpec) -> float:
    return float(np.sqrt(np.sum(np.abs(data) ** 2) * g.cell_xi))


def _region_mask(g: GridSpec, k: int, j: int) -> np.ndarray:
    """Sharp indicator of the dyadic region (shell k) x (modulation bin j)."""
    m = np.abs(g.modulation())
    band = m <= 2.0 if j == 0 else (m >= 2.0 ** (j - 1)) & (m <= 2.0 ** (j + 1))
    return g.shell_mask(k)[..., None] & band


def _l2_region_atom(g: GridSpec, k: int, j: int, rng, safe: bool = True):
    mask = _region_mask(g, k, j)
    if safe:
        mask = mask & safe_box_mask(g)
    n = int(mask.sum())
    if n == 0:
        raise UnrepresentableAtomError(f"region ({k},{j}) empty")
    data = np.zeros(g.shape, dtype=complex)
    data[mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f = SpaceTimeField(g, data, "freq")
    nrm = _l2_norm(data, g)
    f.data /= nrm
    return f


def _maybe_conj(f: SpaceTimeField, rng) -> tuple[SpaceTimeField, str]:
    if rng.random() < 0.5:
        return conjugate_reflect(f), "conj"
    return f, "id"


def _seeded(rng) -> int:
    return int(rng.integers(0, 2**62))


def _shell_symbol_st(g: GridSpec, k: int) -> np.ndarray:
    return pt.shell_symbol_radial(k, g.xi_radii())[..., None]


_DIR_POOL = [
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, -1, 0), (0, 1, 1), (1, 0, 1),
    (1, 1, 1), (1, -1, 1), (2, 1, 0), (1, 2, 2),
]


def _random_direction(rng) -> Direction:
    return Direction(_DIR_POOL[int(rng.integers(len(_DIR_POOL)))])


# --- trial plumbing ---


@dataclass
class TrialResult:
    lhs: float
    rhs: float
    skipped: bool = False
    note: str = ""
    extras: dict = dc_field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else float("nan")


def _skip(note: str) -> TrialResult:
    return TrialResult(0.0, 0.0, skipped=True, note=note)


@dataclass(frozen=True)
class EstimateSpec:
    eid: str
    description: str
    grid: GridSpec
    zk: ZkConfig
    trials: int
    dyadic_axes: tuple[str, ...]
    kind: str = "ratio"  # "ratio" (slope verdict) or "residual" (absolute tolerance)
    tol: float = 1e-10


# --- individual estimate runners ---


def _trial_l2conv(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f1 = _l2_region_atom(g, p["k1"], p["j1"], rng)
        f2 = _l2_region_atom(g, p["k2"], p["j2"], rng)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    f1, b1 = _maybe_conj(f1, rng)
    f2, b2 = _maybe_conj(f2, rng)
    out_mask = _region_mask(g, p["k"], p["j"])
    if not out_mask.any():
        return _skip("output region empty")
    conv = convolve(f1, f2)
    lhs = _l2_norm(conv.data * out_mask, g)
    rhs = 2.0 ** (g.d * min(p["k1"], p["k2"], p["k"]) / 2.0) * 2.0 ** (min(p["j1"], p["j2"], p["j"]) / 2.0)
    # Cauchy-Schwarz oracle: |S1 cap (z - S2)| maximized over the output region
    ind1 = SpaceTimeField(g, (np.abs(f1.data) > 0).astype(complex), "freq")
    ind2 = SpaceTimeField(g, (np.abs(f2.data) > 0).astype(complex), "freq")
    overlap = convolve(ind1, ind2).data.real
    sup_overlap = float(np.max(overlap * out_mask))
    cs = lhs / np.sqrt(sup_overlap) if sup_overlap > 0 else 0.0
    return TrialResult(lhs, rhs, extras={"cs_ratio": cs, "branch": b1 + "/" + b2})


def _trial_highmod(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f1, _ = make_atom(AtomSpec("x", k=p["k1"], j=p["j1"], seed=_seeded(rng)), g, zk)
        f2, _ = make_atom(AtomSpec("x", k=p["k2"], j=p["j2"], seed=_seeded(rng)), g, zk)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    f1, _ = _maybe_conj(f1, rng)
    f2, _ = _maybe_conj(f2, rng)
    conv = convolve(f1, f2)
    lhs = _l2_norm(conv.data, g)
    rhs = (
        (2.0 ** (p["j2"] / 2.0) + 2.0 ** ((p["k1"] + p["k2"]) / 2.0)) ** -1
        * (beta_weight(p["k1"], p["j1"]) * beta_weight(p["k2"], p["j2"])) ** -1
        * 2.0 ** (g.d * p["k1"] / 2.0)
    )
    return TrialResult(lhs, rhs)


def _make_probe_atom(g: GridSpec, zk: ZkConfig, p: dict, rng, safe: bool):
    """Atom of the kind requested by the sweep point; bound normalized to 1."""
    kind = p.get("kind", "x")
    if kind == "x":
        j = p.get("j", int(rng.integers(0, 4)))
        return make_atom(AtomSpec("x", k=p["k"], j=j, seed=_seeded(rng), safe=safe), g, zk)
    if kind == "y":
        kps = [kp for kp in t_k_range(p["k"])]
        kp = p.get("kp", kps[int(rng.integers(len(kps)))])
        e = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (-1, 0, 0))[int(rng.integers(4))]
        return make_atom(AtomSpec("y", k=p["k"], kp=kp, e=e, seed=_seeded(rng), safe=safe, n_bumps=4), g, zk)
    if kind == "packet":
        return make_atom(AtomSpec("packet", k=p["k"], j_le=p.get("j_le"), seed=_seeded(rng), safe=safe), g, zk)
    raise ValueError(f"unknown atom kind {kind!r}")


def _trial_max(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    variant = p["variant"]
    try:
        if variant == "global":
            f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
            e = _random_direction(rng)
            lhs = mixed_norm(ifft_spacetime(f), e, 2, np.inf)
            rhs = 2.0 ** ((g.d - 1) * p["k"] / 2.0) * bound
            return TrialResult(lhs, rhs, extras={"e": str(e.ivec)})
        # boxed variants: cap-localized atom, cube partition at scale k1
        k, k1 = p["k"], p["k1"]
        cap = 1.5 * 2.0**k1
        if variant == "boxed":
            f, bound = make_atom(
                AtomSpec("x", k=k, j=p.get("j", int(rng.integers(0, 3))), seed=_seeded(rng), safe=False, cap=cap),
                g, zk,
            )
        else:  # boxed_mod
            f, bound = make_atom(
                AtomSpec("packet", k=k, j_le=min(2 * k, k + k1), seed=_seeded(rng), safe=False, cap=cap), g, zk
            )
            mmask = pt.eta_le(k + k1, g.modulation())
            f = SpaceTimeField(g, f.data * mmask, "freq")
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    e = _random_direction(rng)
    fam = LatticeCutoffFamily(k1)
    ax = g.xi_axis()
    nz = np.argwhere(np.abs(f.data).sum(axis=-1) > 0)
    lo = np.array([ax[nz[:, i]].min() for i in range(g.d)])
    hi = np.array([ax[nz[:, i]].max() for i in range(g.d)])
    cells = fam.cells_touching(lo, hi)
    coords = np.stack(np.meshgrid(*([ax] * g.d), indexing="ij"), axis=-1)
    total = 0.0
    n_used = 0
    for n_cell in cells:
        w = fam.narrow(np.asarray(n_cell), coords)
        if not np.any(w > 1e-12):
            continue
        piece = SpaceTimeField(g, f.data * w[..., None], "freq")
        if not np.any(piece.data):
            continue
        total += mixed_norm(ifft_spacetime(piece), e, 2, np.inf) ** 2
        n_used += 1
    lhs = float(np.sqrt(total))
    rhs = 2.0 ** ((g.d - 1) * k1 / 2.0) * 2.0 ** ((k - k1) / 2.0) * bound
    return TrialResult(lhs, rhs, extras={"e": str(e.ivec), "boxes": n_used})


def _trial_smooth(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    e = _random_direction(rng)
    dot = _xi_dot(g, e)
    w = pt.eta_j(1, dot / 2.0 ** (p["k"] - p["l"]))[..., None]
    piece = SpaceTimeField(g, f.data * w, "freq")
    lhs = mixed_norm(ifft_spacetime(piece), e, np.inf, 2)
    rhs = 2.0 ** (-p["k"] / 2.0) * bound
    return TrialResult(lhs, rhs, extras={"e": str(e.ivec)})


def _trial_energy(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    u = ifft_spacetime(f)
    if p["variant"] == "sup_l2":
        slab = np.sqrt(np.sum(np.abs(u.data) ** 2, axis=tuple(range(g.d))) * g.dx**g.d)
        lhs = float(np.max(slab))
        rhs = bound
    else:  # sup_inf
        lhs = float(np.max(np.abs(u.data)))
        rhs = 2.0 ** (g.d * p["k"] / 2.0) * bound
    return TrialResult(lhs, rhs)


def _trial_modcut(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    m = g.modulation()
    piece = SpaceTimeField(g, f.data * pt.eta_j(p["j"], m), "freq")
    if not np.any(piece.data):
        return TrialResult(0.0, bound, extras={})
    lhs = xk_norm(piece, p["k"], tol=np.inf)
    return TrialResult(lhs, bound)


def _trial_multsmooth(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    k, kp = p["k"], p["kp"]
    j = p["j"] if p["j"] >= 0 else max(0, 2 * kp - zk.desk_offset)
    try:
        f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    m = g.modulation()
    if p["variant"] == "onesided":
        e = axis_directions(g.d)[int(rng.integers(2 * g.d))]
        dot = _xi_dot(g, e)
        if p["mprof"] == "bump":
            mw = pt.eta0(m / 2.0**j)
        else:
            mw = pt.eta0(m / 2.0**j) * np.sin(np.pi * m / 2.0**j / 2.0)
        piece = SpaceTimeField(g, f.data * mw * pt.eta_j_signed(kp, dot, 1)[..., None], "freq")
        rhs = mixed_norm(ifft_spacetime(f), e, 1, 2)
        if rhs == 0.0:
            return _skip("zero directional norm")
        lhs = mixed_norm(ifft_spacetime(piece), e, 1, 2)
        return TrialResult(lhs, rhs, extras={"e": str(e.ivec)})
    # variant "zstable": low-modulation cutoffs are bounded on the shell space
    piece = SpaceTimeField(g, f.data * pt.eta_le(j, m), "freq")
    lhs, _ = zk_norm_upper(piece, k, zk)
    return TrialResult(lhs, bound)


def _trial_mult(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    k = p["k"]
    try:
        f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    r = g.xi_radii()
    cand = np.argwhere((r >= 0.9 * 2.0**k) & (r <= 1.1 * 2.0**k))
    if len(cand) == 0:
        return _skip("no multiplier center")
    ax = g.xi_axis()
    center = np.array([ax[i] for i in cand[int(rng.integers(len(cand)))]])
    diff = np.zeros(g.space_shape)
    for axis in range(g.d):
        shape = [1] * g.d
        shape[axis] = g.n_space
        diff = diff + (ax.reshape(shape) - center[axis]) ** 2
    mfun = pt.eta0(np.sqrt(diff) / 2.0 ** (k - p["s"]))
    piece = SpaceTimeField(g, f.data * mfun[..., None], "freq")
    lhs, _ = zk_norm_upper(piece, k, zk)
    kernel = ifft_space(SpatialField(g, mfun.astype(complex), "freq"))
    l1 = float(np.sum(np.abs(kernel.data)) * g.dx**g.d) / (2.0 * np.pi) ** (g.d / 2.0)
    return TrialResult(lhs, l1 * bound, extras={"l1": l1})


def _trial_xx1(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    k, j = p["k"], p["j"]
    e = axis_directions(g.d)[0]
    dot = _xi_dot(g, e)
    try:
        if p.get("kind", "x") == "y":
            f, _ = _make_probe_atom(g, zk, p, rng, safe=False)
        else:
            f, _ = make_atom(AtomSpec("x", k=k, j=p.get("j_atom", int(rng.integers(0, 4))), seed=_seeded(rng), safe=False), g, zk)
            side = (dot >= 2.0 ** (k - zk.desk_offset))[..., None]
            f = SpaceTimeField(g, f.data * side, "freq")
            if not np.any(f.data):
                return _skip("one-sided restriction empty")
    except UnrepresentableAtomError as err:
        return _skip(str(err))
    piece = SpaceTimeField(g, f.data * pt.eta_j(j, g.modulation()), "freq")
    if not np.any(piece.data):
        return TrialResult(0.0, 1.0, extras={})
    lhs, _ = zk_norm_upper(piece, k, zk)
    rhs = 2.0 ** (-k / 2.0) * mixed_norm(ifft_spacetime(resolvent_multiplier(f)), e, 1, 2)
    if rhs == 0.0:
        return _skip("zero resolvent norm")
    return TrialResult(lhs, rhs)


def _trial_linhom(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        phi, bound = make_atom(
            AtomSpec("besov_shell", k=p["k"], seed=_seeded(rng), safe=False), g, zk, sigma=p["sigma"]
        )
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    u = cutoff_free_solution(ifft_space(phi))
    lhs = fsigma_norm(u, p["sigma"], zk)
    return TrialResult(lhs, bound)


@lru_cache(maxsize=4)
def _psi_kernel(g: GridSpec) -> np.ndarray:
    tau = g.tau_axis()
    return psi_hat(tau[:, None] - tau[None, :])  # (tau, tau')


def _apply_t_operator(f: SpaceTimeField) -> SpaceTimeField:
    """Inhomogeneous-evolution transfer operator acting on shell functions.

    T(f)(xi, tau) = int f(xi,tau') [psihat(tau-tau') - psihat(tau+|xi|^2)]
                    (tau'+|xi|^2+i) / (tau'+|xi|^2) dtau',
    with the removable singularity at tau' = -|xi|^2 evaluated by its limit.
    """
    g = f.grid
    ker = _psi_kernel(g)  # psihat(tau - tau')
    a = g.xi_square().reshape(-1)
    data = f.data.reshape(-1, g.n_time)
    tau = g.tau_axis()
    out = np.empty_like(data)
    chunk = max(1, 2**22 // (g.n_time * g.n_time))
    for i in range(0, data.shape[0], chunk):
        ai = a[i : i + chunk][:, None]
        den = tau[None, :] + ai  # tau' + |xi|^2
        w = data[i : i + chunk] * (den + 1j)
        reg = np.abs(den) > 1e-9
        bsafe = np.where(reg, den, 1.0)
        # regular part: sum over tau' of w/den * [psihat(tau-tau') - psihat(tau+a)]
        wreg = np.where(reg, w / bsafe, 0.0)
        term1 = wreg @ ker.T
        term2 = -psi_hat(tau[None, :] + ai) * wreg.sum(axis=1)[:, None]
        # singular entries: limit -psihat'(tau+a) * w
        if not np.all(reg):
            sing = np.where(~reg, w, 0.0).sum(axis=1)[:, None]
            term2 = term2 + (-psi_hat_deriv(tau[None, :] + ai)) * sing
        out[i : i + chunk] = (term1 + term2) * g.dtau
    return SpaceTimeField(g, out.reshape(g.shape), "freq")


def _trial_lininh(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f, bound = _make_probe_atom(g, zk, p, rng, safe=False)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    tf = _apply_t_operator(f)
    lhs, _ = zk_norm_upper(tf, p["k"], zk)
    return TrialResult(lhs, bound)


def _bilinear_atoms(g: GridSpec, zk: ZkConfig, p: dict, rng):
    f1, _ = make_atom(AtomSpec("x", k=p["k1"], j=int(rng.integers(0, 4)), seed=_seeded(rng)), g, zk)
    f2, _ = make_atom(AtomSpec("x", k=p["k2"], j=int(rng.integers(0, 4)), seed=_seeded(rng)), g, zk)
    return f1, f2


def _trial_bil1(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f1, f2 = _bilinear_atoms(g, zk, p, rng)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    f1, _ = _maybe_conj(f1, rng)
    conv = convolve(f1, f2)
    piece = SpaceTimeField(g, conv.data * _shell_symbol_st(g, p["k"]), "freq")
    if not np.any(piece.data):
        return TrialResult(0.0, 1.0)
    val, _ = zk_norm_upper(piece, p["k"], zk)
    lhs = 2.0 ** (g.d * p["k"] / 2.0) * val
    rhs = 2.0 ** (-abs(p["k2"] - p["k"]) / 4.0) * 2.0 ** (g.d * (p["k1"] + p["k2"]) / 2.0)
    return TrialResult(lhs, rhs)


def _trial_bil2(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f1, f2 = _bilinear_atoms(g, zk, p, rng)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    f1, _ = _maybe_conj(f1, rng)
    conv = convolve(f1, resolvent_multiplier(f2, "multiply"))
    out = resolvent_multiplier(conv, "divide")
    piece = SpaceTimeField(g, out.data * _shell_symbol_st(g, p["k"]), "freq")
    if not np.any(piece.data):
        return TrialResult(0.0, 1.0)
    val, _ = zk_norm_upper(piece, p["k"], zk)
    lhs = 2.0 ** (g.d * p["k"] / 2.0) * val
    rhs = 2.0 ** (g.d * (p["k1"] + p["k2"]) / 2.0)
    return TrialResult(lhs, rhs)


def _trial_bil3(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f1, f2 = _bilinear_atoms(g, zk, p, rng)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    conv = convolve(resolvent_multiplier(f1, "multiply"), f2)
    out = resolvent_multiplier(conv, "divide")
    piece = SpaceTimeField(g, out.data * _shell_symbol_st(g, p["k"]), "freq")
    if not np.any(piece.data):
        return TrialResult(0.0, 1.0)
    val, _ = zk_norm_upper(piece, p["k"], zk)
    lhs = 2.0 ** (g.d * p["k"] / 2.0) * val
    rhs = 2.0 ** (-abs(p["k2"] - p["k"]) / 4.0) * 2.0 ** (g.d * (p["k1"] + p["k2"]) / 2.0)
    return TrialResult(lhs, rhs)


def _trial_tril(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    if min(p["k"], p["k2"], p["k3"]) > p["k1"] + 20:
        return _skip("outside the admissible index range")
    try:
        fs = []
        for kk in (p["k1"], p["k2"], p["k3"]):
            f, _ = make_atom(
                AtomSpec("x", k=kk, j=int(rng.integers(0, 3)), seed=_seeded(rng)), g, zk
            )
            f, _ = _maybe_conj(f, rng)
            fs.append(f)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    conv = convolve(convolve(fs[0], fs[1]), fs[2])
    out = resolvent_multiplier(conv, "divide")
    piece = SpaceTimeField(g, out.data * _shell_symbol_st(g, p["k"]), "freq")
    if not np.any(piece.data):
        return TrialResult(0.0, 1.0)
    val, _ = zk_norm_upper(piece, p["k"], zk)
    kmax = max(p["k1"], p["k2"], p["k3"])
    lhs = 2.0 ** (p["k2"] + p["k3"]) * 2.0 ** (g.d * p["k"] / 2.0) * val
    rhs = 2.0 ** (-abs(kmax - p["k"]) / 4.0) * 2.0 ** (g.d * (p["k1"] + p["k2"] + p["k3"]) / 2.0)
    return TrialResult(lhs, rhs)


def _trial_alg(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    try:
        f1, _ = make_atom(AtomSpec("x", k=p["k1"], j=int(rng.integers(0, 3)), seed=_seeded(rng)), g, zk)
        f2, _ = make_atom(AtomSpec("x", k=p["k2"], j=int(rng.integers(0, 3)), seed=_seeded(rng)), g, zk)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    u = ifft_spacetime(f1)
    v = ifft_spacetime(f2)
    sigma = g.d / 2.0
    fu = fsigma_norm(SpaceTimeField(g, f1.data, "freq"), sigma, zk)
    fv = fsigma_norm(SpaceTimeField(g, f2.data, "freq"), sigma, zk)
    uv = SpaceTimeField(g, u.data * v.data, "phys")
    lhs = fsigma_norm(uv, sigma, zk)
    rhs = fu * fv
    if rhs == 0.0:
        return _skip("degenerate factors")
    return TrialResult(lhs, rhs)


def _trial_nl(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    eps = 2.0 ** (-p["leps"])
    sigma = g.d / 2.0
    try:
        p1, _ = make_atom(AtomSpec("besov_shell", k=p["k"], seed=_seeded(rng), safe=False, target=eps), g, zk, sigma=sigma)
        p2, _ = make_atom(AtomSpec("besov_shell", k=p["k"], seed=_seeded(rng), safe=False, target=eps), g, zk, sigma=sigma)
    except UnrepresentableAtomError as e:
        return _skip(str(e))
    u = cutoff_free_solution(ifft_space(p1))
    v = cutoff_free_solution(ifft_space(p2))
    fu = fsigma_norm(u, sigma, zk)
    fv = fsigma_norm(v, sigma, zk)
    eps_hat = max(fu, fv)
    nu = nonlinearity_array(u.data, g)
    nv = nonlinearity_array(v.data, g)
    diff_n = SpaceTimeField(g, nu - nv, "phys")
    diff = SpaceTimeField(g, u.data - v.data, "phys")
    denom = fsigma_norm(diff, sigma, zk)
    if denom == 0.0 or eps_hat == 0.0:
        return _skip("degenerate pair")
    lhs = nsigma_norm(diff_n, sigma, zk)
    return TrialResult(lhs, eps_hat**2 * denom, extras={"eps_hat": eps_hat})


def _trial_nullform(g: GridSpec, zk: ZkConfig, p: dict, rng) -> TrialResult:
    mask = safe_box_mask(g, frac=1.0 / 3.0, tau_frac=1.0 / 3.0)
    data1 = np.zeros(g.shape, dtype=complex)
    data2 = np.zeros(g.shape, dtype=complex)
    n = int(mask.sum())
    data1[mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    data2[mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v = SpaceTimeField(g, data1, "freq")
    w = SpaceTimeField(g, data2, "freq")
    return TrialResult(null_form_residual(v, w), 1.0)


# --- the registry ---


def _shells_for_conv(g: GridSpec) -> list[int]:
    si = g.shell_indices()
    # input shells whose plateau survives the safe box
    out = []
    for k in range(si.k_min, si.k_max + 2):
        lo = 0.8 * 2.0**k
        if lo <= 0.5 * g.xi_nyquist * 0.94:
            if lo >= g.freq_unit * 0.99:
                out.append(k)
    return out


@dataclass(frozen=True)
class _Entry:
    spec: EstimateSpec
    params: tuple
    runner: object


def _build_registry() -> dict[str, _Entry]:
    reg: dict[str, _Entry] = {}

    def add(eid, desc, grid, zk, trials, axes, params, runner, kind="ratio", tol=1e-10):
        reg[eid] = _Entry(
            EstimateSpec(eid, desc, grid, zk, trials, tuple(axes), kind, tol),
            tuple(params),
            runner,
        )

    ks_conv = _shells_for_conv(GRID_CONV)  # typically [1, 2, 3]
    kmax = max(ks_conv)

    add(
        "L2CONV",
        "dyadic-region convolution bound with Cauchy-Schwarz oracle",
        GRID_CONV, ZK_PROBE, 50, ("k2", "j2"),
        # diagonal sweeps (all indices scale together) plus mixed spot checks
        [{"k1": v, "j1": 0, "k2": v, "j2": 0, "k": v, "j": 0} for v in (1, 2, 3)]
        + [{"k1": 2, "j1": v, "k2": 2, "j2": v, "k": 2, "j": v} for v in (0, 1, 2, 3, 4)]
        + [
            {"k1": 1, "j1": 1, "k2": 2, "j2": 2, "k": 2, "j": 1},
            {"k1": 2, "j1": 0, "k2": 3, "j2": 2, "k": 3, "j": 1},
            {"k1": 1, "j1": 2, "k2": 3, "j2": 3, "k": 3, "j": 2},
        ],
        _trial_l2conv,
    )
    add(
        "HIGHMOD",
        "high-modulation convolution smallness",
        GRID_CONV, ZK_PROBE, 50, ("k2", "j2"),
        [
            {"k1": k1, "j1": j1, "k2": k2, "j2": j2}
            for (k1, j1, k2, j2) in [
                (1, 1, 1, 1), (1, 2, 2, 2), (2, 2, 2, 3), (1, 3, 3, 3), (2, 1, 3, 4), (3, 2, 3, 3),
            ]
        ],
        _trial_highmod,
    )
    add(
        "MAX",
        "directional maximal-function bound (global and cube-localized)",
        GRID_FINE, ZK_SECTOR, 50, ("k",),
        [{"variant": "global", "k": k, "kind": kd} for k in (1, 2, 3) for kd in ("x", "x", "y") if not (kd == "y" and k < 2)]
        + [{"variant": "boxed", "k": 3, "k1": 1, "_trials": 10},
           {"variant": "boxed", "k": 2, "k1": 0, "_trials": 10},
           {"variant": "boxed_mod", "k": 3, "k1": 1, "_trials": 10}],
        _trial_max,
    )
    add(
        "SMOOTH",
        "directional local-smoothing bound",
        GRID_FINE, ZK_SECTOR, 50, ("k", "l"),
        [{"k": k, "l": l, "kind": kd}
         for k in (1, 2, 3) for l in (0, 1, 2) for kd in (("x", "y") if k >= 2 else ("x",))],
        _trial_smooth,
    )
    add(
        "ENERGY",
        "uniform-in-time mass and sup bounds",
        GRID_FINE, ZK_SECTOR, 50, ("k",),
        [{"k": k, "variant": v, "kind": kd}
         for k in (1, 2, 3) for v in ("sup_l2", "sup_inf")
         for kd in (("x", "y") if k >= 2 else ("x",))],
        _trial_energy,
    )
    add(
        "MODCUT",
        "modulation restriction maps the sum space into the weighted space "
        "(slope swept in k; the short j range is dominated by the dimensional "
        "sector factor 2^(2d) and is recorded, not regressed)",
        GRID_FINE, ZK_SECTOR, 50, ("k",),
        [{"k": k, "j": j, "kind": kd}
         for k in (2, 3) for j in (0, 1, 2, 4) for kd in ("x", "y")],
        _trial_modcut,
    )
    add(
        "MULTSMOOTH",
        "smooth low-modulation multipliers are bounded on directional and shell spaces",
        GRID_FINE, ZK_SECTOR, 50, ("k", "j"),
        [{"k": k, "kp": kp, "j": j, "variant": "onesided", "mprof": mp, "kind": "x"}
         for (k, kp) in ((2, 2), (3, 3)) for j in (0, 1, 2) for mp in ("bump", "osc")]
        + [{"k": k, "kp": k, "j": j, "variant": "zstable", "mprof": "bump", "kind": kd}
           for k in (2, 3) for j in (0, 2, 4) for kd in ("x", "y")],
        _trial_multsmooth,
    )
    add(
        "MULT",
        "bounded spatial multipliers with integrable kernel act on shell spaces",
        GRID_FINE, ZK_SECTOR, 50, ("k",),
        [{"k": k, "s": s, "kind": kd}
         for k in (1, 2, 3) for s in (1, 2) for kd in (("x", "y") if k >= 2 else ("x",))],
        _trial_mult,
    )
    add(
        "XX1",
        "one-sided shell functions controlled by the directional resolvent norm",
        GRID_FINE, ZK_SECTOR, 50, ("k", "j"),
        [{"k": k, "j": j, "kind": kd}
         for k in (2, 3) for j in (0, 1, 3) for kd in ("x", "y")],
        _trial_xx1,
    )
    add(
        "LINHOM",
        "cutoff free evolution bounded by the data norm",
        GRID_PSI, ZK_PROBE, 50, ("k",),
        [{"k": k, "sigma": s} for k in (0, 1, 2) for s in (1.5, 2.0)],
        _trial_linhom,
    )
    add(
        "LININH",
        "inhomogeneous transfer operator bounded on shell spaces",
        GRID_PSI, ZK_PROBE, 30, ("k",),
        [{"k": k, "kind": kd, "j": j}
         for k in (1, 2) for kd in ("x",) for j in (0, 1, 3)]
        + [{"k": 2, "kind": "y", "j": 0, "_trials": 12}],
        _trial_lininh,
    )
    # bilinear sweeps stay on full (uncapped) input shells so the k axes form
    # clean scaling families; box-truncated shells would fake growth
    full_in = [k for k in ks_conv if 1.25 * 2.0**k <= 0.5 * GRID_CONV.xi_nyquist]
    bil_params = [
        {"k1": k1, "k2": k2, "k": k}
        for k1 in full_in
        for k2 in full_in
        if k1 <= k2 + 2
        for k in range(max(1, k2 - 1), k2 + 2)
    ]
    add(
        "BIL1",
        "first dyadic bilinear bound (plain convolution)",
        GRID_CONV, ZK_PROBE, 50, ("k2", "k"),
        bil_params,
        _trial_bil1,
    )
    add(
        "BIL2",
        "second dyadic bilinear bound (resolvent on the high factor)",
        GRID_CONV, ZK_PROBE, 50, ("k",),
        [{"k1": 1, "k2": 3, "k": k} for k in (1, 2, 3, 4)]
        + [{"k1": 0, "k2": 2, "k": k, "_grid": "fine"} for k in (0, 1, 2)],
        _trial_bil2,
    )
    add(
        "BIL3",
        "third dyadic bilinear bound (resolvent on the low factor)",
        GRID_CONV, ZK_PROBE, 50, ("k2", "k"),
        bil_params,
        _trial_bil3,
    )
    add(
        "TRIL",
        "dyadic trilinear bound with derivative weights",
        GRID_FINE, ZK_PROBE, 50, ("k", "kmax"),
        [{"k1": k1, "k2": k2, "k3": k3, "k": k, "kmax": max(k1, k2, k3)}
         for (k1, k2, k3) in ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1))
         for k in (0, 1, 2)],
        _trial_tril,
    )
    add(
        "ALG",
        "product bound for the resolution spaces",
        GRID_CONV, ZK_PROBE, 50, ("k1", "k2"),
        [{"k1": k1, "k2": k2} for k1 in full_in for k2 in full_in if k1 <= k2],
        _trial_alg,
    )
    add(
        "NL",
        "cubic nonlinearity difference bound in the inhomogeneous norm",
        GRID_PSI, ZK_PROBE, 20, ("k", "leps"),
        [{"k": k, "leps": le} for k in (0, 1) for le in (5, 6, 7)],
        _trial_nl,
    )
    add(
        "NULLFORM",
        "algebraic null-form identity (exact; residual check)",
        GRID_NULL, ZK_PROBE, 20, (),
        [{}],
        _trial_nullform,
        kind="residual",
        tol=1e-10,
    )
    return reg


_REGISTRY: dict[str, _Entry] | None = None


def registry() -> dict[str, _Entry]:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _build_registry()
    return _REGISTRY


def estimate_ids() -> list[str]:
    return sorted(registry().keys())


# --- sweep runner ---

_PARAM_COLUMNS = (
    "k", "k1", "k2", "k3", "kmax", "j", "j1", "j2", "kp", "l", "s",
    "sigma", "leps", "variant", "kind", "mprof",
)


@dataclass
class ProbeRow:
    estimate_id: str
    run_label: str
    param_index: int
    trial: int
    seed: int
    params: dict
    lhs: float
    rhs: float
    ratio: float
    skipped: bool
    note: str
    extras: dict


@dataclass
class ProbeRunResult:
    estimate_id: str
    rows: list[ProbeRow]
    summary: dict


def _regression_slope(values: dict[float, float]) -> float | None:
    """Least-squares slope of log2(max ratio) against the swept index."""
    pts = [(v, r) for v, r in values.items() if r > 0]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.log2(np.array([p[1] for p in pts], dtype=float))
    x = x - x.mean()
    denom = float(np.sum(x * x))
    if denom == 0.0:
        return None
    return float(np.sum(x * y) / denom)


def run_probe(
    estimate_id: str,
    seed: int = 0,
    trials: int | None = None,
    max_params: int | None = None,
) -> ProbeRunResult:
    """Run the sweep for one estimate; deterministic for fixed (id, seed)."""
    entry = registry().get(estimate_id)
    if entry is None:
        raise KeyError(f"unknown estimate id {estimate_id!r}")
    spec = entry.spec
    run_label = f"{estimate_id}-seed{seed}"
    rows: list[ProbeRow] = []
    params = list(entry.params)
    if max_params is not None:
        params = params[:max_params]
    named_grids = {"conv": GRID_CONV, "fine": GRID_FINE, "psi": GRID_PSI, "null": GRID_NULL}
    for pi, p in enumerate(params):
        n_tr = int(p.get("_trials", trials if trials is not None else spec.trials))
        grid = named_grids.get(p.get("_grid", ""), spec.grid)
        for tr in range(n_tr):
            child = np.random.SeedSequence(entropy=seed, spawn_key=(pi, tr))
            rng = np.random.default_rng(child)
            try:
                res = entry.runner(grid, spec.zk, p, rng)
            except AliasingError as e:
                res = _skip(f"aliasing: {e}")
            ratio = res.ratio if not res.skipped else float("nan")
            rows.append(
                ProbeRow(
                    estimate_id=estimate_id,
                    run_label=run_label,
                    param_index=pi,
                    trial=tr,
                    seed=seed,
                    params={k: v for k, v in p.items() if not k.startswith("_")},
                    lhs=res.lhs,
                    rhs=res.rhs,
                    ratio=ratio,
                    skipped=res.skipped,
                    note=res.note,
                    extras=res.extras,
                )
            )
    summary = summarize(estimate_id, rows)
    return ProbeRunResult(estimate_id, rows, summary)


def summarize(estimate_id: str, rows: list[ProbeRow]) -> dict:
    entry = registry()[estimate_id]
    spec = entry.spec
    live = [r for r in rows if not r.skipped and np.isfinite(r.ratio)]
    n_skipped = sum(1 for r in rows if r.skipped)
    summary: dict = {
        "estimate_id": estimate_id,
        "kind": spec.kind,
        "n_trials": len(rows),
        "n_skipped": n_skipped,
        "slope_threshold": SLOPE_THRESHOLD,
    }
    if not live:
        summary.update({"max_ratio": None, "slopes": {}, "verdict": "NO-DATA"})
        return summary
    ratios = np.array([r.ratio for r in live])
    imax = int(np.argmax(ratios))
    summary["max_ratio"] = float(ratios[imax])
    summary["argmax_params"] = dict(live[imax].params)
    if live[imax].extras:
        summary["argmax_extras"] = {k: str(v) for k, v in live[imax].extras.items()}
    if spec.kind == "residual":
        summary["tolerance"] = spec.tol
        summary["verdict"] = "PASS" if summary["max_ratio"] <= spec.tol else "FAIL"
        summary["slopes"] = {}
        return summary
    slopes = {}
    for axis in spec.dyadic_axes:
        per_value: dict[float, float] = {}
        for r in live:
            if axis not in r.params:
                continue
            v = float(r.params[axis])
            per_value[v] = max(per_value.get(v, 0.0), r.ratio)
        slope = _regression_slope(per_value)
        if slope is not None:
            slopes[axis] = slope
    summary["slopes"] = slopes
    bad = [a for a, s in slopes.items() if s > SLOPE_THRESHOLD]
    summary["verdict"] = "FAIL" if bad else "PASS"
    if bad:
        summary["failing_axes"] = bad
    cs = [r.extras.get("cs_ratio") for r in live if "cs_ratio" in r.extras]
    if cs:
        summary["max_cs_ratio"] = float(max(cs))
    return summary
