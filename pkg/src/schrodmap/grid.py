"""Periodic space-time grids, discretized fields, Fourier transforms, fiber slicing.

Conventions
-----------
* Spatial lattice: N points per axis, spacing dx, period L_x = 2*pi/freq_unit,
  so the frequency lattice is freq_unit * Z^d.  Time axis: N_t points over a
  window of length t_window centered at 0; frequency lattice spacing
  2*pi/t_window.
* All arrays are stored in FFT (wrap-around) index order; coordinate values
  are attached via signed indices, which makes plain fftn/ifftn the exact
  transform of the centered lattice (no phase bookkeeping).
* Transforms are unitary with respect to the continuum measures dx^d dt and
  dxi^d dtau: Plancherel holds exactly on the lattice.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .partition import Direction, ShellIndexSet, shell_support

__all__ = [
    "GridSpec",
    "SpatialField",
    "SpaceTimeField",
    "SphereField",
    "FiberSlicing",
    "DomainError",
    "GridMismatchError",
    "fft_space",
    "ifft_space",
    "fft_spacetime",
    "ifft_spacetime",
    "modulation_multiplier",
    "fiber_slice",
    "save_field",
    "load_field",
    "dyadic_rescale_fourier",
]


class DomainError(ValueError):
    """Field is in the wrong domain (physical vs Fourier) for the operation."""


class GridMismatchError(ValueError):
    """Operands live on different grids."""


def _workers() -> int:
    return max(1, int(os.environ.get("SCHRODMAP_WORKERS", "1")))


@dataclass(frozen=True)
class GridSpec:
    """Periodic (d+1)-dimensional sampling grid (space x time)."""

    d: int = 3
    n_space: int = 16
    n_time: int = 64
    freq_unit: float = 1.0
    t_window: float = 8.0

    def __post_init__(self):
        for n, name in ((self.n_space, "n_space"), (self.n_time, "n_time")):
            if n < 2 or n & (n - 1):
                raise ValueError(f"{name} must be a power of two, got {n}")
        if self.freq_unit <= 0 or self.t_window <= 0:
            raise ValueError("freq_unit and t_window must be positive")

    # --- derived scalars ---
    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.freq_unit

    @property
    def dx(self) -> float:
        return self.period / self.n_space

    @property
    def dt(self) -> float:
        return self.t_window / self.n_time

    @property
    def dxi(self) -> float:
        return self.freq_unit

    @property
    def dtau(self) -> float:
        return 2.0 * np.pi / self.t_window

    @property
    def xi_nyquist(self) -> float:
        return self.freq_unit * self.n_space / 2.0

    @property
    def tau_max(self) -> float:
        return self.dtau * self.n_time / 2.0

    @property
    def space_shape(self) -> tuple[int, ...]:
        return (self.n_space,) * self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return self.space_shape + (self.n_time,)

    @property
    def cell_x(self) -> float:
        return self.dx**self.d * self.dt

    @property
    def cell_xi(self) -> float:
        return self.dxi**self.d * self.dtau

    # --- derived arrays (cached per spec) ---
    def xi_axis(self) -> np.ndarray:
        return _xi_axis(self)

    def tau_axis(self) -> np.ndarray:
        return _tau_axis(self)

    def t_axis(self) -> np.ndarray:
        return _t_axis(self)

    def x_axis(self) -> np.ndarray:
        return _x_axis(self)

    def xi_radii(self) -> np.ndarray:
        return _xi_radii(self)

    def xi_square(self) -> np.ndarray:
        return _xi_radii(self) ** 2

    def modulation(self) -> np.ndarray:
        """tau + |xi|^2 on the full (space-freq, time-freq) lattice."""
        return _modulation(self)

    def shell_indices(self) -> ShellIndexSet:
        return _shell_indices(self)

    def shell_mask(self, k: int) -> np.ndarray:
        """Boolean indicator of the closed annulus |xi| in [2^(k-1), 2^(k+1)]."""
        r = self.xi_radii()
        return (r >= 2.0 ** (k - 1)) & (r <= 2.0 ** (k + 1))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n_space": self.n_space,
            "n_time": self.n_time,
            "freq_unit": self.freq_unit,
            "t_window": self.t_window,
        }

    @staticmethod
    def from_dict(obj: dict) -> "GridSpec":
        return GridSpec(
            d=int(obj["d"]),
            n_space=int(obj["n_space"]),
            n_time=int(obj["n_time"]),
            freq_unit=float(obj["freq_unit"]),
            t_window=float(obj["t_window"]),
        )

    def space_only(self) -> "GridSpec":
        return replace(self)


def _signed_indices(n: int) -> np.ndarray:
    s = np.arange(n)
    s[n // 2 :] -= n
    return s


@lru_cache(maxsize=64)
def _xi_axis(g: GridSpec) -> np.ndarray:
    return _signed_indices(g.n_space) * g.freq_unit


@lru_cache(maxsize=64)
def _tau_axis(g: GridSpec) -> np.ndarray:
    return _signed_indices(g.n_time) * g.dtau


@lru_cache(maxsize=64)
def _t_axis(g: GridSpec) -> np.ndarray:
    return _signed_indices(g.n_time) * g.dt


@lru_cache(maxsize=64)
def _x_axis(g: GridSpec) -> np.ndarray:
    return _signed_indices(g.n_space) * g.dx


@lru_cache(maxsize=64)
def _xi_radii(g: GridSpec) -> np.ndarray:
    ax = _xi_axis(g)
    r2 = np.zeros(g.space_shape)
    for axis in range(g.d):
        shape = [1] * g.d
        shape[axis] = g.n_space
        r2 = r2 + (ax**2).reshape(shape)
    return np.sqrt(r2)


@lru_cache(maxsize=64)
def _modulation(g: GridSpec) -> np.ndarray:
    return _xi_radii(g)[..., None] ** 2 + _tau_axis(g).reshape((1,) * g.d + (g.n_time,))


@lru_cache(maxsize=64)
def _shell_indices(g: GridSpec) -> ShellIndexSet:
    # lowest shell containing a lattice point, highest shell fully inside the axis Nyquist ball
    k_min = int(np.ceil(np.log2(g.freq_unit / shell_support(0)[1])))
    k_max = int(np.floor(np.log2(g.xi_nyquist / shell_support(0)[1])))
    j_max = max(0, int(np.floor(np.log2(g.tau_max))))
    return ShellIndexSet(k_min=k_min, k_max=k_max, j_max=j_max)


# --- fields ---


@dataclass
class SpatialField:
    """Complex scalar field on the spatial grid, in physical or Fourier domain."""

    grid: GridSpec
    data: np.ndarray
    domain: str = "phys"  # "phys" | "freq"

    def __post_init__(self):
        if self.data.shape != self.grid.space_shape:
            raise ValueError(f"data shape {self.data.shape} != grid {self.grid.space_shape}")
        if self.domain not in ("phys", "freq"):
            raise ValueError(f"bad domain {self.domain!r}")

    def copy(self) -> "SpatialField":
        return SpatialField(self.grid, self.data.copy(), self.domain)

    def l2(self) -> float:
        w = self.grid.dx**self.grid.d if self.domain == "phys" else self.grid.dxi**self.grid.d
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2) * w))


@dataclass
class SpaceTimeField:
    """Complex field on the space x time grid; axes (x_1..x_d, t) or (xi_1..xi_d, tau)."""

    grid: GridSpec
    data: np.ndarray
    domain: str = "phys"

    def __post_init__(self):
        if self.data.shape != self.grid.shape:
            raise ValueError(f"data shape {self.data.shape} != grid {self.grid.shape}")
        if self.domain not in ("phys", "freq"):
            raise ValueError(f"bad domain {self.domain!r}")

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.data.copy(), self.domain)

    def l2(self) -> float:
        w = self.grid.cell_x if self.domain == "phys" else self.grid.cell_xi
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2) * w))


@dataclass
class SphereField:
    """Unit 3-vector field on the spatial grid (samples shape: space_shape + (3,))."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.grid.space_shape + (3,):
            raise ValueError("sphere field must have a trailing 3-vector axis")

    def component(self, i: int) -> SpatialField:
        return SpatialField(self.grid, self.data[..., i].astype(complex), "phys")

    def max_norm_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.data, axis=-1) - 1.0)))


# --- transforms ---


def fft_space(f: SpatialField) -> SpatialField:
    if f.domain != "phys":
        raise DomainError("fft_space expects a physical-domain field")
    g = f.grid
    scale = g.dx**g.d / (2.0 * np.pi) ** (g.d / 2.0)
    out = sfft.fftn(f.data, workers=_workers()) * scale
    return SpatialField(g, out, "freq")


def ifft_space(f: SpatialField) -> SpatialField:
    if f.domain != "freq":
        raise DomainError("ifft_space expects a Fourier-domain field")
    g = f.grid
    scale = g.n_space**g.d * g.dxi**g.d / (2.0 * np.pi) ** (g.d / 2.0)
    out = sfft.ifftn(f.data, workers=_workers()) * scale
    return SpatialField(g, out, "phys")


def fft_spacetime(u: SpaceTimeField) -> SpaceTimeField:
    if u.domain != "phys":
        raise DomainError("fft_spacetime expects a physical-domain field")
    g = u.grid
    scale = g.cell_x / (2.0 * np.pi) ** ((g.d + 1) / 2.0)
    out = sfft.fftn(u.data, workers=_workers()) * scale
    return SpaceTimeField(g, out, "freq")


def ifft_spacetime(u: SpaceTimeField) -> SpaceTimeField:
    if u.domain != "freq":
        raise DomainError("ifft_spacetime expects a Fourier-domain field")
    g = u.grid
    scale = g.n_space**g.d * g.n_time * g.cell_xi / (2.0 * np.pi) ** ((g.d + 1) / 2.0)
    out = sfft.ifftn(u.data, workers=_workers()) * scale
    return SpaceTimeField(g, out, "phys")


def fft_space_slices(data: np.ndarray, grid: GridSpec, inverse: bool = False) -> np.ndarray:
    """Spatial transform of every time slice of a raw (space..., time) array."""
    axes = tuple(range(grid.d))
    scale = grid.dx**grid.d / (2.0 * np.pi) ** (grid.d / 2.0)
    if not inverse:
        return sfft.fftn(data, axes=axes, workers=_workers()) * scale
    iscale = grid.n_space**grid.d * grid.dxi**grid.d / (2.0 * np.pi) ** (grid.d / 2.0)
    return sfft.ifftn(data, axes=axes, workers=_workers()) * iscale


def conjugate_reflect(f: SpaceTimeField) -> SpaceTimeField:
    """Fourier-side image of pointwise conjugation: conj(f(-xi, -tau)).

    If f = F(u) then conjugate_reflect(f) = F(conj(u)); exact on the lattice.
    """
    if f.domain != "freq":
        raise DomainError("conjugate_reflect acts on Fourier-domain fields")
    rev = f.data
    for ax in range(rev.ndim):
        rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
    return SpaceTimeField(f.grid, np.conj(rev), "freq")


# --- modulation multipliers ---

_MOD_VARIANTS = ("exact", "le", "ge", "plus", "minus")


def modulation_multiplier(u: SpaceTimeField, j: int, variant: str = "exact") -> SpaceTimeField:
    """Multiply a Fourier-domain field by an eta cutoff in tau + |xi|^2.

    Variants: "exact" (eta_j), "le" (eta_{<=j}), "ge" (eta_{>=j}), "plus"/"minus"
    (eta_j restricted to the sign of the modulation).  The top representable
    bin is clamped: for j at the grid ceiling, "exact" silently behaves like
    "ge" so that the family still sums to 1.
    """
    from . import partition as pt

    if u.domain != "freq":
        raise DomainError("modulation_multiplier expects a Fourier-domain field")
    if variant not in _MOD_VARIANTS:
        raise ValueError(f"variant must be one of {_MOD_VARIANTS}")
    if j < 0:
        raise ValueError("j must be >= 0")
    jc = modulation_ceiling(u.grid)
    if j > jc:
        raise ValueError(f"modulation index {j} exceeds grid ceiling {jc}")
    m = u.grid.modulation()
    if variant == "exact":
        w = pt.eta_ge(j, m) if j == jc else pt.eta_j(j, m)
    elif variant == "le":
        w = pt.eta_le(j, m)
    elif variant == "ge":
        w = pt.eta_ge(j, m)
    else:
        sign = 1 if variant == "plus" else -1
        w = pt.eta_j_signed(j, m, sign)
    return SpaceTimeField(u.grid, u.data * w, "freq")


@lru_cache(maxsize=64)
def modulation_ceiling(g: GridSpec) -> int:
    """Smallest j such that eta_{<=j}(tau+|xi|^2) = 1 on the whole lattice."""
    mmax = float(np.max(np.abs(_modulation(g))))
    return max(0, int(np.ceil(np.log2(max(mmax, 1.0) / 1.25))) + 1)


# --- fiber slicing along rational directions ---


@dataclass
class FiberSlicing:
    """Partition of the spatial lattice into periodic hyperplane classes x.e = const.

    `labels` maps each spatial lattice site to its fiber index (0..n_fibers-1),
    `r_values` gives a representative projection value per fiber, `dr` the
    spacing between adjacent fibers and `dv` the induced transverse measure
    weight, with dr * dv = dx^d.
    """

    direction: Direction
    grid: GridSpec
    labels: np.ndarray
    r_values: np.ndarray
    dr: float
    dv: float

    @property
    def n_fibers(self) -> int:
        return len(self.r_values)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_fibers)

    def fiber_arrays(self, u: SpaceTimeField) -> list[np.ndarray]:
        """Per-fiber (n_points, n_time) sample arrays, ordered by r value."""
        flat = u.data.reshape(-1, u.grid.n_time)
        lab = self.labels.ravel()
        order = np.argsort(lab, kind="stable")
        bounds = np.searchsorted(lab[order], np.arange(self.n_fibers + 1))
        return [flat[order[bounds[i] : bounds[i + 1]]] for i in range(self.n_fibers)]


@lru_cache(maxsize=256)
def _fiber_labels(g: GridSpec, ivec: tuple[int, ...]) -> np.ndarray:
    n = g.n_space
    s = _signed_indices(n)
    lab = np.zeros(g.space_shape, dtype=np.int64)
    for axis, m in enumerate(ivec):
        shape = [1] * g.d
        shape[axis] = n
        lab = lab + m * s.reshape(shape)
    return np.mod(lab, n)


def fiber_slice(u_or_grid, e: Direction) -> FiberSlicing:
    """Exact partition of the lattice into hyperplane fibers x.e = const.

    Accepts a SpaceTimeField (must be physical-domain) or a bare GridSpec.
    Directions must be rational (integer primitive vectors); nothing is
    interpolated.  Fibers are the periodic classes (n.m mod N), the native
    torus fibration.
    """
    if isinstance(u_or_grid, SpaceTimeField):
        if u_or_grid.domain != "phys":
            raise DomainError("fiber_slice expects a physical-domain field")
        g = u_or_grid.grid
    elif isinstance(u_or_grid, GridSpec):
        g = u_or_grid
    else:
        raise TypeError("fiber_slice takes a SpaceTimeField or GridSpec")
    if not isinstance(e, Direction):
        raise TypeError("direction must be a rational lattice Direction")
    if e.d != g.d:
        raise GridMismatchError(f"direction has dimension {e.d}, grid {g.d}")
    labels = _fiber_labels(g, e.ivec)
    n = g.n_space
    dr = g.dx / e.norm
    dv = g.dx ** (g.d - 1) * e.norm
    c_signed = _signed_indices(n)
    order = np.argsort(c_signed, kind="stable")
    # relabel so fibers are ordered by increasing representative r
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    labels = rank[labels]
    r_values = np.sort(c_signed) * dr
    return FiberSlicing(e, g, labels, r_values, dr, dv)


# --- binary field container ---

_MAGIC = b"SMFLD1\n"


def save_field(path, field) -> None:
    """Flat binary container: magic, header length, JSON header, raw little-endian payload."""
    if isinstance(field, SpatialField):
        kind, payload = "spatial", field.data.astype("<c16")
        domain = field.domain
    elif isinstance(field, SpaceTimeField):
        kind, payload = "spacetime", field.data.astype("<c16")
        domain = field.domain
    elif isinstance(field, SphereField):
        kind, payload = "sphere", field.data.astype("<f8")
        domain = "phys"
    else:
        raise TypeError(f"cannot persist {type(field)!r}")
    header = json.dumps(
        {
            "kind": kind,
            "domain": domain,
            "grid": field.grid.to_dict(),
            "dtype": str(payload.dtype),
            "shape": list(payload.shape),
            "endianness": "little",
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload.tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a schrodmap field container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        payload = fh.read()
    grid = GridSpec.from_dict(header["grid"])
    data = np.frombuffer(payload, dtype=header["dtype"]).reshape(header["shape"]).copy()
    kind = header["kind"]
    if kind == "spatial":
        return SpatialField(grid, data.astype(np.complex128), header["domain"])
    if kind == "spacetime":
        return SpaceTimeField(grid, data.astype(np.complex128), header["domain"])
    if kind == "sphere":
        return SphereField(grid, data.astype(np.float64))
    raise ValueError(f"unknown field kind {kind!r}")


def dyadic_rescale_fourier(f: SpatialField, up: bool = True) -> SpatialField:
    """Exact lattice form of phi(x) -> phi(2x) (up) or phi(x/2) (down), in Fourier.

    Shell content moves k -> k+1 (up) or k -> k-1 (down).  The amplitude
    factor 2^(-d/2) (resp. 2^(d/2)) is the one that preserves the continuum
    scaling identities on a fixed lattice: the physical L^2 mass transforms
    exactly as for phi(2x) on R^d, and the critical Besov norm is invariant.
    Going up requires the source band-limited to |index| < n/4; the dropped
    modes are the caller's responsibility.
    """
    if f.domain != "freq":
        raise DomainError("dyadic_rescale_fourier expects a Fourier-domain field")
    g = f.grid
    n = g.n_space
    src = f.data
    out = np.zeros_like(src)
    s = _signed_indices(n)
    if up:
        half = s[np.abs(2 * s) <= n // 2 - 1]
        idx_src = np.ix_(*([np.mod(half, n)] * g.d))
        idx_dst = np.ix_(*([np.mod(2 * half, n)] * g.d))
        out[idx_dst] = src[idx_src] * 2.0 ** (-g.d / 2.0)
    else:
        even = s[s % 2 == 0]
        idx_src = np.ix_(*([np.mod(even, n)] * g.d))
        idx_dst = np.ix_(*([np.mod(even // 2, n)] * g.d))
        out[idx_dst] = src[idx_src] * 2.0 ** (g.d / 2.0)
    return SpatialField(g, out, "freq")
