"""Dyadic cutoff functions, frequency shells, direction sets and lattice cutoffs.

Everything here is pure and immutable after construction; the rest of the
package treats these objects as shared read-only data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BumpProfile",
    "ShellIndexSet",
    "Direction",
    "DirectionSet",
    "LatticeCutoffFamily",
    "CoveringError",
    "TransversalityError",
    "eta0",
    "eta_j",
    "eta_le",
    "eta_ge",
    "eta_range",
    "eta_j_signed",
    "eta_range_signed",
    "shell_symbol",
    "shell_support",
    "build_direction_set",
    "pick_transverse_direction",
    "lattice_cutoff",
    "lattice_cutoff_wide",
]


class CoveringError(ValueError):
    """Requested covering radius is not achievable at the configured height cap."""


class TransversalityError(ValueError):
    """No direction in the set meets the transversality thresholds."""


def _smooth_step(x):
    """C-infinity step: 0 for x<=0, 1 for x>=1, g(x)/(g(x)+g(1-x)) between."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        gx = np.where(x > 0.0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
        gomx = np.where(1.0 - x > 0.0, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
    den = gx + gomx
    out = np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, gx / np.where(den == 0.0, 1.0, den)))
    return out


@dataclass(frozen=True)
class BumpProfile:
    """Smooth even bump: 1 on [-plateau, plateau], 0 outside (-support, support).

    The transition uses the complementary pair S(x) + S(1-x) = 1, which makes
    dyadic differences and integer translates partition unity exactly.
    """

    plateau: float = 5.0 / 4.0
    support: float = 8.0 / 5.0

    def __call__(self, mu):
        mu = np.abs(np.asarray(mu, dtype=float))
        return _smooth_step((self.support - mu) / (self.support - self.plateau))


_ETA0 = BumpProfile()


def eta0(mu):
    """Base even bump: 1 on |mu|<=5/4, 0 on |mu|>=8/5, monotone between."""
    return _ETA0(mu)


def eta_j(j: int, mu):
    """Dyadic annular bump eta_j(mu) = eta0(mu/2^j) - eta0(mu/2^(j-1)); eta_0 = eta0.

    Supported in |mu| in [5/8*2^j, 8/5*2^j] for j >= 1.  Negative j is an
    error here; the [j1,j2] combinators implement the `vanishes for j<0`
    convention.
    """
    if j < 0:
        raise ValueError(f"eta_j needs j >= 0, got {j}")
    if j == 0:
        return eta0(mu)
    mu = np.asarray(mu, dtype=float)
    return eta0(mu / 2.0**j) - eta0(mu / 2.0 ** (j - 1))


def eta_j_array(j, mu):
    """eta_j with a per-point bin index array (vectorized over both arguments)."""
    j = np.asarray(j)
    mu = np.asarray(mu, dtype=float)
    hi = eta0(mu / 2.0**j)
    lo = np.where(j >= 1, eta0(mu / 2.0 ** np.maximum(j - 1, 0)), 0.0)
    return hi - lo


def eta_le(j: int, mu):
    """Sum of eta_{j'} for 0 <= j' <= j; telescopes to eta0(mu/2^j)."""
    if j < 0:
        return np.zeros_like(np.asarray(mu, dtype=float))
    return eta0(np.asarray(mu, dtype=float) / 2.0**j)


def eta_ge(j: int, mu):
    """1 - eta_le(j-1, mu)."""
    mu = np.asarray(mu, dtype=float)
    if j <= 0:
        return np.ones_like(mu)
    return 1.0 - eta_le(j - 1, mu)


def eta_range(j1: int, j2: int, mu):
    """Sum of eta_{j'} over j1 <= j' <= j2 (zero if j1 > j2); exact telescoping."""
    mu = np.asarray(mu, dtype=float)
    if j1 > j2:
        return np.zeros_like(mu)
    if j1 <= 0:
        return eta_le(j2, mu)
    return eta_le(j2, mu) - eta_le(j1 - 1, mu)


def eta_j_signed(j: int, mu, sign: int):
    """eta_j restricted to the half line: eta_j(mu) * 1_{sign*mu >= 0}."""
    mu = np.asarray(mu, dtype=float)
    ind = (sign * mu) >= 0.0
    return eta_j(j, mu) * ind


def eta_range_signed(j1: int, j2: int, mu, sign: int):
    mu = np.asarray(mu, dtype=float)
    ind = (sign * mu) >= 0.0
    return eta_range(j1, j2, mu) * ind


def shell_symbol(k: int, xi):
    """Spherical shell bump eta_k^(d)(xi) = eta0(|xi|/2^k) - eta0(|xi|/2^(k-1)).

    `xi` is an array of frequency vectors; the last axis indexes the d components.
    """
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(np.sum(xi * xi, axis=-1))
    return shell_symbol_radial(k, r)


def shell_symbol_radial(k: int, r):
    """Same as shell_symbol but takes radii |xi| directly."""
    r = np.asarray(r, dtype=float)
    return eta0(r / 2.0**k) - eta0(r / 2.0 ** (k - 1))


def shell_support(k: int) -> tuple[float, float]:
    """Radial interval outside which eta_k^(d) vanishes identically."""
    return (0.625 * 2.0**k, 1.6 * 2.0**k)


@dataclass(frozen=True)
class ShellIndexSet:
    """Dyadic indices representable on a grid: spatial shells and modulation bins."""

    k_min: int
    k_max: int
    j_max: int

    def shells(self) -> range:
        return range(self.k_min, self.k_max + 1)


@dataclass(frozen=True)
class Direction:
    """Unit vector obtained by normalizing a primitive integer vector."""

    ivec: tuple[int, ...]

    def __post_init__(self):
        g = int(np.gcd.reduce([abs(c) for c in self.ivec]))
        if g == 0:
            raise ValueError("zero direction")
        if g != 1:
            raise ValueError(f"integer vector {self.ivec} is not primitive")

    @property
    def d(self) -> int:
        return len(self.ivec)

    @property
    def norm(self) -> float:
        return float(np.sqrt(sum(c * c for c in self.ivec)))

    @property
    def unit(self) -> np.ndarray:
        v = np.asarray(self.ivec, dtype=float)
        return v / np.linalg.norm(v)

    def __neg__(self) -> "Direction":
        return Direction(tuple(-c for c in self.ivec))


@dataclass(frozen=True)
class DirectionSet:
    """Finite symmetric family of rational unit directions with certified covering radius."""

    directions: tuple[Direction, ...]
    delta: float
    achieved_radius: float
    symmetric: bool = True

    def __len__(self) -> int:
        return len(self.directions)

    def units(self) -> np.ndarray:
        return np.stack([e.unit for e in self.directions])

    def to_json(self) -> str:
        return json.dumps(
            {
                "delta": self.delta,
                "achieved_radius": self.achieved_radius,
                "directions": [list(e.ivec) for e in self.directions],
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "DirectionSet":
        obj = json.loads(text)
        dirs = tuple(Direction(tuple(v)) for v in obj["directions"])
        return DirectionSet(dirs, float(obj["delta"]), float(obj["achieved_radius"]))


def _sphere_sample(d: int, n: int, seed: int = 20210) -> np.ndarray:
    """Deterministic quasi-uniform sample of the unit sphere used to certify covering."""
    if d == 3:
        # Fibonacci spiral: very even coverage for the d=3 workhorse case.
        i = np.arange(n, dtype=float) + 0.5
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((n, d))
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def _primitive_vectors(d: int, height: int) -> list[tuple[int, ...]]:
    out = []
    ranges = [range(-height, height + 1)] * d
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    for v in grid:
        if not np.any(v):
            continue
        if int(np.gcd.reduce(np.abs(v))) != 1:
            continue
        out.append(tuple(int(c) for c in v))
    return out


def build_direction_set(
    d: int,
    delta: float = 0.2,
    max_height: int = 4,
    n_check: int = 10_000,
) -> DirectionSet:
    """Smallest-height symmetric family of rational directions covering S^(d-1) at radius delta.

    Heights are increased until a quasi-uniform sphere sample of size
    `n_check` is covered; failure at `max_height` raises CoveringError and
    reports the radius actually achieved.
    """
    if d < 3:
        raise ValueError("direction sets are used for d >= 3")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0,1), got {delta}")
    samples = _sphere_sample(d, n_check)
    best_rad = np.inf
    for h in range(1, max_height + 1):
        vecs = _primitive_vectors(d, h)
        units = np.stack([np.asarray(v, float) / np.linalg.norm(v) for v in vecs])
        # covering radius on the sample: max over w of min_l |w - e_l|
        d2 = np.maximum(0.0, 2.0 - 2.0 * (samples @ units.T))
        rad = float(np.sqrt(np.max(np.min(d2, axis=1))))
        best_rad = min(best_rad, rad)
        if rad <= delta:
            dirs = tuple(Direction(v) for v in vecs)
            return DirectionSet(dirs, delta, rad)
    raise CoveringError(
        f"covering not achieved: radius {best_rad:.4g} at height {max_height} exceeds delta {delta:.4g}"
    )


def transversality_constant(delta: float) -> float:
    """Dot-product threshold guaranteed by a delta-covering (floor 2^-5)."""
    return max(2.0**-5, 1.0 / np.sqrt(2.0) - delta)


def pick_transverse_direction(w1, w2, dirs: DirectionSet) -> tuple[Direction, float, float, float]:
    """Direction e with e.w1 >= c and |e.w2| >= c, c derived from the set's delta.

    Returns (direction, e.w1, |e.w2|, c).  Scans the whole finite set and
    raises TransversalityError with the best achievable pair if the
    threshold cannot be met.
    """
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    for w in (w1, w2):
        if abs(np.linalg.norm(w) - 1.0) > 1e-9:
            raise ValueError("w1, w2 must be unit vectors")
    c = transversality_constant(dirs.delta)
    units = dirs.units()
    a = units @ w1
    b = np.abs(units @ w2)
    score = np.minimum(a, b)
    best = int(np.argmax(score))
    if score[best] >= c:
        return dirs.directions[best], float(a[best]), float(b[best]), c
    raise TransversalityError(
        f"no direction with both dot products >= {c:.4g}; best pair ({a[best]:.4g}, {b[best]:.4g})"
    )


# --- lattice cutoffs (partition of unity over cubes 2^k * Z^l) ---

_CHI_PLATEAU = 1.0 / 3.0
_CHI_SUPPORT = 2.0 / 3.0


def chi1(xi):
    """1D cube cutoff supported in [-2/3,2/3] with sum over integer translates = 1."""
    xi = np.abs(np.asarray(xi, dtype=float))
    return _smooth_step((_CHI_SUPPORT - xi) / (_CHI_SUPPORT - _CHI_PLATEAU))


def chi1_wide(xi):
    """Companion cutoff: 1 on [-3,3], supported in [-4,4]; chi1_wide = 1 on supp chi1."""
    xi = np.abs(np.asarray(xi, dtype=float))
    return _smooth_step(4.0 - xi)


@dataclass(frozen=True)
class LatticeCutoffFamily:
    """Cube partition of unity chi_{k,n}(xi) = prod_i chi1((xi_i - n_i)/2^k), n in 2^k Z^l."""

    k: int

    @property
    def spacing(self) -> float:
        return 2.0**self.k

    def _check_lattice(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        q = n / self.spacing
        if not np.allclose(q, np.round(q), atol=1e-9):
            raise ValueError(f"{n} is not on the scale-{self.k} lattice")
        return n

    def narrow(self, n, xi) -> np.ndarray:
        n = self._check_lattice(n)
        xi = np.asarray(xi, dtype=float)
        vals = chi1((xi - n) / self.spacing)
        return np.prod(vals, axis=-1)

    def wide(self, n, xi) -> np.ndarray:
        n = self._check_lattice(n)
        xi = np.asarray(xi, dtype=float)
        vals = chi1_wide((xi - n) / self.spacing)
        return np.prod(vals, axis=-1)

    def cells_touching(self, lo: np.ndarray, hi: np.ndarray) -> list[tuple[float, ...]]:
        """Lattice points n whose narrow cutoff can be nonzero on the box [lo, hi]."""
        lo = np.asarray(lo, float) - _CHI_SUPPORT * self.spacing
        hi = np.asarray(hi, float) + _CHI_SUPPORT * self.spacing
        axes = [
            np.arange(np.ceil(l / self.spacing), np.floor(h / self.spacing) + 1) * self.spacing
            for l, h in zip(lo, hi)
        ]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        return [tuple(float(c) for c in row) for row in mesh]


def lattice_cutoff(k: int, n, xi) -> np.ndarray:
    """chi_{k,n}(xi); raises if n is off the scale-k lattice."""
    if k < 0:
        raise ValueError("lattice cutoffs are defined for k >= 0")
    return LatticeCutoffFamily(k).narrow(n, xi)


def lattice_cutoff_wide(k: int, n, xi) -> np.ndarray:
    if k < 0:
        raise ValueError("lattice cutoffs are defined for k >= 0")
    return LatticeCutoffFamily(k).wide(n, xi)
