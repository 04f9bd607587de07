"""Cubes, equidistributed ball arrangements and the auxiliary regions in R^{d+1}."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._trig import BCS

R3_FACTOR = 9.0 * math.e


def _is_integer(x, tol=1e-9):
    return abs(x - round(x)) <= tol * max(1.0, abs(x))


@dataclass(frozen=True)
class Domain:
    """The open cube ``(-L/2, L/2)^d`` with a boundary-condition tag."""

    d: int
    L: float
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not self.L > 0:
            raise ValueError(f"side length must be positive, got {self.L}")
        if self.bc not in BCS:
            raise ValueError(f"boundary condition must be one of {BCS}, got {self.bc!r}")

    @property
    def volume(self):
        return self.L**self.d

    def contains(self, x):
        """Membership in the open cube; ``x`` has shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        return np.all(np.abs(x) < self.L / 2.0, axis=-1)

    def scaled(self, G):
        return Domain(self.d, self.L / G, self.bc)


@dataclass(frozen=True, eq=False)
class EquidistributedSequence:
    """One ball ``B(z_j, delta)`` inside each cell ``Λ_G + j`` of the cube.

    ``cells`` holds the cell centres ``j`` and ``points`` the ball centres
    ``z_j``, both of shape ``(n, d)`` in lexicographic cell order.
    """

    domain: Domain
    G: float
    delta: float
    cells: np.ndarray
    points: np.ndarray
    mode: str = "centered"
    seed: int | None = None

    def __post_init__(self):
        slack = self.G / 2.0 - self.delta
        dist = np.linalg.norm(self.points - self.cells, axis=1)
        if not 0 < self.delta < self.G / 2.0:
            raise ValueError(f"need 0 < delta < G/2, got delta={self.delta}, G={self.G}")
        if np.any(dist > slack + 1e-12):
            raise ValueError("a ball leaves its cell")

    def __len__(self):
        return len(self.points)

    @property
    def cells_per_side(self):
        return int(round(self.domain.L / self.G))

    def contains(self, x):
        """Membership in ``W_δ(L)``: union of open balls intersected with the open cube."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.domain.d)
        d2 = ((flat[:, None, :] - self.points[None, :, :]) ** 2).sum(-1)
        inside = (d2 < self.delta**2).any(axis=1) & self.domain.contains(flat)
        return inside.reshape(x.shape[:-1])

    def to_dict(self):
        return {
            "d": self.domain.d,
            "L": self.domain.L,
            "bc": self.domain.bc,
            "G": self.G,
            "delta": self.delta,
            "mode": self.mode,
            "seed": self.seed,
            "points": [[list(map(float, j)), list(map(float, z))] for j, z in zip(self.cells, self.points)],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        domain = Domain(int(data["d"]), float(data["L"]), data.get("bc", "dirichlet"))
        cells = np.array([p[0] for p in data["points"]], dtype=float).reshape(-1, domain.d)
        points = np.array([p[1] for p in data["points"]], dtype=float).reshape(-1, domain.d)
        return cls(domain, float(data["G"]), float(data["delta"]), cells, points,
                   data.get("mode", "centered"), data.get("seed"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def cell_centers(domain, G):
    """Centres of the ``(L/G)^d`` cells of side ``G`` tiling the cube, lexicographic."""
    ratio = domain.L / G
    if not _is_integer(ratio) or round(ratio) < 1:
        raise ValueError(f"L/G must be a positive integer, got {ratio}")
    m = int(round(ratio))
    axis = -domain.L / 2.0 + G * (np.arange(m) + 0.5)
    grids = np.meshgrid(*([axis] * domain.d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def make_equidistributed(domain, G, delta, mode="centered", seed=None):
    """Build a ``(G, delta)``-equidistributed sequence on ``domain``.

    ``mode="centered"`` puts every ball at its cell centre; ``mode="random"``
    draws each centre uniformly from the Euclidean ball of radius
    ``G/2 - delta`` around the cell centre.
    """
    if not 0 < delta < G / 2.0:
        raise ValueError(f"need 0 < delta < G/2, got delta={delta}, G={G}")
    cells = cell_centers(domain, G)
    if mode == "centered":
        points = cells.copy()
    elif mode == "random":
        rng = np.random.default_rng(seed)
        rho = G / 2.0 - delta
        if domain.d == 1:
            offs = rng.uniform(-rho, rho, size=(len(cells), 1))
        else:
            r = rho * np.sqrt(rng.uniform(size=len(cells)))
            th = rng.uniform(0.0, 2.0 * math.pi, size=len(cells))
            offs = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
        points = cells + offs
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EquidistributedSequence(domain, float(G), float(delta), cells, points, mode, seed)


def in_w_delta(x, seq, domain=None):
    """True where ``x`` lies in some open ball ``B(z_j, delta)`` inside the cube."""
    return seq.contains(x) & (domain or seq.domain).contains(x)


def ball_measure(seq, domain=None):
    """Lebesgue measure of ``W_δ(L)`` (balls never cross the cube boundary)."""
    domain = domain or seq.domain
    count = len(seq)
    if domain.d == 1:
        return count * 2.0 * seq.delta
    return count * math.pi * seq.delta**2


@dataclass(frozen=True, eq=False)
class Region:
    """A subset of ``R^{d+1}`` given by an exact membership predicate.

    Build instances with the class-method constructors; ``kind`` is one of
    ``X1, XtildeR3, S1, S3, U1, U3, Box``.
    """

    kind: str
    d: int
    L: float = 1.0
    delta: float = 0.0
    anchor: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    seq: EquidistributedSequence | None = field(default=None, repr=False)

    @classmethod
    def x1(cls, domain):
        return cls.box([-domain.L / 2] * domain.d + [-1.0], [domain.L / 2] * domain.d + [1.0], kind="X1")

    @classmethod
    def xtilde_r3(cls, domain):
        r3 = R3_FACTOR * math.sqrt(domain.d)
        half = domain.L / 2.0 + r3
        return cls.box([-half] * domain.d + [-r3], [half] * domain.d + [r3], kind="XtildeR3")

    @classmethod
    def box(cls, lo, hi, kind="Box"):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ValueError("box corners must satisfy lo <= hi componentwise")
        return cls(kind, len(lo) - 1, lo=lo, hi=hi)

    @classmethod
    def s(cls, i, z, delta):
        if i not in (1, 3):
            raise ValueError("S_i is defined for i in {1, 3}")
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return cls(f"S{i}", len(z), delta=float(delta), anchor=z)

    @classmethod
    def u(cls, i, seq):
        if i not in (1, 3):
            raise ValueError("U_i is defined for i in {1, 3}")
        if abs(seq.G - 1.0) > 1e-12:
            raise ValueError("U_i(L) is defined for (1, delta)-equidistributed sequences")
        return cls(f"U{i}", seq.domain.d, L=seq.domain.L, delta=seq.delta, seq=seq)

    @property
    def is_box(self):
        return self.lo is not None

    def s_level(self):
        return self.delta**2 / (16.0 if self.kind in ("S1", "U1") else 4.0)

    def pieces(self):
        """Constituent ``S_i(z)`` sets of a union region (or ``[self]``)."""
        if self.kind not in ("U1", "U3"):
            return [self]
        i = int(self.kind[1])
        keep = [z for j, z in zip(self.seq.cells, self.seq.points)
                if np.all(np.abs(j - np.round(j)) < 1e-9) and np.all(np.abs(j) < self.L / 2.0)]
        return [Region.s(i, z, self.delta) for z in keep]

    def bounding_box(self):
        """Axis-aligned box containing the region (tight for S_i)."""
        if self.is_box:
            return self.lo, self.hi
        if self.kind in ("S1", "S3"):
            c = self.s_level()
            rho = 2.0 * math.sqrt(c)
            tmax = 1.0 - math.sqrt(1.0 - 2.0 * c)
            return (np.append(self.anchor - rho, 0.0), np.append(self.anchor + rho, tmax))
        boxes = [p.bounding_box() for p in self.pieces()]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def contains(self, x):
        """Exact membership for points ``x`` of shape ``(..., d+1)``."""
        x = np.asarray(x, dtype=float)
        if self.is_box:
            return np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        if self.kind in ("S1", "S3"):
            t = x[..., -1]
            r2 = ((x[..., :-1] - self.anchor) ** 2).sum(-1)
            lhs = -t + t**2 / 2.0 - r2 / 4.0
            return (lhs > -self.s_level()) & (t >= 0.0) & (t <= 1.0)
        out = np.zeros(x.shape[:-1], dtype=bool)
        for piece in self.pieces():
            out |= piece.contains(x)
        return out


def region_membership(x, region):
    return region.contains(x)
