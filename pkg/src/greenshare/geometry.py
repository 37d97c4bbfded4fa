"""Spatial model: BS sites, nearest-active-BS association and quadrature.

Every integral over the service area is a midpoint-rule sum over a fixed,
cell-centred lattice. User mass per Voronoi cell and the path-loss moment
E[r^eta] are both bincounts over the lattice, keyed by the serving BS.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CEIL_TOL = 1e-9
EXPECTATION_MODES = ("conditional", "literal")


class DegenerateCellError(ValueError):
    """Raised when a conditional expectation is requested over a massless cell."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates: ({self.x}, {self.y})")


@dataclass(frozen=True)
class AreaSpec:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("area width and height must be positive")

    def contains(self, p: Point) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height


@dataclass(frozen=True)
class UserDistribution:
    kind: str = "uniform"
    mean: Point | None = None
    variance: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.mean is None or self.variance is None or not self.variance > 0:
                raise ValueError("gaussian distribution needs a mean and a positive variance")

    def pdf(self, x: np.ndarray, y: np.ndarray, area: AreaSpec) -> np.ndarray:
        """Density in 1/km^2. The uniform density is spread over ``area``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "uniform":
            inside = (x >= 0) & (x <= area.width) & (y >= 0) & (y <= area.height)
            return np.where(inside, 1.0 / (area.width * area.height), 0.0)
        v = self.variance
        r2 = (x - self.mean.x) ** 2 + (y - self.mean.y) ** 2
        return np.exp(-r2 / (2.0 * v)) / (2.0 * math.pi * v)

    def sample(self, n: int, area: AreaSpec, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` points from the unrestricted distribution (shape (n, 2))."""
        if self.kind == "uniform":
            return np.column_stack([rng.uniform(0, area.width, n), rng.uniform(0, area.height, n)])
        s = math.sqrt(self.variance)
        return np.column_stack([rng.normal(self.mean.x, s, n), rng.normal(self.mean.y, s, n)])


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    area: AreaSpec
    resolution: float
    x: np.ndarray
    y: np.ndarray
    dx: float
    dy: float

    @property
    def size(self) -> int:
        return self.x.size

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def weights(self, dist: UserDistribution) -> np.ndarray:
        """Probability mass carried by each sample point (pdf times cell area)."""
        return dist.pdf(self.x, self.y, self.area) * self.cell_area


def build_grid(area: AreaSpec, resolution: float = 50) -> QuadratureGrid:
    """Cell-centred lattice with ``ceil(width*res) x ceil(height*res)`` points."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    nx = max(1, math.ceil(area.width * resolution - CEIL_TOL))
    ny = max(1, math.ceil(area.height * resolution - CEIL_TOL))
    dx = area.width / nx
    dy = area.height / ny
    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dy
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return QuadratureGrid(area, float(resolution), X.ravel(), Y.ravel(), dx, dy)


def ceil_count(n_users: float, mass: np.ndarray) -> np.ndarray:
    """Per-cell head count ``ceil(N * mass)``, forgiving float noise just above an integer."""
    raw = np.asarray(n_users * mass, dtype=float)
    return np.where(raw > 0, np.ceil(raw - CEIL_TOL), 0.0).astype(np.int64)


@dataclass(frozen=True)
class UserClass:
    """Users of one (operator, service) pair."""

    operator: int
    total: float
    dist: UserDistribution


@dataclass(eq=False)
class Assignment:
    """Association of users to the active BSs.

    Arrays indexed ``[bs, class]`` are zero for inactive BSs. ``roamed[t, l]``
    counts users of operator ``t`` sitting in cells owned by operator ``l``;
    the diagonal is zero.
    """

    labels: np.ndarray
    active: np.ndarray
    owners: np.ndarray
    class_ops: np.ndarray
    mass: np.ndarray
    counts: np.ndarray
    path_loss: np.ndarray
    roamed: np.ndarray
    n_ops: int

    @property
    def users_per_bs(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def served_per_operator(self) -> np.ndarray:
        out = np.zeros(self.n_ops, dtype=np.int64)
        np.add.at(out, self.class_ops, self.counts.sum(axis=0))
        return out

    def cell(self, bs: int) -> np.ndarray:
        return np.flatnonzero(self.labels == bs)

    def same_as(self, other: "Assignment") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("labels", "active", "mass", "counts", "path_loss", "roamed")
        )


def _nearest(d2: np.ndarray, active_idx: np.ndarray, workers: int | None) -> np.ndarray:
    def chunk(sl):
        return active_idx[np.argmin(d2[sl][:, active_idx], axis=1)]

    n = d2.shape[0]
    if not workers or workers <= 1 or n < 2 * workers:
        return chunk(slice(0, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    slices = [slice(bounds[k], bounds[k + 1]) for k in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(chunk, slices))
    return np.concatenate(parts)


class Coverage:
    """Precomputed geometry for a fixed set of sites, user classes and lattice.

    Re-associating users for a new activation vector only costs one masked
    argmin over the lattice plus a few bincounts.
    """

    def __init__(
        self,
        sites: Sequence[tuple[int, Point]],
        grid: QuadratureGrid,
        classes: Sequence[UserClass],
        eta: float,
        mode: str = "conditional",
        n_ops: int | None = None,
    ):
        if grid.size == 0:
            raise ValueError("empty quadrature grid")
        if mode not in EXPECTATION_MODES:
            raise ValueError(f"unknown expectation mode {mode!r}")
        if not eta > 0:
            raise ValueError("path-loss exponent must be positive")
        self.grid = grid
        self.eta = float(eta)
        self.mode = mode
        self.owners = np.array([op for op, _ in sites], dtype=np.int64)
        self.sx = np.array([p.x for _, p in sites], dtype=float)
        self.sy = np.array([p.y for _, p in sites], dtype=float)
        self.classes = list(classes)
        self.class_ops = np.array([c.operator for c in classes], dtype=np.int64)
        self.totals = np.array([c.total for c in classes], dtype=float)
        self.n_ops = int(n_ops if n_ops is not None else max(
            [*self.owners.tolist(), *self.class_ops.tolist(), -1]) + 1)
        self.d2 = (grid.x[:, None] - self.sx[None, :]) ** 2 + (grid.y[:, None] - self.sy[None, :]) ** 2
        self.weights = np.column_stack([grid.weights(c.dist) for c in classes]) if classes else np.zeros((grid.size, 0))
        self._reta: np.ndarray | None = None

    @property
    def n_bs(self) -> int:
        return self.owners.size

    @property
    def r_eta(self) -> np.ndarray:
        if self._reta is None:
            self._reta = self.d2 ** (self.eta / 2.0)
        return self._reta

    def assign(self, active, workers: int | None = None, base: Assignment | None = None) -> Assignment:
        """Associate users with the active BSs.

        ``base`` may be an assignment whose active set contains ``active``;
        then only points served by a newly switched-off BS are re-scanned,
        which gives the same labels as a full scan.
        """
        active = np.asarray(active, dtype=bool)
        if active.size != self.n_bs:
            raise ValueError(f"activation vector has {active.size} entries, expected {self.n_bs}")
        active_idx = np.flatnonzero(active)
        if active_idx.size == 0:
            raise ValueError("no active BS")
        if base is not None and not np.any(active & ~base.active):
            labels = base.labels.copy()
            stale = np.flatnonzero(~active[labels])
            if stale.size:
                sub = self.d2[stale][:, active_idx]
                labels[stale] = active_idx[np.argmin(sub, axis=1)]
        else:
            labels = _nearest(self.d2, active_idx, workers)
        n_bs, n_cls = self.n_bs, len(self.classes)
        mass = np.zeros((n_bs, n_cls))
        moment = np.zeros((n_bs, n_cls))
        reta_own = self.r_eta[np.arange(labels.size), labels]
        for c in range(n_cls):
            w = self.weights[:, c]
            mass[:, c] = np.bincount(labels, weights=w, minlength=n_bs)
            moment[:, c] = np.bincount(labels, weights=w * reta_own, minlength=n_bs)
        counts = np.zeros((n_bs, n_cls), dtype=np.int64)
        for c in range(n_cls):
            counts[:, c] = ceil_count(self.totals[c], mass[:, c])
        if self.mode == "conditional":
            with np.errstate(divide="ignore", invalid="ignore"):
                path_loss = np.where(mass > 0, moment / np.where(mass > 0, mass, 1.0), 0.0)
        else:
            path_loss = moment
        roamed = np.zeros((self.n_ops, self.n_ops), dtype=np.int64)
        for c in range(n_cls):
            np.add.at(roamed, (self.class_ops[c], self.owners), counts[:, c])
        np.fill_diagonal(roamed, 0)
        return Assignment(labels, active.copy(), self.owners, self.class_ops, mass, counts, path_loss, roamed, self.n_ops)


def assign_users(
    bs_sites: Sequence[tuple[int, Point]],
    active,
    grid: QuadratureGrid,
    classes: Sequence[UserClass],
    eta: float = 3.76,
    mode: str = "conditional",
    workers: int | None = None,
) -> Assignment:
    """One-off association; see :class:`Coverage` for repeated use."""
    return Coverage(bs_sites, grid, classes, eta, mode).assign(active, workers=workers)


def expected_path_loss_factor(
    cell: np.ndarray,
    bs_site: Point,
    dist: UserDistribution,
    eta: float,
    grid: QuadratureGrid,
    mode: str = "conditional",
) -> float:
    """E[r^eta] (km^eta) over the lattice points listed in ``cell``.

    ``literal`` returns the raw integral of r^eta * pdf over the cell;
    ``conditional`` divides it by the cell's probability mass.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if mode not in EXPECTATION_MODES:
        raise ValueError(f"unknown expectation mode {mode!r}")
    cell = np.asarray(cell)
    if cell.dtype == bool:
        cell = np.flatnonzero(cell)
    if cell.size == 0:
        raise ValueError("empty cell")
    x, y = grid.x[cell], grid.y[cell]
    w = dist.pdf(x, y, grid.area) * grid.cell_area
    r_eta = ((x - bs_site.x) ** 2 + (y - bs_site.y) ** 2) ** (eta / 2.0)
    integral = float(np.sum(w * r_eta))
    if mode == "literal":
        return integral
    m = float(np.sum(w))
    if m <= 0:
        raise DegenerateCellError("cell carries no probability mass")
    return integral / m


def grid_sites(area: AreaSpec, rows: int, cols: int) -> list[Point]:
    """Regular ``rows x cols`` lattice with half-spacing margins."""
    if rows < 1 or cols < 1:
        raise ValueError("grid generator needs rows, cols >= 1")
    dx = area.width / cols
    dy = area.height / rows
    return [Point((c + 0.5) * dx, (r + 0.5) * dy) for r in range(rows) for c in range(cols)]
