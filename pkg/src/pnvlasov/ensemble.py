"""Weighted phase-space particle sets.

Particles discretize a transported density: each carries its phase-space
volume ``vol`` and the density value ``f`` at its phase point, so the measure
it represents is ``w = f * vol``.  Pure Newtonian transport preserves both;
the wave-coupled solver evolves them separately (volumes contract, carried
values grow).  ``f2`` optionally co-transports the first-correction density
on the same characteristics.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bump import BumpSpec
from .errors import InvalidInputError

SNAPSHOT_HEADER = "# count time c"


@dataclass
class ParticleEnsemble:
    x: np.ndarray                      # (N, 3) positions
    p: np.ndarray                      # (N, 3) momenta per unit mass
    vol: np.ndarray                    # (N,) phase-space volumes
    f: np.ndarray                      # (N,) carried density values
    f2: np.ndarray | None = None       # (N,) co-transported correction
    time: float = 0.0
    bump: BumpSpec | None = None       # analytic initial density, if any
    x_spacing: float = 0.0             # sampling lattice pitch, if lattice-born

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=float).reshape(-1, 3)
        self.p = np.ascontiguousarray(self.p, dtype=float).reshape(-1, 3)
        self.vol = np.ascontiguousarray(self.vol, dtype=float).ravel()
        self.f = np.ascontiguousarray(self.f, dtype=float).ravel()
        if self.f2 is not None:
            self.f2 = np.ascontiguousarray(self.f2, dtype=float).ravel()
        n = self.x.shape[0]
        if not (self.p.shape[0] == self.vol.size == self.f.size == n):
            raise InvalidInputError("ensemble arrays must share their length")
        if np.any(self.vol < 0) or np.any(self.f < -1e-12):
            raise InvalidInputError("volumes and carried values must be >= 0")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.f * self.vol

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def momentum_total(self) -> np.ndarray:
        return self.weights @ self.p

    def support_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.x, axis=1), initial=0.0))

    def momentum_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.p, axis=1), initial=0.0))

    def with_phase(self, x, p, time) -> "ParticleEnsemble":
        return replace(self, x=x, p=p, time=time)

    def gamma(self, c: float) -> np.ndarray:
        return 1.0 / np.sqrt(1.0 + np.sum(self.p**2, axis=1) / c**2)

    # -- persistence --------------------------------------------------------

    def save(self, path, c: float = np.inf) -> None:
        """Columnar text snapshot: one particle per line, header with
        count, time and c."""
        cols = [self.x, self.p, self.weights[:, None], self.f[:, None]]
        if self.f2 is not None:
            cols.append(self.f2[:, None])
        data = np.hstack(cols) if len(self) else np.zeros((0, 8))
        with open(path, "w") as fh:
            fh.write(f"{SNAPSHOT_HEADER}\n{len(self)} {self.time!r} {c!r}\n")
            np.savetxt(fh, data, fmt="%.17g")

    @classmethod
    def load(cls, path) -> tuple["ParticleEnsemble", float]:
        """Read a snapshot; returns (ensemble, c)."""
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise InvalidInputError(f"{path}: missing snapshot header")
            count_s, time_s, c_s = fh.readline().split()
            n, time, c = int(count_s), float(time_s), float(c_s)
            data = np.loadtxt(fh, ndmin=2) if n else np.zeros((0, 8))
        if data.shape[0] != n:
            raise InvalidInputError(
                f"{path}: header count {n} != {data.shape[0]} rows")
        w, fvals = data[:, 6], data[:, 7]
        with np.errstate(invalid="ignore", divide="ignore"):
            vol = np.where(fvals > 0, w / np.where(fvals > 0, fvals, 1.0), 0.0)
        f2 = data[:, 8] if data.shape[1] > 8 else None
        ens = cls(data[:, 0:3], data[:, 3:6], vol, fvals, f2=f2, time=time)
        return ens, c


def phase_lattice(n_per_dim: int, space_radius: float, momentum_radius: float):
    """Stratified midpoint lattice covering the product-ball bounding box."""
    def axis(radius):
        return (np.arange(n_per_dim) + 0.5) / n_per_dim * 2 * radius - radius

    gx, gp = axis(space_radius), axis(momentum_radius)
    X = np.stack(np.meshgrid(gx, gx, gx, indexing="ij"), -1).reshape(-1, 3)
    P = np.stack(np.meshgrid(gp, gp, gp, indexing="ij"), -1).reshape(-1, 3)
    cell = (2 * space_radius / n_per_dim) ** 3 * (2 * momentum_radius / n_per_dim) ** 3
    return X, P, cell


def sample_initial_density(bump: BumpSpec, n_per_dim: int,
                           prune: float = 1e-12) -> ParticleEnsemble:
    """Deterministic stratified sampling of the initial bump.

    Particles sit at phase-space cell centers inside the support; weights are
    the density value times the cell volume; cells whose value falls below
    ``prune`` times the peak are dropped.
    """
    if n_per_dim < 1:
        raise InvalidInputError("n_per_dim must be >= 1")
    X, P, cell = phase_lattice(n_per_dim, bump.space_radius,
                               bump.momentum_radius)
    nx = X.shape[0]
    # product structure: values factorize over the two lattices
    bx = bump.space_profile(X)
    bp = bump.momentum_profile(P)
    vals = bump.amplitude * np.outer(bx, bp).ravel()
    keep = vals > prune * bump.amplitude
    if not np.any(keep):
        return ParticleEnsemble(np.zeros((0, 3)), np.zeros((0, 3)),
                                np.zeros(0), np.zeros(0), bump=bump)
    idx = np.nonzero(keep)[0]
    xs = X[idx // nx]
    ps = P[idx % nx]
    fs = vals[idx]
    return ParticleEnsemble(xs, ps, np.full(idx.size, cell), fs,
                            f2=np.zeros(idx.size), bump=bump,
                            x_spacing=2 * bump.space_radius / n_per_dim)
