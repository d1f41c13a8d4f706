"""Random checkerboard media on the unit interval.

The real line is cut into unit cells ``I_i = [p + i, p + i + 1)`` with a
uniform shift ``p`` in ``(-1, 0]``. Each cell carries i.i.d. parameters
``(A, mu, nu)`` drawn from a finite table. At microscale ``eps`` the cells
``eps * I_i``, ``i = 0..n`` with ``n = ceil(1/eps)``, cover ``[0, 1]``; the weight
of a cell is the length of its intersection with ``[0, 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constitutive import growth_constants


@dataclass(frozen=True)
class ParameterTable:
    """Finite value sets for the per-cell parameters, each with its own weights."""

    a_values: tuple[float, ...]
    mu_values: tuple[float, ...]
    nu_values: tuple[float, ...]
    a_weights: tuple[float, ...] | None = None
    mu_weights: tuple[float, ...] | None = None
    nu_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("a_values", "mu_values", "nu_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, vals)
        if min(self.a_values) <= 0:
            raise ValueError("a_values must be > 0")
        if min(self.mu_values) < 0:
            raise ValueError("mu_values must be >= 0")
        if min(self.nu_values) <= 0:
            raise ValueError("nu_values must be > 0")
        for name in ("a", "mu", "nu"):
            w = getattr(self, f"{name}_weights")
            n = len(getattr(self, f"{name}_values"))
            if w is None:
                continue
            w = tuple(float(x) for x in w)
            if len(w) != n:
                raise ValueError(f"{name}_weights has {len(w)} entries, expected {n}")
            if min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
                raise ValueError(f"{name}_weights must be nonnegative and sum to 1")
            object.__setattr__(self, f"{name}_weights", w)

    @classmethod
    def standard(cls) -> "ParameterTable":
        return cls((1.0, 3.0), (0.0, 0.4, 0.7), (0.05, 0.1))

    def probs(self, name: str) -> np.ndarray:
        w = getattr(self, f"{name}_weights")
        n = len(getattr(self, f"{name}_values"))
        return np.full(n, 1.0 / n) if w is None else np.asarray(w)

    def with_mu(self, mu_values: Sequence[float]) -> "ParameterTable":
        return ParameterTable(self.a_values, tuple(mu_values), self.nu_values,
                              self.a_weights, None, self.nu_weights)

    def atoms(self):
        """Enumerate the joint law exactly.

        Returns arrays ``(A, mu, nu, prob)`` over all value combinations with
        nonzero probability.
        """
        pa, pm, pn = self.probs("a"), self.probs("mu"), self.probs("nu")
        rows = []
        for i, a in enumerate(self.a_values):
            for j, m in enumerate(self.mu_values):
                for k, v in enumerate(self.nu_values):
                    pr = pa[i] * pm[j] * pn[k]
                    if pr > 0:
                        rows.append((a, m, v, pr))
        arr = np.array(rows, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy()

    def mean(self, name: str) -> float:
        return float(np.dot(self.probs(name), getattr(self, f"{name}_values")))

    def constants(self) -> tuple[float, float]:
        """``(c, C)`` strong-convexity and growth constants of this table."""
        return growth_constants(self.mu_values, self.nu_values)

    @property
    def is_viscous(self) -> bool:
        return max(self.mu_values) == 0.0


@dataclass(frozen=True)
class Seed:
    value: int
    realization_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.value) & (2**64 - 1), int(self.realization_index)])
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class Environment:
    """One realization of the medium: per-cell weights and parameters.

    Arrays are read-only after construction.
    """

    epsilon: float
    shift: float
    weights: np.ndarray
    A: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    seed: Seed | None = field(default=None)

    def __post_init__(self):
        for name in ("weights", "A", "mu", "nu"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.weights)
        if not (len(self.A) == len(self.mu) == len(self.nu) == n):
            raise ValueError("cell arrays must have equal length")

    @property
    def n_cells(self) -> int:
        return len(self.weights)

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Clipped ``[left, right]`` of each cell in ``[0, 1]``."""
        return cell_geometry(self.epsilon, self.shift)[:2]

    def cell_centers(self) -> np.ndarray:
        lo, hi = self.cell_bounds()
        return 0.5 * (lo + hi)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (self.epsilon == other.epsilon and self.shift == other.shift
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("weights", "A", "mu", "nu")))

    # plain-text record format -------------------------------------------

    def to_text(self) -> str:
        lines = [
            f"# epsilon {float(self.epsilon)!r}",
            f"# shift {float(self.shift)!r}",
            f"# seed {self.seed.value if self.seed else 'none'} "
            f"{self.seed.realization_index if self.seed else 0}",
            "# index weight A mu nu",
        ]
        for i in range(self.n_cells):
            vals = (float(a[i]) for a in (self.weights, self.A, self.mu, self.nu))
            lines.append(f"{i} " + " ".join(repr(v) for v in vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Environment":
        header, rows = {}, []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] in ("epsilon", "shift", "seed"):
                    header[parts[0]] = parts[1:]
                continue
            rows.append([float(x) for x in line.split()])
        if "epsilon" not in header or "shift" not in header:
            raise ValueError("environment record lacks epsilon/shift header")
        arr = np.array(rows, dtype=float).reshape(-1, 5)
        if not np.array_equal(arr[:, 0], np.arange(len(arr))):
            raise ValueError("cell indices must be 0..n in order")
        seed = None
        if "seed" in header and header["seed"][0] != "none":
            seed = Seed(int(header["seed"][0]), int(header["seed"][1]))
        return cls(float(header["epsilon"][0]), float(header["shift"][0]),
                   arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], seed)


def _check_eps(epsilon):
    if not (0.0 < epsilon <= 1.0):
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")


def cell_geometry(epsilon: float, shift: float):
    """Clipped cell bounds and weights for ``n + 1`` cells, ``n = ceil(1/eps)``."""
    _check_eps(epsilon)
    if not (-1.0 < shift <= 0.0):
        raise ValueError(f"shift must lie in (-1, 0], got {shift}")
    # guard ceil against 1/eps landing a hair above an integer
    n = math.ceil(1.0 / epsilon - 1e-12)
    edges = np.clip(epsilon * (shift + np.arange(n + 2, dtype=float)), 0.0, 1.0)
    lo, hi = edges[:-1], edges[1:]
    w = hi - lo
    return lo, hi, w


def sample_environment(table: ParameterTable, epsilon: float, seed: Seed,
                       shift: float | None = None) -> Environment:
    """Draw a realization; pass ``shift`` to pin the offset (regression mode)."""
    _check_eps(epsilon)
    rng = seed.generator()
    u = rng.random()
    if shift is None:
        shift = -u
    _, _, w = cell_geometry(epsilon, shift)
    ncell = len(w)
    a = rng.choice(np.asarray(table.a_values), size=ncell, p=table.probs("a"))
    mu = rng.choice(np.asarray(table.mu_values), size=ncell, p=table.probs("mu"))
    nu = rng.choice(np.asarray(table.nu_values), size=ncell, p=table.probs("nu"))
    return Environment(float(epsilon), float(shift), w, a, mu, nu, seed)


def periodic_environment(cell_profile: Sequence[tuple[float, float, float]],
                         epsilon: float, shift: float) -> Environment:
    """Deterministic periodic medium repeating ``cell_profile`` of ``(A, mu, nu)``.

    Cell ``i`` takes entry ``i mod len(profile)``.
    """
    if len(cell_profile) == 0:
        raise ValueError("cell profile must be nonempty")
    _, _, w = cell_geometry(epsilon, shift)
    prof = np.asarray(cell_profile, dtype=float).reshape(-1, 3)
    idx = np.arange(len(w)) % len(prof)
    return Environment(float(epsilon), float(shift), w,
                       prof[idx, 0], prof[idx, 1], prof[idx, 2])
