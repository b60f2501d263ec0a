"""Design points and the partitioned design space."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ARCHS = ("beta_vae", "reconstruction")


@dataclass(frozen=True)
class DesignPoint:
    """Structural hyperparameters and thresholds of both components.

    The OOD fields are ``None`` for the EC-only baseline.
    """

    ec_size: int
    ec_threshold: float = 0.5
    ood_size: int | None = None
    ood_threshold: float | None = 0.5
    ood_arch: str | None = None

    def __post_init__(self):
        if self.ec_size <= 0:
            raise ValueError(f"ec_size must be positive, got {self.ec_size}")
        if self.ood_size is not None and self.ood_size <= 0:
            raise ValueError(f"ood_size must be positive, got {self.ood_size}")
        for name in ("ec_threshold", "ood_threshold"):
            v = getattr(self, name)
            if v is not None and not math.isnan(v) and not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.ood_arch is not None and self.ood_arch not in ARCHS:
            raise ValueError(f"unknown OOD architecture {self.ood_arch!r}")

    @property
    def has_ood(self):
        return self.ood_size is not None

    def with_thresholds(self, tau_ec, tau_ood):
        return DesignPoint(self.ec_size, tau_ec, self.ood_size, tau_ood, self.ood_arch)


def _grid_shape(n: int) -> tuple[int, int]:
    """Split ``n`` tiles into (ec, ood) counts, as square as possible."""
    best = (n, 1)
    for k in range(1, int(math.isqrt(n)) + 1):
        if n % k == 0:
            best = (n // k, k)
    return best


@dataclass(frozen=True)
class Partition:
    index: int
    ec_bounds: tuple[float, float]
    ood_bounds: tuple[float, float]
    ec_last: bool
    ood_last: bool

    def integer_range(self, axis: str) -> tuple[int, int]:
        """Inclusive integer sizes owned by this tile (tiles are half-open)."""
        lo, hi = self.ec_bounds if axis == "ec" else self.ood_bounds
        last = self.ec_last if axis == "ec" else self.ood_last
        top = math.floor(hi) if last else math.ceil(hi) - 1
        return math.ceil(lo), top

    def contains(self, ec_size, ood_size) -> bool:
        def inside(v, bounds, last):
            lo, hi = bounds
            return lo <= v <= hi if last else lo <= v < hi
        return (inside(ec_size, self.ec_bounds, self.ec_last)
                and inside(ood_size, self.ood_bounds, self.ood_last))

    def normalize(self, ec_size, ood_size) -> np.ndarray:
        (e0, e1), (o0, o1) = self.ec_bounds, self.ood_bounds
        return np.array([(ec_size - e0) / (e1 - e0), (ood_size - o0) / (o1 - o0)], dtype=float)

    def denormalize(self, x) -> tuple[float, float]:
        (e0, e1), (o0, o1) = self.ec_bounds, self.ood_bounds
        return e0 + x[0] * (e1 - e0), o0 + x[1] * (o1 - o0)

    def round_point(self, ec_size, ood_size) -> tuple[int, int]:
        lo, hi = self.integer_range("ec")
        ec = min(max(int(round(ec_size)), lo), hi)
        lo, hi = self.integer_range("ood")
        ood = min(max(int(round(ood_size)), lo), hi)
        return ec, ood


@dataclass(frozen=True)
class DesignSpace:
    """Numeric box of input sizes, categorical OOD architectures, equal tiles.

    Defaults: EC 64-480 px, OOD 8-224 px, four tiles split at 272 / 116.
    """

    ec_size_bounds: tuple[float, float] = (64, 480)
    ood_size_bounds: tuple[float, float] = (8, 224)
    arch_levels: tuple[str, ...] = ARCHS
    n_partitions: int = 4
    partitions: tuple[Partition, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("ec_size_bounds", "ood_size_bounds"):
            lo, hi = getattr(self, name)
            if not 0 < lo < hi:
                raise ValueError(f"{name} must satisfy 0 < lo < hi, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        if self.n_partitions < 1:
            raise ValueError("n_partitions must be at least 1")
        if not self.arch_levels or any(a not in ARCHS for a in self.arch_levels):
            raise ValueError(f"arch_levels must be a nonempty subset of {ARCHS}")
        object.__setattr__(self, "arch_levels", tuple(self.arch_levels))
        n_ec, n_ood = _grid_shape(self.n_partitions)
        ec_edges = np.linspace(*self.ec_size_bounds, n_ec + 1)
        ood_edges = np.linspace(*self.ood_size_bounds, n_ood + 1)
        tiles = []
        for j in range(n_ood):
            for i in range(n_ec):
                tiles.append(Partition(
                    len(tiles),
                    (float(ec_edges[i]), float(ec_edges[i + 1])),
                    (float(ood_edges[j]), float(ood_edges[j + 1])),
                    i == n_ec - 1, j == n_ood - 1))
        object.__setattr__(self, "partitions", tuple(tiles))

    def partition_of(self, ec_size, ood_size) -> int:
        for p in self.partitions:
            if p.contains(ec_size, ood_size):
                return p.index
        raise ValueError(f"({ec_size}, {ood_size}) lies outside the design space")

    def contains(self, dp: DesignPoint) -> bool:
        lo, hi = self.ec_size_bounds
        if not lo <= dp.ec_size <= hi:
            return False
        if dp.has_ood:
            lo, hi = self.ood_size_bounds
            return lo <= dp.ood_size <= hi and dp.ood_arch in self.arch_levels
        return True

    def to_dict(self):
        return {"ec_size": list(self.ec_size_bounds), "ood_size": list(self.ood_size_bounds),
                "archs": list(self.arch_levels), "n_partitions": self.n_partitions}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d.get("ec_size", (64, 480))), tuple(d.get("ood_size", (8, 224))),
                   tuple(d.get("archs", ARCHS)), int(d.get("n_partitions", 4)))
