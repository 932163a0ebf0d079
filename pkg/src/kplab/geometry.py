"""Group structure, dilations and distances on kinetic phase space.

A state is a triple (X, Y, t): velocity X in R^m, position Y in R^m, time t.
The (non-Euclidean) translation group and the anisotropic dilations below are
the symmetries of the degenerate drift-diffusion operators in
:mod:`kplab.operators`; everything else in the package is built on them.

All operations broadcast over leading batch axes: X and Y carry shape
(..., m) and t carries shape (...).  Vector norms are Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GroupPoint:
    """A point (X, Y, t) of the homogeneous group, possibly batched."""

    X: np.ndarray
    Y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        X = np.atleast_1d(np.asarray(self.X, dtype=float))
        Y = np.atleast_1d(np.asarray(self.Y, dtype=float))
        t = np.asarray(self.t, dtype=float)
        if X.shape != Y.shape:
            raise ValueError(f"X and Y shapes differ: {X.shape} vs {Y.shape}")
        if X.shape[:-1] != t.shape:
            raise ValueError(
                f"batch shape mismatch: X {X.shape} vs t {t.shape}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y)) and np.all(np.isfinite(t))):
            raise ValueError("GroupPoint components must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "t", t)

    @property
    def m(self) -> int:
        return self.X.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.t.shape


def point(X, Y, t) -> GroupPoint:
    """Convenience constructor accepting scalars and lists."""
    return GroupPoint(np.asarray(X, dtype=float), np.asarray(Y, dtype=float), np.asarray(t, dtype=float))


def identity(m: int) -> GroupPoint:
    return GroupPoint(np.zeros(m), np.zeros(m), np.asarray(0.0))


def _check_dims(a: GroupPoint, b: GroupPoint):
    if a.m != b.m:
        raise ValueError(f"dimension mismatch: {a.m} vs {b.m}")


def compose(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    """Group product a o b = (a.X + b.X, a.Y + b.Y - b.t * a.X, a.t + b.t)."""
    _check_dims(a, b)
    bt = np.asarray(b.t)[..., None]
    return GroupPoint(a.X + b.X, a.Y + b.Y - bt * a.X, a.t + b.t)


def inverse(g: GroupPoint) -> GroupPoint:
    """Group inverse (-X, -Y - t X, -t)."""
    t = np.asarray(g.t)[..., None]
    return GroupPoint(-g.X, -g.Y - t * g.X, -g.t)


def dilate(r: float, g: GroupPoint) -> GroupPoint:
    """Anisotropic dilation (r X, r^3 Y, r^2 t); the operators scale with degree two."""
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    return GroupPoint(r * g.X, r**3 * g.Y, r**2 * g.t)


def quasi_norm(g: GroupPoint) -> np.ndarray:
    """|X| + |Y|^(1/3) + |t|^(1/2); exactly 1-homogeneous under dilate."""
    nx = np.linalg.norm(g.X, axis=-1)
    ny = np.linalg.norm(g.Y, axis=-1)
    return nx + np.cbrt(ny) + np.sqrt(np.abs(g.t))


def quasi_distance(a: GroupPoint, b: GroupPoint) -> np.ndarray:
    """Symmetrized group quasi-distance (satisfies only a pseudo triangle inequality)."""
    _check_dims(a, b)
    return 0.5 * (quasi_norm(compose(inverse(b), a)) + quasi_norm(compose(inverse(a), b)))


def boundary_distance(a: GroupPoint, b: GroupPoint) -> np.ndarray:
    """|X - Xh| + |Y - Yh - (th - t) Xh|^(1/3) + |th - t|^(1/2), hatted point = b.

    Not symmetric in (a, b).  This is the modulus in which boundary data is
    Lipschitz for the game-based continuity estimates.
    """
    _check_dims(a, b)
    dt = np.asarray(b.t - a.t)
    ny = np.linalg.norm(a.Y - b.Y - dt[..., None] * b.X, axis=-1)
    return np.linalg.norm(a.X - b.X, axis=-1) + np.cbrt(ny) + np.sqrt(np.abs(dt))


def extension_metric(a: GroupPoint, b: GroupPoint) -> np.ndarray:
    """|X - Xt| + |Y - Yt|^(1/2) + |t - tt|^(1/2); a true metric.

    The exponent on the Y block is 1/2 (not 1/3), which is what makes the
    triangle inequality exact; used for Lipschitz extension of boundary data.
    """
    _check_dims(a, b)
    return (
        np.linalg.norm(a.X - b.X, axis=-1)
        + np.sqrt(np.linalg.norm(a.Y - b.Y, axis=-1))
        + np.sqrt(np.abs(a.t - b.t))
    )


def allclose(a: GroupPoint, b: GroupPoint, atol: float = 1e-12, rtol: float = 1e-12) -> bool:
    return (
        np.allclose(a.X, b.X, atol=atol, rtol=rtol)
        and np.allclose(a.Y, b.Y, atol=atol, rtol=rtol)
        and np.allclose(a.t, b.t, atol=atol, rtol=rtol)
    )
