"""Unconstrained test functions and a shift/rotation wrapper.

All base functions take ``x`` of shape ``(..., dim)`` and reduce over the
last axis, so a whole population can be scored at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import Bounds, DimensionError, FormatError, ObjectiveFn, ProtozoaError


class TransformError(ProtozoaError, ValueError):
    pass


def _arr(x, min_dim: int = 1) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < min_dim:
        raise DimensionError(f"need at least {min_dim} variables")
    return x


def sphere(x):
    x = _arr(x)
    return np.sum(x * x, axis=-1)


def zakharov(x):
    x = _arr(x)
    d = np.arange(1, x.shape[-1] + 1)
    s = np.sum(0.5 * d * x, axis=-1)
    return np.sum(x * x, axis=-1) + s**2 + s**4


def rosenbrock(x):
    x = _arr(x, 2)
    a, b = x[..., :-1], x[..., 1:]
    return np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2, axis=-1)


def expanded_schaffer_f6(x):
    """Sum of the Schaffer F6 kernel over consecutive pairs, wrapping last to first."""
    x = _arr(x, 2)
    y = np.roll(x, -1, axis=-1)
    r2 = x * x + y * y
    return np.sum(0.5 + (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1.0 + 0.001 * r2) ** 2, axis=-1)


def rastrigin(x):
    x = _arr(x)
    return np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x) + 10.0, axis=-1)


def rastrigin_noncont(x):
    """Rastrigin on coordinates snapped to halves once they leave ``[-0.5, 0.5]``."""
    x = _arr(x)
    y = np.where(np.abs(x) <= 0.5, x, np.round(2.0 * x) / 2.0)
    return rastrigin(y)


def levy(x):
    x = _arr(x)
    w = 1.0 + (x - 1.0) / 4.0
    head = np.sin(np.pi * w[..., 0]) ** 2
    mid = np.sum((w[..., :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[..., :-1] + 1.0) ** 2),
                 axis=-1)
    tail = (w[..., -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[..., -1]) ** 2)
    return head + mid + tail


def ackley(x):
    x = _arr(x)
    n = x.shape[-1]
    a = -20.0 * np.exp(-0.2 * np.sqrt(np.sum(x * x, axis=-1) / n))
    b = -np.exp(np.sum(np.cos(2.0 * np.pi * x), axis=-1) / n)
    return a + b + 20.0 + np.e


def griewank(x):
    x = _arr(x)
    i = np.sqrt(np.arange(1, x.shape[-1] + 1))
    return 1.0 + np.sum(x * x, axis=-1) / 4000.0 - np.prod(np.cos(x / i), axis=-1)


@dataclass(frozen=True)
class Transform:
    """``x -> base(M @ (x - shift)) + bias``."""

    shift: np.ndarray
    rotation: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=float)
        rot = np.asarray(self.rotation, dtype=float)
        if shift.ndim != 1 or rot.shape != (shift.size, shift.size):
            raise TransformError("rotation must be dim x dim and shift of length dim")
        if not np.allclose(rot.T @ rot, np.eye(shift.size), atol=1e-6, rtol=0.0):
            raise TransformError("rotation matrix is not orthonormal within 1e-6")
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "rotation", rot)

    @property
    def dim(self) -> int:
        return self.shift.size

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"transform expects {self.dim} variables, got {x.shape[-1]}")
        return (x - self.shift) @ self.rotation.T


def random_transform(dim: int, seed: int, shift_range: float = 80.0, bias: float = 0.0) -> Transform:
    """Seeded synthetic transform: uniform shift and an orthonormalised Gaussian matrix."""
    rng = np.random.Generator(np.random.PCG64(seed))
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    shift = rng.uniform(-shift_range, shift_range, dim)
    return Transform(shift, q, bias)


def load_transform(path, bias: Optional[float] = None) -> Transform:
    """Read ``dim``, the shift vector and ``dim`` rotation rows from a text file.

    An optional extra line holds the bias; the ``bias`` argument overrides it.
    """
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        dim = int(lines[0][0])
        shift = [float(v) for v in lines[1]]
        rows = [[float(v) for v in ln] for ln in lines[2:2 + dim]]
        file_bias = float(lines[2 + dim][0]) if len(lines) > 2 + dim else 0.0
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed transform file {path}: {exc}") from exc
    if len(shift) != dim or len(rows) != dim or any(len(r) != dim for r in rows):
        raise FormatError(f"transform file {path} does not match declared dim {dim}")
    return Transform(np.array(shift), np.array(rows), file_bias if bias is None else bias)


def save_transform(tr: Transform, path) -> None:
    out = [str(tr.dim), " ".join(f"{v:.17g}" for v in tr.shift)]
    out += [" ".join(f"{v:.17g}" for v in row) for row in tr.rotation]
    out.append(f"{tr.bias:.17g}")
    Path(path).write_text("\n".join(out) + "\n")


@dataclass(frozen=True)
class BenchFunction:
    name: str
    base: Callable
    minimum: float = 0.0
    minimizer: Optional[Callable[[int], np.ndarray]] = None
    min_dim: int = 1
    transform: Optional[Transform] = None

    def __call__(self, x):
        return apply_transform(self, x)

    def known_minimizer(self, dim: int) -> Optional[np.ndarray]:
        if self.transform is not None:
            return self.transform.shift.copy()
        return None if self.minimizer is None else self.minimizer(dim)

    def known_minimum(self) -> float:
        return self.minimum + (self.transform.bias if self.transform is not None else 0.0)

    def with_transform(self, transform: Transform) -> "BenchFunction":
        if self.minimizer is not None:
            origin = self.minimizer(transform.dim)
            if np.any(origin != 0.0):
                # relocate so the base minimizer lands on the shift vector
                base = self.base
                inner = lambda z, _o=origin, _b=base: _b(z + _o)
                return BenchFunction(self.name, inner, self.minimum, None, self.min_dim, transform)
        return BenchFunction(self.name, self.base, self.minimum, None, self.min_dim, transform)

    def objective(self, dim: int, low: float = -100.0, high: float = 100.0) -> ObjectiveFn:
        if dim < self.min_dim:
            raise DimensionError(f"{self.name} needs dim >= {self.min_dim}")
        if self.transform is not None and self.transform.dim != dim:
            raise DimensionError(f"transform of {self.name} is {self.transform.dim}-dimensional")
        return ObjectiveFn(self, Bounds.cube(dim, low, high), self.name, vectorized=True)


def apply_transform(fn: BenchFunction, x):
    if fn.transform is None:
        return fn.base(x)
    return fn.base(fn.transform.apply(x)) + fn.transform.bias


_zeros = lambda d: np.zeros(d)
_ones = lambda d: np.ones(d)

REGISTRY: dict[str, BenchFunction] = {
    "zakharov": BenchFunction("zakharov", zakharov, 0.0, _zeros),
    "rosenbrock": BenchFunction("rosenbrock", rosenbrock, 0.0, _ones, min_dim=2),
    "schaffer_f6": BenchFunction("schaffer_f6", expanded_schaffer_f6, 0.0, _zeros, min_dim=2),
    "rastrigin_noncont": BenchFunction("rastrigin_noncont", rastrigin_noncont, 0.0, _zeros),
    "levy": BenchFunction("levy", levy, 0.0, _ones),
    "sphere": BenchFunction("sphere", sphere, 0.0, _zeros),
    "ackley": BenchFunction("ackley", ackley, 0.0, _zeros),
    "griewank": BenchFunction("griewank", griewank, 0.0, _zeros),
    "rastrigin": BenchFunction("rastrigin", rastrigin, 0.0, _zeros),
}


def get_function(name: str) -> BenchFunction:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown function {name!r}; valid: {', '.join(sorted(REGISTRY))}") from None
