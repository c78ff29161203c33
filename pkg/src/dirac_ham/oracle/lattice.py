"""Periodic cubic lattices and numerical evaluation of symbolic densities.

Spatial derivatives are second-order central differences, ``ddelta`` is a
Kronecker delta over ``spacing**3`` and integrals are plain site sums, so
summation by parts is exact and discarded surface terms really vanish.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..symcore import DIM, Expr, Kind
from ..symcore.expr import expand_components


class UnstableStep(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeConfig:
    grid: int = 8
    spacing: float = 1.0
    c: float = 1.0
    tol: float = 1e-9
    steps: int = 1000
    dt: float = 0.1
    seed: int = 0
    alpha: float = 1.0

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("grid must be at least 2")
        if self.spacing <= 0 or self.dt <= 0 or self.c <= 0:
            raise ValueError("spacing, dt and c must be positive")
        if self.dt * self.c / self.spacing >= 1:
            raise ValueError("dt * c / spacing must be below 1")

    @property
    def shape(self) -> tuple:
        return (self.grid,) * DIM

    @property
    def volume_element(self) -> float:
        return self.spacing ** DIM

    def constants(self) -> dict:
        return {"c": self.c, "pi": math.pi, "alpha": self.alpha, "I": 1j}


@dataclass
class FieldState:
    """Arrays keyed by atom name, shaped ``(3,)*rank + (grid,)*3``."""

    arrays: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "FieldState":
        return FieldState({k: v.copy() for k, v in self.arrays.items()})

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(np.abs(v) ** 2)) for v in self.arrays.values()))

    def divergence(self, name: str, config: LatticeConfig) -> np.ndarray:
        """Central divergence on the first index."""
        a = self.arrays[name]
        return sum(diff(a[j], j, config.spacing) for j in range(DIM))

    def max_divergence(self, name: str, config: LatticeConfig) -> float:
        return float(np.max(np.abs(self.divergence(name, config))))


def diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central difference along spatial ``axis`` (the last three array axes)."""
    ax = a.ndim - DIM + axis
    return (np.roll(a, -1, axis=ax) - np.roll(a, 1, axis=ax)) / (2 * h)


def wave_numbers(config: LatticeConfig) -> np.ndarray:
    """Symbols of the central difference per axis, shape (3, grid, grid, grid)."""
    k = 2 * np.pi * np.fft.fftfreq(config.grid, d=config.spacing)
    sym = np.sin(k * config.spacing) / config.spacing
    grids = np.meshgrid(sym, sym, sym, indexing="ij")
    return np.stack(grids)


def zero_state(ranks: dict, config: LatticeConfig) -> FieldState:
    return FieldState({n: np.zeros((DIM,) * r + config.shape) for n, r in ranks.items()})


def transverse_project(a: np.ndarray, config: LatticeConfig) -> np.ndarray:
    """Remove the part of ``a`` whose central divergence (first index) is nonzero."""
    K = wave_numbers(config)
    k2 = np.sum(K ** 2, axis=0)
    safe = np.where(k2 > 0, k2, 1.0)
    ah = np.fft.fftn(a, axes=tuple(range(a.ndim - DIM, a.ndim)))
    extra = (slice(None),) * (a.ndim - DIM - 1)
    proj = sum(K[j] * ah[(j,) + extra] for j in range(DIM)) / safe
    out = ah.copy()
    for j in range(DIM):
        out[(j,) + extra] = ah[(j,) + extra] - K[j] * proj
    return np.real(np.fft.ifftn(out, axes=tuple(range(a.ndim - DIM, a.ndim))))


def random_state(ranks: dict, config: LatticeConfig, rng: np.random.Generator = None,
                 transverse: bool = False) -> FieldState:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    out = {}
    for name in sorted(ranks):
        a = rng.standard_normal((DIM,) * ranks[name] + config.shape)
        if transverse and ranks[name]:
            a = transverse_project(a, config)
        out[name] = a
    return FieldState(out)


class LatticeExpr:
    """A symbolic expression compiled for repeated lattice evaluation.

    Free indices are summed out only when ``values`` fixes them; dummy
    indices are expanded once at compile time.
    """

    def __init__(self, e: Expr, config: LatticeConfig, free_values: dict = None):
        if free_values:
            e = e.rename_indices(free_values)
        if e.free_indices():
            raise ValueError(f"free indices {sorted(e.free_indices())} need values")
        self.config = config
        consts = config.constants()
        self.terms = []
        for val, mono, atoms in expand_components(e).terms:
            coef = complex(float(val))
            for name, power in mono:
                if name not in consts:
                    raise ValueError(f"no numerical value for constant {name!r}")
                coef *= consts[name] ** power
            factors = []
            for a in atoms:
                if a.kind not in (Kind.FIELD, Kind.MOMENTUM, Kind.MULTIPLIER):
                    raise ValueError(f"cannot evaluate {a.kind.name} on the lattice")
                if a.tderiv:
                    raise ValueError("time derivatives cannot be evaluated on a lattice snapshot")
                factors.append((a.name, tuple(i - 1 for i in a.indices), tuple(d - 1 for d in a.derivs)))
            coef = coef.real if coef.imag == 0 else coef
            self.terms.append((coef, tuple(factors)))

    def __call__(self, state: FieldState) -> np.ndarray:
        cache = {}
        total = np.zeros(self.config.shape, dtype=complex if any(
            isinstance(c, complex) for c, _ in self.terms) else float)
        for coef, factors in self.terms:
            prod = np.full(self.config.shape, coef)
            for key in factors:
                if key not in cache:
                    name, comp, derivs = key
                    arr = state[name][comp]
                    for d in derivs:
                        arr = diff(arr, d, self.config.spacing)
                    cache[key] = arr
                prod = prod * cache[key]
            total = total + prod
        return total

    def names(self) -> set:
        return {name for _, factors in self.terms for name, _, _ in factors}


def evaluate(e: Expr, state: FieldState, config: LatticeConfig, free_values: dict = None) -> np.ndarray:
    """Values of the density ``e`` at every site."""
    return LatticeExpr(e, config, free_values)(state)


def numeric_functional(F: Expr, state: FieldState, config: LatticeConfig) -> float:
    """Midpoint quadrature of a density: ``spacing**3`` times the site sum."""
    return config.volume_element * np.sum(evaluate(F, state, config))


def finite_difference_derivative(F: Expr, state: FieldState, config: LatticeConfig, name: str,
                                 component: tuple, site: tuple, step: float = 1e-3) -> float:
    """Central finite difference of the discretized functional with respect to one
    lattice variable, divided by the volume element (the lattice delta/delta q)."""
    compiled = LatticeExpr(F, config)
    index = tuple(component) + tuple(site)
    plus = state.copy()
    plus.arrays[name][index] += step
    minus = state.copy()
    minus.arrays[name][index] -= step
    h3 = config.volume_element
    return float(np.real(h3 * (np.sum(compiled(plus)) - np.sum(compiled(minus))) / (2 * step) / h3))


def sites(config: LatticeConfig):
    return itertools.product(range(config.grid), repeat=DIM)
