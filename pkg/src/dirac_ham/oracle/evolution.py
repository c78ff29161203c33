"""Staggered leapfrog integration of first-order field equations.

The right-hand sides come from the symbolic equations of motion and are
evaluated with :class:`~.lattice.LatticeExpr`.  Fields split into two
groups, each driven only by the other; the first group lives at integer
steps, the second at half steps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..symcore import DIM
from ..symcore.atoms import ALPHABET
from ..symcore.tensor import index_values
from .lattice import FieldState, LatticeConfig, LatticeExpr, UnstableStep, wave_numbers


@dataclass
class Diagnostics:
    step: int
    t: float
    max_div: dict
    monitor: float


@dataclass
class Trajectory:
    final: FieldState
    diagnostics: list = field(default_factory=list)

    @property
    def max_div_step(self) -> dict:
        """Largest change of each max divergence between consecutive steps."""
        out = {}
        for a, b in zip(self.diagnostics, self.diagnostics[1:]):
            for name in a.max_div:
                out[name] = max(out.get(name, 0.0), abs(b.max_div[name] - a.max_div[name]))
        return out

    @property
    def monitor_drift(self) -> float:
        first = self.diagnostics[0].monitor
        worst = max(abs(d.monitor - first) for d in self.diagnostics)
        return worst / abs(first) if first else worst

    def write_csv(self, path) -> None:
        names = sorted(self.diagnostics[0].max_div) if self.diagnostics else []
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "t"] + [f"maxDiv{n}" for n in names] + ["quadMonitor"])
            for d in self.diagnostics:
                w.writerow([d.step, repr(d.t)] + [repr(d.max_div[n]) for n in names] + [repr(d.monitor)])


class Stepper:
    """Compiled right-hand sides ``dt(f) = rhs_f`` for the two groups."""

    def __init__(self, rhs: dict, ranks: dict, config: LatticeConfig):
        self.config = config
        self.ranks = ranks
        self.compiled = {}
        for name, e in rhs.items():
            rank = ranks[name]
            free = ALPHABET[:rank]
            self.compiled[name] = [(v, LatticeExpr(e, config, dict(zip(free, v)))) for v in index_values(rank)]
        names = list(rhs)
        deps = {n: set().union(*(c.names() for _, c in self.compiled[n])) for n in names}
        self.second = sorted(deps[names[0]])
        self.first = sorted(set(names) - set(self.second))
        for n in self.first:
            if not deps[n] <= set(self.second):
                raise ValueError("equations do not split into two mutually driven groups")
        for n in self.second:
            if not deps[n] <= set(self.first):
                raise ValueError("equations do not split into two mutually driven groups")

    def rate(self, name: str, state: FieldState) -> np.ndarray:
        out = np.zeros((DIM,) * self.ranks[name] + self.config.shape)
        for v, f in self.compiled[name]:
            out[tuple(i - 1 for i in v)] = np.real(f(state))
        return out

    def kick(self, group, state: FieldState, dt: float) -> None:
        rates = {n: self.rate(n, state) for n in group}
        for n in group:
            state.arrays[n] = state.arrays[n] + dt * rates[n]


def monitor(state: FieldState, half_before: FieldState, first: list, second: list, config: LatticeConfig) -> float:
    """``h^3 * sum(f^2)`` over integer-step fields plus ``g(t-dt/2) * g(t+dt/2)``
    over half-step fields: the quadratic form leapfrog keeps exactly for
    antisymmetric couplings."""
    h3 = config.volume_element
    total = math.fsum(float(np.sum(state[n] ** 2)) for n in first)
    total += math.fsum(float(np.sum(half_before[n] * state[n])) for n in second)
    return h3 * total


def evolve(rhs: dict, ranks: dict, state: FieldState, config: LatticeConfig, steps: int = None,
           on_step=None) -> Trajectory:
    """Leapfrog over ``steps``: half-step fields are staggered by ``dt/2``.

    ``state`` holds every field at t = 0; the half-step group is first
    advanced to ``-dt/2`` by a backward half kick so both ends are consistent.
    """
    steps = config.steps if steps is None else steps
    stepper = Stepper(rhs, ranks, config)
    dt = config.dt
    cur = state.copy()
    # move the half-step group to t = +dt/2 (and keep its t = -dt/2 value)
    before = cur.copy()
    stepper.kick(stepper.second, before, -dt / 2)
    stepper.kick(stepper.second, cur, dt / 2)
    start = state.norm()
    traj = Trajectory(cur)
    names = sorted(ranks)

    def diag(n_step):
        divs = {n: cur.max_divergence(n, config) for n in names if ranks[n]}
        traj.diagnostics.append(Diagnostics(n_step, n_step * dt, divs,
                                            monitor(cur, before, stepper.first, stepper.second, config)))
        if on_step is not None:
            on_step(n_step, cur)

    diag(0)
    for n_step in range(1, steps + 1):
        stepper.kick(stepper.first, cur, dt)
        before = cur.copy()
        stepper.kick(stepper.second, cur, dt)
        if start > 0 and cur.norm() > 1e6 * start:
            raise UnstableStep(f"field norm grew beyond 1e6 times its initial value at step {n_step}")
        diag(n_step)
    return traj


def plane_wave(ranks: dict, config: LatticeConfig, mode: int = 1, amplitude: float = 1.0) -> tuple:
    """Transverse wave along x: the first declared vector field gets a y
    component ``amplitude * cos(k x)``, everything else starts at zero.

    Returns the state and ``2 cos(omega dt)``, the factor of the exact
    leapfrog recurrence ``f(n+1) + f(n-1) = 2 cos(omega dt) f(n)`` with the
    discrete dispersion relation ``sin(omega dt / 2) = c dt sin(k h) / (2 h)``.
    """
    n, h = config.grid, config.spacing
    k = 2 * np.pi * mode / (n * h)
    ks = math.sin(k * h) / h
    x = np.arange(n) * h
    coords = np.meshgrid(x, x, x, indexing="ij")
    state = FieldState({name: np.zeros((DIM,) * r + config.shape) for name, r in ranks.items()})
    target = next(name for name, r in ranks.items() if r == 1)
    state.arrays[target][1] = amplitude * np.cos(k * coords[0])
    omega = 2 / config.dt * math.asin(config.c * config.dt * abs(ks) / 2)
    return state, 2 * math.cos(omega * config.dt)


def mode_operators(rhs: dict, ranks: dict, config: LatticeConfig) -> tuple:
    """The evolution operator of every Fourier mode at once.

    Each component is excited by a unit impulse at the origin; the FFT of
    the lattice response gives one column of the per-mode matrix for all
    wave vectors.  Returns (layout, array of shape (grid,)*3 + (n, n)).
    """
    stepper = Stepper(rhs, ranks, config)
    names = sorted(ranks)
    layout = [(n, v) for n in names for v in index_values(ranks[n])]
    size = len(layout)
    L = np.zeros(config.shape + (size, size), dtype=complex)
    origin = (0,) * DIM
    for col, (name, v) in enumerate(layout):
        st = FieldState({n: np.zeros((DIM,) * ranks[n] + config.shape) for n in names})
        st.arrays[name][tuple(i - 1 for i in v) + origin] = 1.0
        for row, (rname, rv) in enumerate(layout):
            for vv, f in stepper.compiled.get(rname, ()):
                if vv == rv:
                    L[..., row, col] = np.fft.fftn(f(st))
    return layout, L


def per_mode_ranks(rhs: dict, ranks: dict, config: LatticeConfig, tol: float = 1e-9) -> dict:
    """Histogram {rank: number of modes} of the per-mode evolution operators,
    split into modes with nonzero and zero discrete wave vector."""
    _, L = mode_operators(rhs, ranks, config)
    K = wave_numbers(config)
    k2 = np.sum(K ** 2, axis=0)
    out = {"propagating": {}, "static": {}}
    for m in np.ndindex(*config.shape):
        s = np.linalg.svd(L[m], compute_uv=False)
        rank = int(np.sum(s > tol * max(config.c / config.spacing, s[0])))
        key = "propagating" if k2[m] > tol else "static"
        out[key][rank] = out[key].get(rank, 0) + 1
    return out
