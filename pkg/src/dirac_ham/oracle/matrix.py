"""Lattice shadows of the constraint bracket matrix.

Two routes build the same finite matrix: one discretizes the symbolic
kernels entry by entry, the other differentiates the discretized
constraints and contracts with the lattice symplectic form.  Agreement of
the two, and the SVD rank of either, are the checks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..symcore import DIM, Expr, Kind
from ..symcore.atoms import ALPHABET
from ..symcore.names import momentum_name
from ..symcore.tensor import component, index_values
from .lattice import FieldState, LatticeConfig, LatticeExpr, zero_state


@dataclass
class NumericMatrix:
    matrix: np.ndarray
    rank: int
    singular_values: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def deficit(self) -> int:
        return self.size - self.rank


def numeric_rank(M: np.ndarray, tol: float) -> tuple:
    if M.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.sum(s > tol * s[0])), s


def difference_matrix(axis: int, config: LatticeConfig) -> np.ndarray:
    """Site-by-site matrix of the central difference along ``axis``."""
    n = config.grid
    N = n ** DIM
    D = np.zeros((N, N))
    for flat in range(N):
        x = np.unravel_index(flat, config.shape)
        up, down = list(x), list(x)
        up[axis] = (x[axis] + 1) % n
        down[axis] = (x[axis] - 1) % n
        D[flat, np.ravel_multi_index(up, config.shape)] += 1 / (2 * config.spacing)
        D[flat, np.ravel_multi_index(down, config.shape)] -= 1 / (2 * config.spacing)
    return D


def _kernel_block(ker, config: LatticeConfig, diffs: dict, state: FieldState) -> np.ndarray:
    """Site matrix of an explicit-index kernel in ``ddelta(x, y)``."""
    N = config.grid ** DIM
    out = np.zeros((N, N))
    consts = config.constants()
    for val, mono, atoms in ker.terms:
        coef = float(val)
        for name, power in mono:
            coef *= consts[name] ** power
        deltas = [a for a in atoms if a.kind == Kind.DELTA]
        rest = [a for a in atoms if a.kind != Kind.DELTA]
        if len(deltas) != 1:
            raise ValueError("kernel term without a single delta")
        d = deltas[0]
        block = np.eye(N) / config.volume_element
        for axis in d.derivs:
            block = diffs[axis - 1] @ block
        if d.points[0] != "x":
            block = block.T
        if rest:
            values = LatticeExpr(Expr.product(rest), config)(state).reshape(-1)
            block = values[:, None] * block
        out += coef * block
    return out


def assemble_symbolic(W, config: LatticeConfig, state: FieldState = None) -> np.ndarray:
    """Discretize the symbolic kernel matrix: rows (constraint component, site)."""
    N = config.grid ** DIM
    diffs = {j: difference_matrix(j, config) for j in range(DIM)}
    offsets, n = [], 0
    for c in W.constraints:
        offsets.append(n)
        n += c.components
    M = np.zeros((n * N, n * N))
    for (a, b), ker in W.entries.items():
        ca, cb = W.constraints[a], W.constraints[b]
        names = ALPHABET[: ca.rank + cb.rank]
        for i, av in enumerate(index_values(ca.rank)):
            for j, bv in enumerate(index_values(cb.rank)):
                comp = component(ker, names, av + bv)
                if comp.is_zero():
                    continue
                r = (offsets[a] + i) * N
                s = (offsets[b] + j) * N
                M[r:r + N, s:s + N] = _kernel_block(comp, config, diffs, state)
    return M


def constraint_jacobian(constraints: list, fields: list, config: LatticeConfig, state: FieldState = None) -> tuple:
    """(d phi / d q, d phi / d p) of the discretized constraints by central differences."""
    ranks = {name: rank for name, rank in fields}
    ranks.update({momentum_name(name): rank for name, rank in fields})
    base = state.copy() if state is not None else zero_state(ranks, config)
    for name, r in ranks.items():
        base.arrays.setdefault(name, np.zeros((DIM,) * r + config.shape))
    compiled = []
    for c in constraints:
        for v in index_values(c.rank):
            compiled.append(LatticeExpr(c.expr, config, dict(zip(ALPHABET, v))))
    N = config.grid ** DIM
    rows = len(compiled) * N

    def jac(names):
        cols = []
        for name in names:
            arr = base.arrays[name]
            for flat in range(arr.size):
                idx = np.unravel_index(flat, arr.shape)
                plus, minus = base.copy(), base.copy()
                plus.arrays[name][idx] += 1.0
                minus.arrays[name][idx] -= 1.0
                col = np.concatenate([(np.real(f(plus)) - np.real(f(minus))).reshape(-1) / 2 for f in compiled])
                cols.append(col)
        return np.array(cols).T if cols else np.zeros((rows, 0))

    Jq = jac([name for name, _ in fields])
    Jp = jac([momentum_name(name) for name, _ in fields])
    return Jq, Jp


def assemble_from_jacobian(constraints: list, fields: list, config: LatticeConfig,
                           state: FieldState = None) -> np.ndarray:
    """Lattice Poisson bracket ``{q_s, p_t} = delta_st / spacing**3`` applied to the constraints."""
    Jq, Jp = constraint_jacobian(constraints, fields, config, state)
    return (Jq @ Jp.T - Jp @ Jq.T) / config.volume_element


def numeric_constraint_matrix(W, config: LatticeConfig, state: FieldState = None) -> NumericMatrix:
    M = assemble_symbolic(W, config, state)
    r, s = numeric_rank(M, config.tol)
    return NumericMatrix(M, r, s)


def write_matrix(path, M: np.ndarray) -> None:
    """Dense dump: int64 rows and cols (little endian), then float64 entries row-major."""
    M = np.ascontiguousarray(M, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", *M.shape))
        fh.write(M.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = struct.unpack("<qq", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(rows, cols).copy()
