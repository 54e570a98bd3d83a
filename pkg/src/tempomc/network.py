"""Spatio-temporal network construction.

A quench network is a brickwork of two-site gates: per Trotter step either
``[even-bond layer, odd-bond layer]`` (order 1) or the symmetric
``[even/2, odd, even/2]`` splitting (order 2).  Every two-site gate is split
by SVD into two rank-3 halves; the halves living at a fixed spatial site,
stacked over the layers of one step and merged vertically, form one rank-4
tensor of the spatial column at that site.  Columns are temporal MPOs with
one site per Trotter step.

Swap-symmetric gates (the bulk Ising gate) are split symmetrically (Takagi
factorization) so that both halves are identical; a left-right reflected
network then has exactly transposed environments, which the
thermodynamic-limit and mirror-imposed paths rely on.

Boundary bits enter as closure vectors on the first and last step tensors;
the top (final-state) closure is conjugated, matching ``<x|U|x0>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm, sqrtm

from .tensor_ops import ShapeMismatchError
from .tmps import TemporalMPO

__all__ = [
    "PAULI_X", "PAULI_Y", "PAULI_Z", "ID2",
    "QuenchSpec", "CircuitSpec", "ColumnSet",
    "trotter_gate", "build_columns", "gue_sample", "build_circuit_columns",
    "split_two_site_gate", "boundary_vectors",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
ID2 = np.eye(2, dtype=np.complex128)

_SPLIT_TOL = 1e-14


def _kron(a, b):
    return np.kron(a, b)


def bond_hamiltonian(hz: float, hx: float, f_left: float = 0.5, f_right: float = 0.5
                     ) -> np.ndarray:
    """Two-site bond term: XX coupling plus field fractions on either site."""
    h = _kron(PAULI_X, PAULI_X)
    h = h + hz * (f_left * _kron(PAULI_Z, ID2) + f_right * _kron(ID2, PAULI_Z))
    h = h + hx * (f_left * _kron(PAULI_X, ID2) + f_right * _kron(ID2, PAULI_X))
    return h


def trotter_gate(hz: float, hx: float, dt: float, order: int = 2,
                 f_left: float = 0.5, f_right: float = 0.5) -> np.ndarray:
    """Two-site bond gate exp(-i dt h_bond), fields split across the bond.

    ``order`` selects the layer schedule used by the column builder (order 2
    applies the even-bond layer twice at dt/2); the bond gate itself is the
    plain exponential for the given dt.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if order not in (1, 2):
        raise ValueError("trotter order must be 1 or 2")
    return expm(-1j * dt * bond_hamiltonian(hz, hx, f_left, f_right))


def split_two_site_gate(gate: np.ndarray, tol: float = _SPLIT_TOL
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """Split a d^2 x d^2 gate into halves A, B with gate = sum_k A_k (x) B_k.

    Returns arrays of shape (r, d, d) mapping s_in -> s_out.  All nonzero
    singular values are retained (r <= d^2).  Swap-symmetric gates get the
    symmetric (Takagi) factorization with B identical to A, so a reflected
    network reuses the same halves.
    """
    d2 = gate.shape[0]
    d = int(round(math.sqrt(d2)))
    if gate.shape != (d2, d2) or d * d != d2:
        raise ShapeMismatchError(f"expected a d^2 x d^2 gate, got {gate.shape}")
    g2 = gate.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d2, d2)
    u, s, vh = np.linalg.svd(g2)
    r = max(1, int(np.sum(s > tol * s[0])))
    if np.linalg.norm(g2 - g2.T) <= 1e-12 * np.linalg.norm(g2):
        v = vh.conj().T
        c = u.conj().T @ v.conj()
        q = u @ sqrtm(c)
        half = np.array([np.sqrt(s[k]) * q[:, k].reshape(d, d) for k in range(r)])
        return half, half
    a = np.array([np.sqrt(s[k]) * u[:, k].reshape(d, d) for k in range(r)])
    b = np.array([np.sqrt(s[k]) * vh[k, :].reshape(d, d) for k in range(r)])
    return a, b


# ---------------------------------------------------------------------------
# boundary states


def boundary_vectors(spec: Union[str, Sequence], n: int) -> List[np.ndarray]:
    """Per-site closure vectors from a label string, bit list, or vectors.

    A label string uses one character per site from {0, 1, +}; a single
    character is repeated across the chain.
    """
    basis = {
        "0": np.array([1.0, 0.0], dtype=np.complex128),
        "1": np.array([0.0, 1.0], dtype=np.complex128),
        "+": np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0),
    }
    if isinstance(spec, str):
        s = spec * n if len(spec) == 1 else spec
        if len(s) != n:
            raise ValueError(f"boundary string length {len(s)} != {n}")
        try:
            return [basis[c].copy() for c in s]
        except KeyError as exc:
            raise ValueError(f"unknown boundary character {exc}") from exc
    out = []
    for v in spec:
        if np.isscalar(v) or isinstance(v, (int, np.integer)):
            out.append(basis[str(int(v))].copy())
        else:
            arr = np.asarray(v, dtype=np.complex128)
            if arr.shape != (2,):
                raise ValueError(f"closure vector must have shape (2,), got {arr.shape}")
            nrm = np.linalg.norm(arr)
            if not np.isclose(nrm, 1.0, atol=1e-10):
                raise ValueError("closure vectors must have unit norm")
            out.append(arr)
    if len(out) != n:
        raise ValueError(f"boundary length {len(out)} != {n}")
    return out


def bits_of(spec: Union[str, Sequence], n: int) -> Tuple[int, ...]:
    if isinstance(spec, str):
        s = spec * n if len(spec) == 1 else spec
        return tuple(int(c) for c in s)
    return tuple(int(v) for v in spec)


# ---------------------------------------------------------------------------
# problem specifications


@dataclass(frozen=True)
class QuenchSpec:
    """Transverse-field Ising quench definition (coupling fixed to 1)."""

    n: Union[int, str]          # site count or "infinite"
    hz: float
    hx: float
    t_total: float
    dt: float
    trotter_order: int = 2
    x0: Union[str, Sequence] = "0"
    local_dim: int = 2

    def __post_init__(self):
        if self.local_dim != 2:
            raise ValueError("only spin-1/2 chains are supported")
        if self.trotter_order not in (1, 2):
            raise ValueError("trotter_order must be 1 or 2")
        if self.dt <= 0:
            if not (self.t_total == 0 and self.dt == 0):
                raise ValueError("dt must be > 0")
        steps = self.n_steps
        if self.dt > 0 and abs(steps * self.dt - self.t_total) > 1e-9 * max(1.0, self.t_total):
            raise ValueError(f"t_total/dt = {self.t_total}/{self.dt} is not an integer")
        if not self.infinite:
            if int(self.n) < 2:
                raise ValueError("n must be >= 2")
            boundary_vectors(self.x0, int(self.n))  # validates length

    @property
    def infinite(self) -> bool:
        return isinstance(self.n, str)

    @property
    def n_steps(self) -> int:
        if self.dt == 0:
            return 0
        return int(round(self.t_total / self.dt))

    def key(self) -> tuple:
        x0 = self.x0 if isinstance(self.x0, str) else tuple(map(tuple, np.atleast_2d(self.x0)))
        return (self.n, self.hz, self.hx, self.t_total, self.dt, self.trotter_order, x0)


@dataclass(frozen=True)
class CircuitSpec:
    """Brickwork circuit of identical two-site gates U = exp(-i A dt)."""

    n: int
    dt: float
    depth: int
    seed: Optional[int] = None
    generator: Optional[np.ndarray] = None   # 4x4 Hermitian; sampled from seed if None
    x0: Union[str, Sequence] = "0"

    def __post_init__(self):
        if self.generator is None and self.seed is None:
            raise ValueError("provide a generator matrix or a seed")
        if self.generator is not None:
            a = np.asarray(self.generator)
            if a.shape != (4, 4) or np.linalg.norm(a - a.conj().T) > 1e-12 * max(1.0, np.linalg.norm(a)):
                raise ValueError("generator must be 4x4 Hermitian")

    @property
    def t_total(self) -> float:
        return self.depth * self.dt

    @property
    def regime(self) -> str:
        if self.dt <= 0.1:
            return "hamiltonian"
        if self.dt >= 0.5:
            return "floquet"
        return "intermediate"

    def gate_generator(self) -> np.ndarray:
        if self.generator is not None:
            return np.asarray(self.generator, dtype=np.complex128)
        return gue_sample(self.seed)


def gue_sample(seed: int) -> np.ndarray:
    """4x4 GUE matrix A = (B + B^dag)/2, B standard complex Gaussian."""
    rng = np.random.default_rng(seed)
    b = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / math.sqrt(2.0)
    return (b + b.conj().T) / 2.0


# ---------------------------------------------------------------------------
# layer schedules and column assembly


def _ising_layers(n: int, hz: float, hx: float, dt: float, order: int
                  ) -> List[Dict[int, np.ndarray]]:
    """Per-step layer schedule: list of {bond: gate}, bonds 0-based."""
    def fractions(b):
        fl = 1.0 if b == 0 else 0.5
        fr = 1.0 if b == n - 2 else 0.5
        return fl, fr

    def layer(bonds, tau):
        return {b: trotter_gate(hz, hx, tau, order, *fractions(b)) for b in bonds}

    even = range(0, n - 1, 2)
    odd = range(1, n - 1, 2)
    if order == 1:
        layers = [layer(even, dt), layer(odd, dt)]
    else:
        layers = [layer(even, dt / 2), layer(odd, dt), layer(even, dt / 2)]
    return [lay for lay in layers if lay]


def _bulk_layers(hz: float, hx: float, dt: float, order: int
                 ) -> List[Dict[int, np.ndarray]]:
    """Two-site unit cell of the infinite chain: bonds 0 (intra) and 1 (inter)."""
    def layer(bonds, tau):
        return {b: trotter_gate(hz, hx, tau, order) for b in bonds}
    if order == 1:
        return [layer([0], dt), layer([1], dt)]
    return [layer([0], dt / 2), layer([1], dt), layer([0], dt / 2)]


def _assemble_columns(n: int, layers: List[Dict[int, np.ndarray]], n_steps: int,
                      periodic_cell: bool = False) -> List[List[np.ndarray]]:
    """Merge each step's per-site layer tensors into one rank-4 tensor per site."""
    split_cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def halves(gate):
        key = id(gate)
        if key not in split_cache:
            split_cache[key] = split_two_site_gate(gate)
        return split_cache[key]

    step_sites: List[List[np.ndarray]] = [[] for _ in range(n)]
    for lay in layers:
        site_t: List[Optional[np.ndarray]] = [None] * n
        for b, gate in lay.items():
            a_half, b_half = halves(gate)
            left = a_half.transpose(2, 0, 1)[:, None, :, :]    # (s, 1, k, s')
            right = b_half.transpose(2, 0, 1)[:, :, None, :]   # (s, k, 1, s')
            site_t[b] = left
            tgt = (b + 1) % n if periodic_cell else b + 1
            site_t[tgt] = right
        for i in range(n):
            if site_t[i] is None:
                site_t[i] = ID2.reshape(2, 1, 1, 2).copy()
            step_sites[i].append(site_t[i])
    merged: List[np.ndarray] = []
    for i in range(n):
        t = step_sites[i][0]
        for w in step_sites[i][1:]:
            t = np.einsum("aijm,mklb->aikjlb", t, w)
            s = t.shape
            t = t.reshape(s[0], s[1] * s[2], s[3] * s[4], s[5])
        merged.append(np.ascontiguousarray(t))
    return [[merged[i] for _ in range(n_steps)] for i in range(n)]


@dataclass
class ColumnSet:
    """Spatial columns of a closed network.

    ``bodies[i]`` holds column i's step tensors with the bottom closure
    applied and the top spin leg left open on the last tensor; ``top[i]`` is
    the conjugated final-state vector that closes it.  ``columns`` yields the
    fully closed temporal MPOs.
    """

    bodies: List[List[np.ndarray]]
    bottom: List[np.ndarray]
    top: List[np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.bodies)

    @property
    def n_steps(self) -> int:
        return len(self.bodies[0])

    def column(self, i: int, top: Optional[np.ndarray] = None) -> TemporalMPO:
        body = self.bodies[i]
        vec = self.top[i] if top is None else np.asarray(top, dtype=np.complex128).conj()
        closed = list(body[:-1])
        closed.append(np.tensordot(body[-1], vec, axes=([3], [0]))[..., None])
        return TemporalMPO(closed)

    def open_column(self, i: int) -> List[np.ndarray]:
        return self.bodies[i]

    @property
    def columns(self) -> List[TemporalMPO]:
        return [self.column(i) for i in range(self.n)]


def _close_bottom(bodies: List[List[np.ndarray]], bottom: List[np.ndarray]):
    for i, body in enumerate(bodies):
        if not body:
            # zero evolution steps: the column is just the boundary sandwich
            body.append(bottom[i].reshape(1, 1, 1, 2).copy())
            continue
        body[0] = np.tensordot(bottom[i], body[0], axes=([0], [0]))[None, ...]


def build_columns(spec: QuenchSpec, x: Union[str, Sequence]) -> ColumnSet:
    """Columns of the Trotterized quench network with final state x on top.

    The exact contraction of all columns equals the dense circuit amplitude
    for the same gate schedule.
    """
    if spec.infinite:
        cell = _assemble_columns(2, _bulk_layers(spec.hz, spec.hx, spec.dt,
                                                 spec.trotter_order),
                                 spec.n_steps, periodic_cell=True)
        bottom = boundary_vectors(spec.x0, 2)
        top = [v.conj() for v in boundary_vectors(x, 2)]
        _close_bottom(cell, bottom)
        return ColumnSet(cell, bottom, top,
                         meta={"kind": "quench", "infinite": True, "dt": spec.dt,
                               "order": spec.trotter_order, "n_steps": spec.n_steps})
    n = int(spec.n)
    xv = boundary_vectors(x, n)
    bodies = _assemble_columns(n, _ising_layers(n, spec.hz, spec.hx, spec.dt,
                                                spec.trotter_order), spec.n_steps)
    bottom = boundary_vectors(spec.x0, n)
    _close_bottom(bodies, bottom)
    top = [v.conj() for v in xv]
    return ColumnSet(bodies, bottom, top,
                     meta={"kind": "quench", "infinite": False, "dt": spec.dt,
                           "order": spec.trotter_order, "n_steps": spec.n_steps})


def build_circuit_columns(spec: CircuitSpec, x: Union[str, Sequence]) -> ColumnSet:
    """Columns of a brickwork circuit of identical gates exp(-i A dt).

    One layer per time step; layer parity alternates between even and odd
    bonds.  Metadata records the dt regime for downstream analytics.
    """
    n = spec.n
    gen = spec.gate_generator()
    gate = expm(-1j * spec.dt * gen) if spec.dt != 0 else np.eye(4, dtype=np.complex128)
    a_half, b_half = split_two_site_gate(gate)
    left = a_half.transpose(2, 0, 1)[:, None, :, :]
    right = b_half.transpose(2, 0, 1)[:, :, None, :]
    ident = ID2.reshape(2, 1, 1, 2)
    bodies: List[List[np.ndarray]] = [[] for _ in range(n)]
    for layer in range(spec.depth):
        site_t: List[np.ndarray] = [ident.copy() for _ in range(n)]
        for b in range(layer % 2, n - 1, 2):
            site_t[b] = left.copy()
            site_t[b + 1] = right.copy()
        for i in range(n):
            bodies[i].append(site_t[i])
    bottom = boundary_vectors(spec.x0, n)
    _close_bottom(bodies, bottom)
    top = [v.conj() for v in boundary_vectors(x, n)]
    return ColumnSet(bodies, bottom, top,
                     meta={"kind": "circuit", "dt": spec.dt, "regime": spec.regime,
                           "depth": spec.depth, "n_steps": spec.depth})
