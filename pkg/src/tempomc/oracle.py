"""Exact dense references and a TEBD baseline.

The dense evolver applies the identical layer schedule used by the column
builder (same gate constructor, bit-identical matrices), so engine-vs-dense
differences isolate contraction error, never Trotter error.  Basis
convention: site 0 is the most significant bit of the state index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .network import (CircuitSpec, QuenchSpec, _ising_layers, boundary_vectors)
from scipy.linalg import expm

__all__ = [
    "DenseState", "TebdState",
    "dense_evolve", "dense_amplitude", "dense_measure", "dense_renyi2",
    "tebd_evolve", "bit_index",
]

_DENSE_CAP = 14
_EXACT_EXP_CAP = 12


def bit_index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


@dataclass
class DenseState:
    """Full statevector over n spins (site 0 = most significant bit)."""

    vector: np.ndarray
    n: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def _initial_vector(n: int, x0: Union[str, Sequence]) -> np.ndarray:
    vecs = boundary_vectors(x0, n)
    psi = np.array([1.0], dtype=np.complex128)
    for v in vecs:
        psi = np.kron(psi, v)
    return psi


def _apply_gate(psi: np.ndarray, gate: np.ndarray, bond: int, n: int) -> np.ndarray:
    left = 2 ** bond
    right = 2 ** (n - bond - 2)
    psi = psi.reshape(left, 4, right)
    psi = np.einsum("ij,ajb->aib", gate, psi)
    return psi.reshape(-1)


def _layer_schedule(spec: Union[QuenchSpec, CircuitSpec]):
    """(layers per step, n_steps); each layer maps bond -> gate."""
    if isinstance(spec, CircuitSpec):
        gen = spec.gate_generator()
        gate = expm(-1j * spec.dt * gen) if spec.dt != 0 else np.eye(4, dtype=np.complex128)
        layers = []
        for layer in range(spec.depth):
            layers.append({b: gate for b in range(layer % 2, spec.n - 1, 2)})
        return layers, 1  # the whole circuit is one "step" of stacked layers
    n = int(spec.n)
    return _ising_layers(n, spec.hz, spec.hx, spec.dt, spec.trotter_order), spec.n_steps


def dense_evolve(spec: Union[QuenchSpec, CircuitSpec], exact: bool = False) -> DenseState:
    """Evolve |x0> densely through the Trotter (or circuit) layer schedule.

    With ``exact=True`` the evolution uses the matrix exponential of the full
    Hamiltonian instead (Trotter-error-free reference; guarded to smaller n).
    """
    n = int(spec.n)
    if n > _DENSE_CAP:
        raise ValueError(f"dense evolution guarded to n <= {_DENSE_CAP}")
    psi = _initial_vector(n, spec.x0)
    if exact:
        if isinstance(spec, CircuitSpec):
            raise ValueError("exact exponential applies to Hamiltonian quenches only")
        if n > _EXACT_EXP_CAP:
            raise ValueError(f"exact exponential guarded to n <= {_EXACT_EXP_CAP}")
        ham = _dense_hamiltonian(n, spec.hz, spec.hx)
        evals, evecs = np.linalg.eigh(ham)
        phases = np.exp(-1j * evals * spec.t_total)
        psi = evecs @ (phases * (evecs.conj().T @ psi))
        return DenseState(psi, n)
    layers, n_steps = _layer_schedule(spec)
    for _ in range(n_steps):
        for layer in layers:
            for bond, gate in layer.items():
                psi = _apply_gate(psi, gate, bond, n)
    return DenseState(psi, n)


def _dense_hamiltonian(n: int, hz: float, hx: float) -> np.ndarray:
    from .network import PAULI_X, PAULI_Z, ID2

    def op_at(single, site):
        mats = [ID2] * n
        mats[site] = single
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    ham = np.zeros((2 ** n, 2 ** n), dtype=np.complex128)
    for j in range(n - 1):
        ham += op_at(PAULI_X, j) @ op_at(PAULI_X, j + 1)
    for j in range(n):
        ham += hz * op_at(PAULI_Z, j) + hx * op_at(PAULI_X, j)
    return ham


def dense_amplitude(state: DenseState, x: Union[str, Sequence]) -> complex:
    """<x|psi> for a final product state x (conjugated closure)."""
    vecs = boundary_vectors(x, state.n)
    bra = np.array([1.0], dtype=np.complex128)
    for v in vecs:
        bra = np.kron(bra, v)
    return complex(np.vdot(bra, state.vector))


def dense_measure(state: DenseState, op: np.ndarray, site: int) -> complex:
    """<psi|O|psi> / <psi|psi> for a k-site operator starting at ``site``."""
    k = int(round(math.log2(op.shape[0])))
    n = state.n
    left = 2 ** site
    right = 2 ** (n - site - k)
    psi = state.vector.reshape(left, 2 ** k, right)
    opsi = np.einsum("ij,ajb->aib", op, psi).reshape(-1)
    return complex(np.vdot(state.vector, opsi) / np.vdot(state.vector, state.vector))


def dense_renyi2(state: DenseState, cut: int) -> float:
    """Second Renyi entropy -log tr(rho_A^2), A = sites 0..cut-1."""
    psi = state.vector / np.linalg.norm(state.vector)
    m = psi.reshape(2 ** cut, -1)
    g = m.conj().T @ m
    purity = float(np.real(np.einsum("ij,ji->", g, g)))
    return -math.log(purity)


# ---------------------------------------------------------------------------
# TEBD baseline


@dataclass
class TebdState:
    """Spatial MPS evolved by gate layers with per-bond SVD truncation."""

    tensors: List[np.ndarray]       # (left, phys, right)
    chi: int
    discarded_weight: float = 0.0
    center: int = 0

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self):
        return tuple(t.shape[2] for t in self.tensors[:-1])


def _tebd_init(n: int, x0) -> List[np.ndarray]:
    return [v.reshape(1, 2, 1).astype(np.complex128) for v in boundary_vectors(x0, n)]


def _move_center(ts: List[np.ndarray], frm: int, to: int):
    while frm < to:
        dl, p, dr = ts[frm].shape
        q, r = np.linalg.qr(ts[frm].reshape(dl * p, dr))
        ts[frm] = q.reshape(dl, p, q.shape[1])
        ts[frm + 1] = np.tensordot(r, ts[frm + 1], axes=([1], [0]))
        frm += 1
    while frm > to:
        dl, p, dr = ts[frm].shape
        mat = ts[frm].reshape(dl, p * dr)
        q, r = np.linalg.qr(mat.conj().T)
        ts[frm] = q.conj().T.reshape(q.shape[1], p, dr)
        ts[frm - 1] = np.tensordot(ts[frm - 1], r.conj().T, axes=([2], [0]))
        frm -= 1
    return frm


def _tebd_gate(ts: List[np.ndarray], gate: np.ndarray, bond: int, chi: int) -> float:
    """Two-site gate at (bond, bond+1); center must sit on one of the two."""
    a, b = ts[bond], ts[bond + 1]
    theta = np.tensordot(a, b, axes=([2], [0]))            # (l, p1, p2, r)
    dl, _, _, dr = theta.shape
    theta = np.tensordot(gate.reshape(2, 2, 2, 2), theta, axes=([2, 3], [1, 2]))
    theta = theta.transpose(2, 0, 1, 3).reshape(dl * 2, 2 * dr)
    u, s, vh = np.linalg.svd(theta, full_matrices=False)
    w = s ** 2
    total = float(w.sum())
    keep = max(1, min(chi, int(np.sum(w > 1e-28 * total))))
    disc = float(w[keep:].sum() / total) if total > 0 else 0.0
    nrm = np.linalg.norm(s[:keep])
    ts[bond] = u[:, :keep].reshape(dl, 2, keep)
    ts[bond + 1] = (s[:keep, None] * vh[:keep]).reshape(keep, 2, dr)
    return disc


def tebd_evolve(spec: QuenchSpec, chi: int) -> TebdState:
    """Evolve |x0> as a spatial MPS through the shared layer schedule."""
    if chi < 1:
        raise ValueError("chi must be >= 1")
    n = int(spec.n)
    ts = _tebd_init(n, spec.x0)
    layers, n_steps = _layer_schedule(spec)
    state = TebdState(ts, chi)
    center = 0
    for _ in range(n_steps):
        for layer in layers:
            for bond in sorted(layer):
                center = _move_center(ts, center, bond)
                state.discarded_weight += _tebd_gate(ts, layer[bond], bond, chi)
                center = bond + 1
    state.center = center
    return state


def tebd_measure_z(state: TebdState, site: int) -> float:
    """<Z_site> from the MPS (moves the orthogonality center there)."""
    from .network import PAULI_Z
    ts = [t.copy() for t in state.tensors]
    _move_center(ts, state.center, site)
    t = ts[site]
    val = np.einsum("apb,pq,aqb->", t.conj(), PAULI_Z, t)
    nrm = np.einsum("apb,apb->", t.conj(), t)
    return float(np.real(val / nrm))


def tebd_renyi2(state: TebdState, cut: int) -> float:
    """Half-chain purity from the bond spectrum at ``cut``."""
    ts = [t.copy() for t in state.tensors]
    _move_center(ts, state.center, cut)
    dl, p, dr = ts[cut].shape
    s = np.linalg.svd(ts[cut].reshape(dl, p * dr), compute_uv=False)
    w = s ** 2
    w = w / w.sum()
    return -math.log(float(np.sum(w ** 2)))


def tebd_to_dense(state: TebdState) -> DenseState:
    """Contract the MPS to a dense vector (small n only)."""
    n = state.n
    if n > _DENSE_CAP:
        raise ValueError("dense conversion guarded to small chains")
    vec = state.tensors[0]
    for t in state.tensors[1:]:
        vec = np.tensordot(vec, t, axes=([2], [0]))
        s = vec.shape
        vec = vec.reshape(s[0], s[1] * s[2], s[3])
    return DenseState(vec.reshape(-1), n)
