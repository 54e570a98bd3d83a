"""Independent brute-force references for the test suite.

Everything here contracts tensors by explicit loops or direct einsum over
dense arrays, sharing no code path with the package's transfer-matrix
contractions.
"""

import numpy as np

from tempomc.tmps import TemporalMPS, TemporalMPO


def rand_tmps(rng, n_sites, chi, phys, role="ket"):
    """Random temporal MPS with uniform interior bond dimension."""
    if isinstance(phys, int):
        phys = [phys] * n_sites
    ts = []
    dl = 1
    for i in range(n_sites):
        dr = 1 if i == n_sites - 1 else chi
        ts.append(rng.standard_normal((dl, phys[i], dr))
                  + 1j * rng.standard_normal((dl, phys[i], dr)))
        dl = dr
    return TemporalMPS(ts, role)


def rand_tmpo(rng, n_sites, bond, pl, pr):
    ts = []
    dl = 1
    for i in range(n_sites):
        dr = 1 if i == n_sites - 1 else bond
        ts.append(rng.standard_normal((dl, pl, pr, dr))
                  + 1j * rng.standard_normal((dl, pl, pr, dr)))
        dl = dr
    return TemporalMPO(ts)


def tmps_to_dense(state: TemporalMPS) -> np.ndarray:
    """Full tensor over the physical legs, by direct sequential contraction."""
    vec = state.tensors[0][0]  # (p0, b1)
    for t in state.tensors[1:]:
        vec = np.tensordot(vec, t, axes=([-1], [0]))
    return vec[..., 0]


def tmpo_to_dense(op: TemporalMPO) -> np.ndarray:
    """Full tensor with legs (pl_1..pl_m, pr_1..pr_m)."""
    m = op.n_sites
    t = op.tensors[0][0]  # (pl, pr, b)
    for w in op.tensors[1:]:
        t = np.tensordot(t, w, axes=([-1], [0]))
    t = t[..., 0]
    # axes currently (pl1, pr1, pl2, pr2, ...)
    perm = list(range(0, 2 * m, 2)) + list(range(1, 2 * m, 2))
    return t.transpose(perm)


def dense_overlap(bra: TemporalMPS, ket: TemporalMPS) -> complex:
    a = tmps_to_dense(bra).reshape(-1)
    b = tmps_to_dense(ket).reshape(-1)
    return complex(np.sum(a * b))


def dense_apply(op: TemporalMPO, state: TemporalMPS) -> np.ndarray:
    """Dense result of applying a column to an environment."""
    m = state.n_sites
    full_op = tmpo_to_dense(op)  # (pl..., pr...)
    vec = tmps_to_dense(state).reshape(-1)
    dims_l = [t.shape[1] for t in op.tensors]
    dims_r = [t.shape[2] for t in op.tensors]
    mat = full_op.reshape(int(np.prod(dims_l)), int(np.prod(dims_r)))
    if state.role == "bra":
        return (vec @ mat).reshape(dims_r)
    return (mat @ vec).reshape(dims_l)


def dense_rtm(bra: TemporalMPS, ket: TemporalMPS, t: int) -> np.ndarray:
    """Partial trace of |ket><bra| / <bra|ket> over temporal sites > t."""
    a = tmps_to_dense(bra)
    b = tmps_to_dense(ket)
    phys = a.shape
    dl = int(np.prod(phys[:t]))
    dr = int(np.prod(phys[t:]))
    am = a.reshape(dl, dr)
    bm = b.reshape(dl, dr)
    ov = np.sum(am * bm)
    return (bm @ am.T) / ov  # tau[p_keep, p'_keep]


def spectrum_sorted(mat: np.ndarray) -> np.ndarray:
    lam = np.linalg.eigvals(mat)
    return lam[np.argsort(-np.abs(lam))]


def conj_state(state: TemporalMPS, role) -> TemporalMPS:
    return TemporalMPS([t.conj() for t in state.tensors], role)
