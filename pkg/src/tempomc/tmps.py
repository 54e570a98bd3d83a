"""Temporal MPS/MPO containers and bond truncation.

A temporal MPS (tMPS) is an MPS whose chain axis runs along the time
direction of the spatio-temporal network.  Site tensors are indexed
``(bond_early, phys, bond_late)``; terminal bonds have extent 1.  A "bra"
tMPS is a left boundary environment and a "ket" one a right environment;
their overlap is a plain bilinear contraction, no complex conjugation is
ever applied implicitly (the network is unfolded).

A temporal MPO is a spatial column of the network viewed as an operator on
temporal environments; site tensors are ``(bond_early, phys_left,
phys_right, bond_late)`` where ``phys_left`` faces the left environment.

Two truncation schemes are provided:

* ``compress_rdm``      -- per-vector compression: canonicalize, then
  truncate each bond on its own (Hermitian) reduced density matrix.
* ``rtm_truncate_pair`` -- two-sided truncation of a bra/ket pair on the
  complex spectrum of the bond reduced transition matrix (RTM), using
  biorthogonal spectral projectors.  The kept-trace identity
  ``overlap_after / overlap_before = sum of kept eigenvalues`` holds
  exactly for the eigenprojector mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .tensor_ops import ShapeMismatchError, _magnitude_order

__all__ = [
    "TemporalMPS",
    "TemporalMPO",
    "RtmTruncationReport",
    "ZeroOverlapError",
    "overlap",
    "overlap_log",
    "apply_mpo",
    "compress_rdm",
    "rtm_truncate_pair",
    "rtm_spectrum",
]

BRA = "bra"
KET = "ket"

_ZERO_OVERLAP_RTOL = 1e-14  # relative to the norms of the boundary matrices
_COND_LIMIT = 1e8           # biorthogonality condition triggering the fallback
_RANK_TOL = 1e-13           # RTM eigenvalues below this (relative) count as rank noise
_ZERO_WEIGHT = 1e-28        # squared-weight floor for exact-rank reduction


class ZeroOverlapError(ArithmeticError):
    """Bra/ket overlap vanished; RTM normalization is undefined."""

    def __init__(self, message: str, bond: Optional[int] = None):
        super().__init__(message)
        self.bond = bond


@dataclass
class TemporalMPS:
    """Boundary environment as an MPS along the time axis.

    ``role`` tags the side of the network the state lives on ("bra" for a
    left environment, "ket" for a right one).  ``center`` is the
    orthogonality center site when one is known, else None.
    """

    tensors: List[np.ndarray]
    role: str = KET
    center: Optional[int] = None

    def __post_init__(self):
        if self.role not in (BRA, KET):
            raise ValueError(f"role must be 'bra' or 'ket', got {self.role!r}")
        for i, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise ShapeMismatchError(f"site {i}: expected rank-3 tensor, got {t.shape}")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[2] != self.tensors[i + 1].shape[0]:
                raise ShapeMismatchError(
                    f"bond mismatch between sites {i} and {i + 1}: "
                    f"{self.tensors[i].shape} vs {self.tensors[i + 1].shape}")
        if self.tensors and (self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1):
            raise ShapeMismatchError("terminal bonds must have extent 1")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def physical_dims(self) -> Tuple[int, ...]:
        return tuple(t.shape[1] for t in self.tensors)

    @property
    def bond_dims(self) -> Tuple[int, ...]:
        # internal bonds only
        return tuple(t.shape[2] for t in self.tensors[:-1])

    def copy(self) -> "TemporalMPS":
        return TemporalMPS([t.copy() for t in self.tensors], self.role, self.center)

    def conj(self) -> "TemporalMPS":
        return TemporalMPS([t.conj() for t in self.tensors], self.role, self.center)

    def norm(self) -> float:
        """Frobenius norm sqrt(<conj(psi)|psi>), computed stably."""
        mant, lg = overlap_log(self.conj_view(), self, _check=False)
        if mant == 0:
            return 0.0
        return math.sqrt(abs(mant)) * math.exp(0.5 * lg)

    def conj_view(self) -> "TemporalMPS":
        return TemporalMPS([t.conj() for t in self.tensors], BRA, self.center)

    def scale(self, factor: complex) -> "TemporalMPS":
        """Multiply the represented state by a scalar (applied to one site)."""
        ts = [t.copy() for t in self.tensors]
        ts[-1] = ts[-1] * factor
        return TemporalMPS(ts, self.role, self.center)


@dataclass
class TemporalMPO:
    """Spatial column acting on temporal environments."""

    tensors: List[np.ndarray]

    def __post_init__(self):
        for i, t in enumerate(self.tensors):
            if t.ndim != 4:
                raise ShapeMismatchError(f"site {i}: expected rank-4 tensor, got {t.shape}")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[3] != self.tensors[i + 1].shape[0]:
                raise ShapeMismatchError(f"bond mismatch between sites {i} and {i + 1}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def left_phys_dims(self) -> Tuple[int, ...]:
        return tuple(t.shape[1] for t in self.tensors)

    @property
    def right_phys_dims(self) -> Tuple[int, ...]:
        return tuple(t.shape[2] for t in self.tensors)


# ---------------------------------------------------------------------------
# overlap and application


def _check_pair(bra: TemporalMPS, ket: TemporalMPS):
    if bra.n_sites != ket.n_sites:
        raise ShapeMismatchError(f"length mismatch: {bra.n_sites} vs {ket.n_sites}")
    if bra.physical_dims != ket.physical_dims:
        raise ShapeMismatchError(
            f"physical dims differ: {bra.physical_dims} vs {ket.physical_dims}")


def overlap_log(bra: TemporalMPS, ket: TemporalMPS, _check: bool = True) -> Tuple[complex, float]:
    """Overlap as ``(mantissa, log_scale)`` with value ``mantissa * exp(log_scale)``.

    No conjugation is applied; the bra tensors enter as stored.
    """
    if _check:
        _check_pair(bra, ket)
    env = np.ones((1, 1), dtype=np.complex128)
    lg = 0.0
    for tb, tk in zip(bra.tensors, ket.tensors):
        tmp = np.tensordot(env, tb, axes=([0], [0]))        # (kb, p, a')
        env = np.tensordot(tmp, tk, axes=([0, 1], [0, 1]))  # (a', b')
        s = float(np.max(np.abs(env)))
        if s > 0 and (s > 1e50 or s < 1e-50):
            env = env / s
            lg += math.log(s)
    return complex(env[0, 0]), lg


def overlap(bra: TemporalMPS, ket: TemporalMPS) -> complex:
    """Exact bra/ket contraction by left-to-right environment accumulation."""
    mant, lg = overlap_log(bra, ket)
    return mant * math.exp(lg)


def apply_mpo(op: TemporalMPO, state: TemporalMPS) -> TemporalMPS:
    """Apply a column to an environment; bond extents multiply.

    A bra state contracts the column's left physical legs and exposes the
    right ones; a ket state the reverse.
    """
    if op.n_sites != state.n_sites:
        raise ShapeMismatchError(f"length mismatch: {op.n_sites} vs {state.n_sites}")
    phys_axis = 1 if state.role == BRA else 2
    out = []
    for t, w in zip(state.tensors, op.tensors):
        if t.shape[1] != w.shape[phys_axis]:
            raise ShapeMismatchError(
                f"physical extent {t.shape[1]} does not match column extent "
                f"{w.shape[phys_axis]}")
        # t (a,p,b), w (c,pl,pr,d); contract p with pl (bra) or pr (ket)
        tmp = np.tensordot(t, w, axes=([1], [phys_axis]))  # (a, b, c, q, d)
        tmp = tmp.transpose(0, 2, 3, 1, 4)
        s = tmp.shape
        out.append(np.ascontiguousarray(tmp.reshape(s[0] * s[1], s[2], s[3] * s[4])))
    return TemporalMPS(out, state.role, None)


# ---------------------------------------------------------------------------
# per-vector (density matrix) compression


def _row_svd(mat: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD of a matrix, routing wide shapes through an LQ factorization so
    the dense SVD runs on a small square factor."""
    dl, dr = mat.shape
    if dr > 2 * dl:
        q, r = np.linalg.qr(mat.conj().T)
        u, s, vh_small = np.linalg.svd(r.conj().T)
        return u, s, vh_small @ q.conj().T
    return np.linalg.svd(mat, full_matrices=False)


def _two_pass_compress(tensors: List[np.ndarray], chi: Optional[int], cutoff: float
                       ) -> Tuple[List[np.ndarray], float]:
    """Left-to-right QR canonicalization, then right-to-left SVD truncation.

    Returns the new tensors (orthogonality center at site 0) and the total
    relative squared weight discarded over all bonds.
    """
    ts = list(tensors)
    m = len(ts)
    if m == 1:
        return [ts[0].copy()], 0.0
    for i in range(m - 1):
        dl, p, dr = ts[i].shape
        q, r = np.linalg.qr(ts[i].reshape(dl * p, dr))
        ts[i] = q.reshape(dl, p, q.shape[1])
        ts[i + 1] = np.tensordot(r, ts[i + 1], axes=([1], [0]))
        # guard against overall scale drift over long chains
        s = float(np.max(np.abs(ts[i + 1])))
        if s > 1e120:
            ts[i + 1] = ts[i + 1] / s
            ts[0] = ts[0] * s  # reattach later; cheap since site 0 is small
    discarded = 0.0
    for i in range(m - 1, 0, -1):
        dl, p, dr = ts[i].shape
        u, s, vh = _row_svd(ts[i].reshape(dl, p * dr))
        w = s.astype(float) ** 2
        total = float(w.sum())
        if total == 0.0:
            keep = 1
        else:
            keep = max(1, int(np.sum(w > cutoff * total)))
            if chi is not None:
                keep = min(keep, chi)
        discarded += float(w[keep:].sum() / total) if total > 0 else 0.0
        ts[i] = np.ascontiguousarray(vh[:keep].reshape(keep, p, dr))
        ts[i - 1] = np.tensordot(ts[i - 1], u[:, :keep] * s[:keep], axes=([2], [0]))
    return ts, discarded


def compress_rdm(state: TemporalMPS, chi: int, cutoff: float = 0.0
                 ) -> Tuple[TemporalMPS, float]:
    """Standard single-sided compression; every bond extent ends <= chi."""
    if chi < 1:
        raise ValueError("chi must be >= 1")
    ts, discarded = _two_pass_compress(state.tensors, chi, cutoff)
    return TemporalMPS(ts, state.role, 0), discarded


def _rank_reduce(tensors: List[np.ndarray]) -> List[np.ndarray]:
    """Strip numerically-zero bond directions without touching real ones."""
    ts, _ = _two_pass_compress(tensors, None, _ZERO_WEIGHT)
    return ts


# ---------------------------------------------------------------------------
# reduced transition matrices


def _boundary_right(bra_ts, ket_ts) -> dict:
    """rho_right[b][a, r]: contraction of sites b+1..m (1-based bonds)."""
    m = len(bra_ts)
    env = np.ones((1, 1), dtype=np.complex128)
    out = {m: (env, 0.0)}
    lg = 0.0
    for t in range(m - 1, 0, -1):
        tmp = np.tensordot(bra_ts[t], env, axes=([2], [0]))
        env = np.tensordot(tmp, ket_ts[t], axes=([1, 2], [1, 2]))
        nrm = float(np.linalg.norm(env))
        if nrm > 0:
            env = env / nrm
            lg += math.log(nrm)
        out[t] = (env, lg)
    return out


def _step_left(env: np.ndarray, lg: float, tb: np.ndarray, tk: np.ndarray
               ) -> Tuple[np.ndarray, float]:
    tmp = np.tensordot(env, tb, axes=([0], [0]))
    env = np.tensordot(tmp, tk, axes=([0, 1], [0, 1]))
    nrm = float(np.linalg.norm(env))
    if nrm > 0:
        env = env / nrm
        lg += math.log(nrm)
    return env, lg


@dataclass
class RtmTruncationReport:
    """Outcome of one bond RTM truncation."""

    bond: int
    kept_rank: int
    kept_sum: complex
    discarded_sum: complex
    biorth_condition: float
    fallback: bool = False


def _bond_rtm(rho_l: np.ndarray, rho_r: np.ndarray, bond: int) -> Tuple[np.ndarray, complex]:
    """Unit-trace RTM on the ket bond space: M = rho_r^T rho_l / tr."""
    ov = complex(np.sum(rho_l * rho_r))
    scale = float(np.linalg.norm(rho_l)) * float(np.linalg.norm(rho_r))
    if abs(ov) < _ZERO_OVERLAP_RTOL * max(scale, 1e-300):
        raise ZeroOverlapError(f"overlap collapsed at bond {bond}", bond)
    return (rho_r.T @ rho_l) / ov, ov


def _eig_projectors(m: np.ndarray, keep: int):
    lam, v = np.linalg.eig(m)
    order = _magnitude_order(lam)
    lam = lam[order]
    v = v[:, order]
    w_inv = np.linalg.inv(v)
    return lam, v[:, :keep], w_inv[:keep, :], v, w_inv


def _oblique_svd_projectors(m: np.ndarray, keep: int):
    """Oblique projector onto the dominant left singular space of m."""
    u, s, vh = np.linalg.svd(m)
    uk, vhk = u[:, :keep], vh[:keep]
    core = vhk @ uk
    try:
        x = uk @ np.linalg.inv(core)
    except np.linalg.LinAlgError:
        x = uk @ np.linalg.pinv(core)
    return x, vhk


def _truncate_bonds(bra_ts: List[np.ndarray], ket_ts: List[np.ndarray], chi: int, *,
                    sides: str = "both", mode: str = "eig", mirror: bool = False,
                    only_bond: Optional[int] = None, rank_tol: float = _RANK_TOL,
                    cond_limit: float = _COND_LIMIT,
                    ) -> Tuple[List[np.ndarray], List[np.ndarray], List[RtmTruncationReport]]:
    """RTM truncation sweep over the bonds of a bra/ket pair.

    Bonds whose extents already satisfy the budget are left untouched.  In
    ``mirror`` mode bra and ket are the same stored object (transpose
    gluing); a single set of projectors is absorbed once.

    ``rho_right`` matrices are precomputed once: a truncation at bond b only
    modifies sites b and b+1, which later bonds' right parts never contain.
    """
    bra_ts = list(bra_ts)
    ket_ts = list(ket_ts) if not mirror else bra_ts
    m = len(bra_ts)
    reports: List[RtmTruncationReport] = []
    if m == 1:
        return bra_ts, ket_ts, reports
    rho_rights = _boundary_right(bra_ts, ket_ts)
    rho_l = np.ones((1, 1), dtype=np.complex128)
    lg_l = 0.0
    for b in range(1, m):
        rho_l, lg_l = _step_left(rho_l, lg_l, bra_ts[b - 1], ket_ts[b - 1])
        chi_bra, chi_ket = rho_l.shape
        if only_bond is not None and b != only_bond:
            continue
        want_bra = sides in ("both", "bra") and chi_bra > chi
        want_ket = (sides in ("both", "ket") or mirror) and chi_ket > chi
        if only_bond is None and not (want_bra or want_ket):
            continue
        rho_r = rho_rights[b][0]
        mat, ov = _bond_rtm(rho_l, rho_r, b)
        trace = complex(np.trace(mat))  # 1 by construction, kept for the report

        keep_cap = min(chi, chi_bra, chi_ket)
        rep = None
        # fallback ladder: widen (near-degenerate clusters split by the cap),
        # shrink (ill-conditioned junk tail), then oblique SVD projectors
        for attempt, (use_mode, cap) in enumerate(
                [(mode, keep_cap), (mode, min(keep_cap + 4, chi_ket, chi_bra)),
                 (mode, -1), ("svd", keep_cap)]):
            if use_mode == "eig":
                lam, vk, wk, v_all, w_all = _eig_projectors(mat, max(cap, 1))
                lam_max = max(np.abs(lam[0]), 1e-300)
                if cap == -1:  # shrink rung: drop the badly-amplified tail
                    r_eff = int(np.sum(np.abs(lam) > 1e-8 * lam_max))
                    cap = keep_cap
                else:
                    r_eff = int(np.sum(np.abs(lam) > rank_tol * lam_max))
                k = max(1, min(cap, r_eff))
                vk, wk = v_all[:, :k], w_all[:k, :]
                lam_k = lam[:k]
                kept = complex(np.sum(lam_k))
                if mirror:
                    # Frobenius norms: cheap upper-bound proxy for the
                    # spectral condition of the oblique insertion
                    cond = float(np.linalg.norm(vk) * np.linalg.norm(wk))
                    if cond > cond_limit and attempt < 3:
                        continue
                    bra_ts[b - 1] = np.tensordot(bra_ts[b - 1], vk, axes=([2], [0]))
                    bra_ts[b] = np.tensordot(wk, bra_ts[b], axes=([1], [0]))
                    rho_l = vk.T @ rho_l @ vk
                    rep = RtmTruncationReport(b, k, kept, trace - kept, cond,
                                              fallback=attempt > 0)
                    break
                # ket side: insert V W^dag; bra side: derived spectral pair of
                # the transposed construction, exactly biorthonormal.
                lam_is = lam_k ** (-0.5)
                vp = (rho_r @ w_all.T[:, :k]) * lam_is[None, :]
                wp = (lam_is[:, None] * (v_all.T[:k, :] @ rho_l.T)) / ov
                cond = max(float(np.linalg.norm(vk) * np.linalg.norm(wk)),
                           float(np.linalg.norm(vp) * np.linalg.norm(wp) * abs(ov)))
                if cond > cond_limit and attempt < 3:
                    continue
                new_rho = rho_l
                if sides in ("both", "ket") and k < chi_ket:
                    ket_ts[b - 1] = np.tensordot(ket_ts[b - 1], vk, axes=([2], [0]))
                    ket_ts[b] = np.tensordot(wk, ket_ts[b], axes=([1], [0]))
                    new_rho = new_rho @ vk
                if sides in ("both", "bra") and k < chi_bra:
                    bra_ts[b - 1] = np.tensordot(bra_ts[b - 1], vp, axes=([2], [0]))
                    bra_ts[b] = np.tensordot(wp, bra_ts[b], axes=([1], [0]))
                    new_rho = vp.T @ new_rho
                rho_l = new_rho
                rep = RtmTruncationReport(b, k, kept, trace - kept, cond,
                                          fallback=attempt > 0)
                break
            # oblique SVD fallback
            k = max(1, cap)
            x_k, y_k = _oblique_svd_projectors(mat, k)
            kept = complex(np.trace(mat @ (x_k @ y_k)))
            cond = float(np.linalg.norm(x_k) * np.linalg.norm(y_k))
            new_rho = rho_l
            if (sides in ("both", "ket") or mirror) and k < chi_ket:
                ket_ts[b - 1] = np.tensordot(ket_ts[b - 1], x_k, axes=([2], [0]))
                ket_ts[b] = np.tensordot(y_k, ket_ts[b], axes=([1], [0]))
                new_rho = new_rho @ x_k
            if not mirror and sides in ("both", "bra") and k < chi_bra:
                mat_bra = (rho_r @ rho_l.T) / ov
                xb, yb = _oblique_svd_projectors(mat_bra, k)
                bra_ts[b - 1] = np.tensordot(bra_ts[b - 1], xb, axes=([2], [0]))
                bra_ts[b] = np.tensordot(yb, bra_ts[b], axes=([1], [0]))
                new_rho = xb.T @ new_rho
            elif mirror and k < chi_bra:
                new_rho = x_k.T @ new_rho  # same insertion serves both roles
            rho_l = new_rho
            rep = RtmTruncationReport(b, k, kept, trace - kept, cond, fallback=True)
            break
        reports.append(rep)
    return bra_ts, ket_ts, reports


def rtm_truncate_pair(bra: TemporalMPS, ket: TemporalMPS, bond: int, chi: int,
                      mode: str = "eig"
                      ) -> Tuple[TemporalMPS, TemporalMPS, RtmTruncationReport]:
    """Truncate one bond of a bra/ket pair on the bond RTM spectrum.

    ``bond`` is 1-based, between temporal sites ``bond`` and ``bond + 1``.
    Keeps the ``chi`` eigenvalues of largest magnitude; absorbs the
    biorthogonal projector pair into the ket and the transposed construction
    into the bra.  The overlap changes by exactly the kept eigenvalue sum.
    """
    _check_pair(bra, ket)
    if not 1 <= bond <= bra.n_sites - 1:
        raise IndexError(f"bond {bond} out of range 1..{bra.n_sites - 1}")
    if chi < 1:
        raise ValueError("chi must be >= 1")
    mirror = bra.tensors is ket.tensors
    bts, kts, reports = _truncate_bonds(
        bra.tensors, ket.tensors, chi, sides="both", mode=mode,
        mirror=mirror, only_bond=bond)
    report = reports[0] if reports else RtmTruncationReport(
        bond, min(chi, bra.tensors[bond - 1].shape[2]), 1.0 + 0j, 0.0 + 0j, 1.0)
    new_bra = TemporalMPS(bts, bra.role, None)
    new_ket = new_bra if mirror else TemporalMPS(kts, ket.role, None)
    return new_bra, new_ket, report


def pair_compress(bra: TemporalMPS, ket: TemporalMPS, chi: int, *,
                  sides: str = "both", mode: str = "eig"
                  ) -> Tuple[TemporalMPS, TemporalMPS, List[RtmTruncationReport]]:
    """Compress a pair to bond budget chi: exact rank reduction, then RTM.

    The rank reduction strips numerically-zero directions with orthogonal
    factorizations (stable), so the RTM stage only ever selects among
    genuinely resolved directions.  In the rank-saturated regime the result
    preserves the pair overlap to machine precision.
    """
    mirror = bra.tensors is ket.tensors or bra is ket
    bts = _rank_reduce(bra.tensors) if sides in ("both", "bra") or mirror else bra.tensors
    if mirror:
        kts = bts
    elif sides in ("both", "ket"):
        kts = _rank_reduce(ket.tensors)
    else:
        kts = ket.tensors
    bts, kts, reports = _truncate_bonds(bts, kts, chi, sides=sides, mode=mode,
                                        mirror=mirror)
    new_bra = TemporalMPS(bts, bra.role, None)
    new_ket = new_bra if mirror else TemporalMPS(kts, ket.role, None)
    return new_bra, new_ket, reports


def rtm_boundaries(bra: TemporalMPS, ket: TemporalMPS, t: int
                   ) -> Tuple[np.ndarray, np.ndarray, complex]:
    """(rho_left, rho_right, scaled overlap) at temporal cut t (1-based)."""
    _check_pair(bra, ket)
    if not 1 <= t <= bra.n_sites - 1:
        raise IndexError(f"cut {t} out of range 1..{bra.n_sites - 1}")
    rho_l = np.ones((1, 1), dtype=np.complex128)
    lg = 0.0
    for b in range(t):
        rho_l, lg = _step_left(rho_l, lg, bra.tensors[b], ket.tensors[b])
    env = np.ones((1, 1), dtype=np.complex128)
    for s in range(bra.n_sites - 1, t - 1, -1):
        tmp = np.tensordot(bra.tensors[s], env, axes=([2], [0]))
        env = np.tensordot(tmp, ket.tensors[s], axes=([1, 2], [1, 2]))
        nrm = float(np.linalg.norm(env))
        if nrm > 0:
            env = env / nrm
    ov = complex(np.sum(rho_l * env))
    return rho_l, env, ov


def rtm_spectrum(bra: TemporalMPS, ket: TemporalMPS, t: int) -> np.ndarray:
    """Unit-trace RTM spectrum at temporal cut t, magnitude-sorted."""
    rho_l, rho_r, ov = rtm_boundaries(bra, ket, t)
    scale = float(np.linalg.norm(rho_l)) * float(np.linalg.norm(rho_r))
    if abs(ov) < _ZERO_OVERLAP_RTOL * max(scale, 1e-300):
        raise ZeroOverlapError(f"overlap collapsed at cut {t}", t)
    mat = (rho_r.T @ rho_l) / ov
    lam = np.linalg.eigvals(mat)
    return lam[_magnitude_order(lam)]
