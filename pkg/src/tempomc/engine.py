"""Transverse contraction engine.

Environments ``L_i`` (bra, columns left of cut i) and ``R_i`` (ket, columns
right of cut i) are built from the network edges inward, truncated against
each other on reduced transition matrices, and refined by sweeps until every
cut reports the same overlap.  Cuts are numbered 1..n-1; cut i separates
columns 0..i-1 from columns i..n-1 (0-based columns).

Environments are stored with unit Frobenius norm; their true magnitude is
carried separately as a log factor, so overlaps of long chains neither
overflow nor underflow.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .network import ColumnSet, QuenchSpec, CircuitSpec, build_columns, build_circuit_columns
from .tmps import (BRA, KET, TemporalMPS, TemporalMPO, ZeroOverlapError, apply_mpo,
                   compress_rdm, overlap_log, pair_compress)

__all__ = [
    "EnvironmentSet",
    "FixedPointResult",
    "sweep_environments",
    "amplitude",
    "contract_exact",
    "AmplitudeEngine",
    "fixed_point",
    "edge_environment",
]

_RDM_BOOTSTRAP_CHI = 8  # first-sweep fallback when no compatible partner exists


def edge_environment(column: TemporalMPO, side: str) -> TemporalMPS:
    """Exact boundary environment from an edge column (trivial outer legs)."""
    ts = []
    for t in column.tensors:
        if side == "left":
            if t.shape[1] != 1:
                raise ValueError("left edge column must have trivial left legs")
            ts.append(np.ascontiguousarray(t[:, 0, :, :]))
        else:
            if t.shape[2] != 1:
                raise ValueError("right edge column must have trivial right legs")
            ts.append(np.ascontiguousarray(t[:, :, 0, :]))
    return TemporalMPS(ts, BRA if side == "left" else KET)


def contract_exact(columns: ColumnSet, direction: str = "LR") -> complex:
    """Exact (untruncated) contraction of all columns; test anchor only."""
    n = columns.n
    if n < 2:
        raise ValueError("need at least two columns")
    cols = columns.columns
    if direction == "LR":
        env = edge_environment(cols[0], "left")
        for i in range(1, n - 1):
            env = apply_mpo(cols[i], env)
        mant, lg = overlap_log(env, edge_environment(cols[-1], "right"))
    else:
        env = edge_environment(cols[-1], "right")
        for i in range(n - 2, 0, -1):
            env = apply_mpo(cols[i], env)
        mant, lg = overlap_log(edge_environment(cols[0], "left"), env)
    return mant * math.exp(lg)


# ---------------------------------------------------------------------------
# environment sweeping


@dataclass
class EnvironmentSet:
    """Converged boundary environments for every cut of a finite network."""

    left: Dict[int, TemporalMPS]
    right: Dict[int, TemporalMPS]
    log_left: Dict[int, float]
    log_right: Dict[int, float]
    overlaps: Dict[int, complex]
    overlap_logs: Dict[int, Tuple[complex, float]]
    sweeps: int
    converged: bool
    spread: float
    fallback_cuts: List[int] = field(default_factory=list)

    def cut_values(self) -> List[complex]:
        return [self.overlaps[i] for i in sorted(self.overlaps)]


class _Sweeper:
    """Stateful environment builder over one closed column set."""

    def __init__(self, columns: ColumnSet, chi: int, tol: float, max_sweeps: int,
                 trunc_mode: str = "rtm", rtm_mode: str = "eig"):
        if columns.n < 2:
            raise ValueError("need at least two columns")
        self.colset = columns
        self.cols = [columns.column(i) for i in range(columns.n)]
        self.n = columns.n
        self.chi = chi
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.trunc_mode = trunc_mode
        self.rtm_mode = rtm_mode
        self.left: Dict[int, TemporalMPS] = {}
        self.right: Dict[int, TemporalMPS] = {}
        self.lgl: Dict[int, float] = {}
        self.lgr: Dict[int, float] = {}
        self.fallback_cuts: List[int] = []
        self.sweeps_done = 0

    # -- construction helpers ------------------------------------------------

    def _normalized(self, env: TemporalMPS, lg: float, cut: int) -> Tuple[TemporalMPS, float]:
        nrm = env.norm()
        if nrm == 0 or not math.isfinite(nrm):
            raise ZeroOverlapError(f"environment vanished at cut {cut}", cut)
        return env.scale(1.0 / nrm), lg + math.log(nrm)

    def _fresh_left(self, cut: int) -> Tuple[TemporalMPS, float]:
        env = apply_mpo(self.cols[cut - 1], self.left[cut - 1])
        return env, self.lgl[cut - 1]

    def _fresh_right(self, cut: int) -> Tuple[TemporalMPS, float]:
        env = apply_mpo(self.cols[cut], self.right[cut + 1])
        return env, self.lgr[cut + 1]

    def _compat(self, a: TemporalMPS, b: TemporalMPS) -> bool:
        return a.physical_dims == b.physical_dims

    def _store_left(self, cut, env, lg):
        env, lg = self._normalized(env, lg, cut)
        self.left[cut] = env
        self.lgl[cut] = lg

    def _store_right(self, cut, env, lg):
        env, lg = self._normalized(env, lg, cut)
        self.right[cut] = env
        self.lgr[cut] = lg

    def _truncate_single(self, fresh: TemporalMPS, partner: Optional[TemporalMPS],
                         side: str, cut: int, bootstrap: bool = False) -> TemporalMPS:
        if self.trunc_mode == "rdm":
            return compress_rdm(fresh, self.chi)[0]
        if partner is None:
            out, _ = compress_rdm(fresh, _RDM_BOOTSTRAP_CHI if bootstrap else self.chi)
            return out
        try:
            if side == "bra":
                out, _, _ = pair_compress(fresh, partner, self.chi, sides="bra",
                                          mode=self.rtm_mode)
            else:
                _, out, _ = pair_compress(partner, fresh, self.chi, sides="ket",
                                          mode=self.rtm_mode)
            return out
        except ZeroOverlapError:
            self.fallback_cuts.append(cut)
            out, _ = compress_rdm(fresh, self.chi)
            return out

    def _truncate_joint(self, lf: TemporalMPS, rf: TemporalMPS, cut_l: int, cut_r: int
                        ) -> Tuple[TemporalMPS, TemporalMPS]:
        """Truncate a fresh pair jointly; in the rank-saturated regime this is
        exact and converges in a single pass.

        When the joint reduced-transition spectrum genuinely truncates (kept
        eigenvalue sums away from unity), the complex discarded weight can
        inflate the overlap multiplicatively; those refreshes are redone
        one-sided against the stored partners, which preserves each pair
        overlap exactly and lets ranks grow over subsequent sweeps instead.
        """
        if self.trunc_mode == "rdm":
            return compress_rdm(lf, self.chi)[0], compress_rdm(rf, self.chi)[0]
        try:
            nl, nr, reports = pair_compress(lf, rf, self.chi, mode=self.rtm_mode)
            if all(abs(rep.kept_sum - 1.0) <= 0.05 for rep in reports if rep is not None):
                return nl, nr
        except ZeroOverlapError:
            self.fallback_cuts.append(cut_l)
            return compress_rdm(lf, self.chi)[0], compress_rdm(rf, self.chi)[0]
        partner_r = self.right.get(cut_l) or self._find_partner(self.right, lf, lo=cut_l)
        partner_l = self.left.get(cut_r) or self._find_partner(self.left, rf, hi=cut_r)
        nl = self._truncate_single(lf, partner_r, "bra", cut_l, bootstrap=True)
        nr = self._truncate_single(rf, partner_l, "ket", cut_r, bootstrap=True)
        return nl, nr

    # -- passes ----------------------------------------------------------------

    def first_pass(self):
        n = self.n
        self._store_left(1, edge_environment(self.cols[0], "left"), 0.0)
        self._store_right(n - 1, edge_environment(self.cols[-1], "right"), 0.0)
        for s in range(1, n - 1):
            i_l, i_r = 1 + s, n - 1 - s
            lf = self._fresh_left(i_l) if i_l not in self.left else None
            rf = self._fresh_right(i_r) if (i_r >= 1 and i_r not in self.right) else None
            if (lf is not None and rf is not None and i_l <= i_r
                    and self.trunc_mode == "rtm" and self._compat(lf[0], rf[0])):
                nl, nr = self._truncate_joint(lf[0], rf[0], i_l, i_r)
                self._store_left(i_l, nl, lf[1])
                self._store_right(i_r, nr, rf[1])
                continue
            if lf is not None:
                partner = self._find_partner(self.right, lf[0], lo=i_l)
                env = self._truncate_single(lf[0], partner, "bra", i_l, bootstrap=True)
                self._store_left(i_l, env, lf[1])
            if rf is not None:
                partner = self._find_partner(self.left, rf[0], hi=i_r)
                env = self._truncate_single(rf[0], partner, "ket", i_r, bootstrap=True)
                self._store_right(i_r, env, rf[1])

    def _find_partner(self, pool: Dict[int, TemporalMPS], fresh: TemporalMPS,
                      lo: Optional[int] = None, hi: Optional[int] = None
                      ) -> Optional[TemporalMPS]:
        """Nearest initialized environment with matching physical extents."""
        cuts = sorted(pool)
        if lo is not None:
            cuts = [c for c in cuts if c >= lo] + [c for c in cuts if c < lo]
        if hi is not None:
            cuts = [c for c in cuts if c <= hi][::-1] + [c for c in cuts if c > hi]
        for c in cuts:
            if self._compat(fresh, pool[c]):
                return pool[c]
        return None

    def refresh_cut(self, i: int):
        """Rebuild both environments at cut i from their neighbors, truncate jointly."""
        lf = self._fresh_left(i) if i >= 2 else None
        rf = self._fresh_right(i) if i <= self.n - 2 else None
        if lf is not None and rf is not None:
            if self.trunc_mode == "rtm" and self._compat(lf[0], rf[0]):
                nl, nr = self._truncate_joint(lf[0], rf[0], i, i)
            else:
                nl = self._truncate_single(lf[0], self.right.get(i), "bra", i)
                nr = self._truncate_single(rf[0], self.left.get(i), "ket", i)
            self._store_left(i, nl, lf[1])
            self._store_right(i, nr, rf[1])
        elif lf is not None:
            env = self._truncate_single(lf[0], self.right[i], "bra", i)
            self._store_left(i, env, lf[1])
        elif rf is not None:
            env = self._truncate_single(rf[0], self.left[i], "ket", i)
            self._store_right(i, env, rf[1])

    def cut_overlaps(self) -> Dict[int, Tuple[complex, float]]:
        """Per-cut overlaps as (mantissa, total log scale).

        The stored environments have unit norm, so ``mantissa * exp(lg -
        lgl - lgr)`` is the overlap relative to the environment norms; its
        magnitude falling to rounding level signals a collapsed cut.
        """
        out = {}
        for i in range(1, self.n):
            mant, lg = overlap_log(self.left[i], self.right[i])
            out[i] = (mant, lg + self.lgl[i] + self.lgr[i])
        return out

    def relative_magnitude(self, i: int, ov: Tuple[complex, float]) -> float:
        mant, lg = ov
        rel_log = lg - self.lgl[i] - self.lgr[i]
        return abs(mant) * math.exp(min(rel_log, 700.0))

    @staticmethod
    def _spread(ovs: Dict[int, Tuple[complex, float]]) -> float:
        logs = []
        for mant, lg in ovs.values():
            a = abs(mant)
            logs.append(lg + math.log(a) if a > 0 else -math.inf)
        ref = max(logs)
        if ref == -math.inf:
            return 0.0
        rel = []
        for (mant, lg), la in zip(ovs.values(), logs):
            if la == -math.inf:
                rel.append(0.0)
            else:
                rel.append(mant / abs(mant) * math.exp(la - ref))
        rel = np.asarray(rel)
        return float(np.abs(rel[:, None] - rel[None, :]).max())

    def _max_bond(self) -> int:
        best = 1
        for env in list(self.left.values()) + list(self.right.values()):
            for t in env.tensors[:-1]:
                best = max(best, t.shape[2])
        return best

    def run(self) -> EnvironmentSet:
        self.first_pass()
        ovs = self.cut_overlaps()
        spread = self._spread(ovs)
        prev = math.inf
        prev_bond = self._max_bond()
        while self.sweeps_done < self.max_sweeps and spread > self.tol:
            for i in range(1, self.n):
                self.refresh_cut(i)
            for i in range(self.n - 1, 0, -1):
                self.refresh_cut(i)
            self.sweeps_done += 1
            ovs = self.cut_overlaps()
            spread = self._spread(ovs)
            bond = self._max_bond()
            # stop on stagnation only once the bond budget stopped growing
            if spread > 0.9 * prev and bond <= prev_bond:
                break
            prev = spread
            prev_bond = bond
        # collapse diagnostics: every cut must report a usable overlap
        for i, ov in ovs.items():
            if self.relative_magnitude(i, ov) < 1e-14:
                raise ZeroOverlapError(f"overlap collapsed at cut {i}", i)
        values = {i: mant * math.exp(lg) for i, (mant, lg) in ovs.items()}
        return EnvironmentSet(
            left=dict(self.left), right=dict(self.right),
            log_left=dict(self.lgl), log_right=dict(self.lgr),
            overlaps=values, overlap_logs=ovs,
            sweeps=self.sweeps_done, converged=spread <= self.tol, spread=spread,
            fallback_cuts=sorted(set(self.fallback_cuts)))


def sweep_environments(columns: ColumnSet, chi: int, tol: float = 1e-8,
                       max_sweeps: int = 8, trunc_mode: str = "rtm",
                       rtm_mode: str = "eig") -> EnvironmentSet:
    """Build and refine boundary environments for every cut.

    Initialization takes the exact edge columns; the first pass moves inward
    pairing fresh environments (or the nearest compatible initialized
    partner), later sweeps re-truncate each cut against its refreshed
    partner.  Iteration stops when the relative spread of the per-cut
    overlaps drops below ``tol``, stagnates, or ``max_sweeps`` is reached.
    """
    return _Sweeper(columns, chi, tol, max_sweeps, trunc_mode, rtm_mode).run()


def _median_by_magnitude(values: Sequence[complex]) -> complex:
    ordered = sorted(values, key=lambda z: (abs(z), z.real, z.imag))
    return ordered[len(ordered) // 2]


def amplitude(columns: ColumnSet, chi: int, tol: float = 1e-8,
              max_sweeps: int = 8, trunc_mode: str = "rtm") -> complex:
    """Wave-function amplitude of a closed network.

    Returns the median-by-magnitude of the converged per-cut overlaps (the
    middle element after sorting by magnitude, a robust consistency
    estimate).
    """
    env = sweep_environments(columns, chi, tol, max_sweeps, trunc_mode)
    return _median_by_magnitude(env.cut_values())


# ---------------------------------------------------------------------------
# cached engine for sampling


def _bits_key(bits: Sequence[int]) -> Tuple[int, ...]:
    return tuple(int(b) for b in bits)


class AmplitudeEngine:
    """Amplitude oracle with environment reuse and value memoization.

    Holds the open-topped columns of one quench (or circuit) and the
    environments of a base configuration.  Single-spin-flip proposals are
    evaluated by re-closing one column between the cached neighboring
    environments; accepted moves re-sweep outward from the flipped column.
    Computed amplitudes are memoized by bit string (last-write-wins; safe
    for concurrent readers).
    """

    def __init__(self, spec: Union[QuenchSpec, CircuitSpec], chi: int,
                 tol: float = 1e-8, max_sweeps: int = 8, trunc_mode: str = "rtm"):
        self.spec = spec
        self.chi = chi
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.trunc_mode = trunc_mode
        if isinstance(spec, CircuitSpec):
            self.n = spec.n
            self._colset = build_circuit_columns(spec, "0")
        else:
            if spec.infinite:
                raise ValueError("AmplitudeEngine requires a finite chain")
            self.n = int(spec.n)
            self._colset = build_columns(spec, "0" * self.n)
        self._memo: Dict[Tuple[int, ...], complex] = {}
        self._base: Optional[Tuple[int, ...]] = None
        self._sweeper: Optional[_Sweeper] = None

    # -- column helpers -------------------------------------------------------

    def _closed_colset(self, bits: Sequence[int]) -> ColumnSet:
        e = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        top = [e[int(b)].astype(np.complex128) for b in bits]
        return ColumnSet(self._colset.bodies, self._colset.bottom, top,
                         dict(self._colset.meta))

    def amplitude(self, bits: Sequence[int]) -> complex:
        """psi(x); raises ZeroOverlapError when the contraction collapses."""
        key = _bits_key(bits)
        if key in self._memo:
            return self._memo[key]
        value = self._compute(key)
        self._memo[key] = value
        return value

    def probability(self, bits: Sequence[int]) -> float:
        try:
            return abs(self.amplitude(bits)) ** 2
        except ZeroOverlapError:
            return 0.0

    def _compute(self, key: Tuple[int, ...]) -> complex:
        if self.n_steps == 0:
            x0 = self._x0_bits()
            return 1.0 + 0j if key == x0 else 0.0 + 0j
        if self._base is None:
            return self._full_build(key)
        diff = [j for j, (a, b) in enumerate(zip(key, self._base)) if a != b]
        if len(diff) == 0:
            return self._memo.get(key, self._full_build(key))
        if len(diff) == 1:
            vals = self._flip_values(diff[0])
            # memoize the partner value too; it is the base configuration
            return vals[key[diff[0]]]
        self._rebase(key)
        return self._memo[key]

    @property
    def n_steps(self) -> int:
        return int(self._colset.meta.get("n_steps", self._colset.n_steps))

    def _x0_bits(self) -> Tuple[int, ...]:
        out = []
        for v in self._colset.bottom:
            if abs(v[0] - 1) < 1e-12 and abs(v[1]) < 1e-12:
                out.append(0)
            elif abs(v[1] - 1) < 1e-12 and abs(v[0]) < 1e-12:
                out.append(1)
            else:
                raise ValueError("zero-step amplitude needs a computational-basis start")
        return tuple(out)

    def _full_build(self, key: Tuple[int, ...]) -> complex:
        sw = _Sweeper(self._closed_colset(key), self.chi, self.tol,
                      self.max_sweeps, self.trunc_mode)
        env = sw.run()
        self._sweeper = sw
        self._base = key
        value = _median_by_magnitude(env.cut_values())
        self._memo[key] = value
        return value

    def _zip_open(self, j: int) -> np.ndarray:
        """Both amplitudes of the base configuration with bit j free."""
        sw = self._sweeper
        body = self._colset.bodies[j]
        m = len(body)
        if j >= 1:
            lts = sw.left[j].tensors
            lg = sw.lgl[j]
        else:
            lts = [np.ones((1, 1, 1), dtype=np.complex128)] * m
            lg = 0.0
        if j <= self.n - 2:
            rts = sw.right[j + 1].tensors
            lg += sw.lgr[j + 1]
        else:
            rts = [np.ones((1, 1, 1), dtype=np.complex128)] * m
        env = np.ones((1, 1, 1), dtype=np.complex128)
        for t in range(m):
            w = body[t]
            tmp = np.tensordot(env, lts[t], axes=([0], [0]))       # (b, c, p, a')
            tmp = np.tensordot(tmp, w, axes=([0, 2], [0, 1]))      # (c, a', q, b')
            env = np.tensordot(tmp, rts[t], axes=([0, 2], [0, 1]))  # (a', b', c')
            s = float(np.max(np.abs(env)))
            if s > 0 and (s > 1e50 or s < 1e-50):
                env = env / s
                lg += math.log(s)
        vec = env[0, :, 0]  # open top leg of the last step tensor
        scale = math.exp(lg)
        # bottom-closed zero-step columns carry the open axis of size 2 as well
        return np.array([vec[0] * scale, vec[1] * scale], dtype=np.complex128)

    def _flip_values(self, j: int) -> np.ndarray:
        vals = self._zip_open(j)
        base = self._base
        for s in (0, 1):
            key = base[:j] + (s,) + base[j + 1:]
            if key not in self._memo:
                self._memo[key] = complex(vals[s])
        return vals

    def _rebase(self, key: Tuple[int, ...]):
        """Re-sweep outward from the changed columns, reusing valid environments."""
        sw = self._sweeper
        base = self._base
        diff = [j for j, (a, b) in enumerate(zip(key, base)) if a != b]
        j_min, j_max = diff[0], diff[-1]
        new_cols = self._closed_colset(key)
        sw.colset = new_cols
        sw.cols = [new_cols.column(i) for i in range(self.n)]
        # stale: L_i for i >= j_min + 1, R_i for i <= j_max
        if j_min == 0:
            sw._store_left(1, edge_environment(sw.cols[0], "left"), 0.0)
        if j_max == self.n - 1:
            sw._store_right(self.n - 1, edge_environment(sw.cols[-1], "right"), 0.0)
        for i in range(max(2, j_min + 1), self.n):
            lf, lg = sw._fresh_left(i)
            partner = sw.right.get(i) if i > j_max else sw._find_partner(sw.right, lf, lo=i)
            env = sw._truncate_single(lf, partner, "bra", i)
            sw._store_left(i, env, lg)
        for i in range(min(self.n - 2, j_max), 0, -1):
            rf, lg = sw._fresh_right(i)
            env = sw._truncate_single(rf, sw.left.get(i), "ket", i)
            sw._store_right(i, env, lg)
        ovs = sw.cut_overlaps()
        spread = sw._spread(ovs)
        extra = 0
        while spread > self.tol and extra < self.max_sweeps:
            prev = spread
            for i in range(1, self.n):
                sw.refresh_cut(i)
            for i in range(self.n - 1, 0, -1):
                sw.refresh_cut(i)
            ovs = sw.cut_overlaps()
            spread = sw._spread(ovs)
            extra += 1
            if spread > 0.9 * prev:
                break
        self._base = key
        values = [mant * math.exp(lg) for mant, lg in ovs.values()]
        self._memo[key] = _median_by_magnitude(values)

    # -- exact enumeration -----------------------------------------------------

    def amplitude_table(self) -> np.ndarray:
        """Amplitudes for every configuration, meet-in-the-middle enumeration.

        Left environment families are grown over all prefixes up to the
        middle cut, right families over all suffixes; each amplitude is one
        boundary overlap.  Index convention: site 0 is the most significant
        bit.  Cost scales as 2^(n/2) environment builds plus 2^n overlaps.
        """
        if self.n > 20:
            raise ValueError("enumeration guarded to n <= 20")
        if self.n_steps == 0:
            table = np.zeros(2 ** self.n, dtype=np.complex128)
            idx = 0
            for b in self._x0_bits():
                idx = idx * 2 + b
            table[idx] = 1.0
            return table
        h = self.n // 2
        # reference partners for truncation from a base build (any state works)
        if self._base is None:
            self._full_build(tuple([0] * self.n))
        sw = self._sweeper
        ref_cols = self._colset
        bit_vec = [np.array([1.0, 0.0], dtype=np.complex128),
                   np.array([0.0, 1.0], dtype=np.complex128)]

        def truncated(fresh: TemporalMPS, partner: Optional[TemporalMPS],
                      side: str) -> TemporalMPS:
            if partner is not None and fresh.physical_dims == partner.physical_dims:
                try:
                    if side == "bra":
                        out, _, _ = pair_compress(fresh, partner, self.chi, sides="bra")
                    else:
                        _, out, _ = pair_compress(partner, fresh, self.chi, sides="ket")
                    return out
                except ZeroOverlapError:
                    pass
            return compress_rdm(fresh, self.chi)[0]

        def grow(first: int, last: int, step: int, side: str
                 ) -> List[Tuple[TemporalMPS, float]]:
            frontier: List[Tuple[TemporalMPS, float]] = []
            edge = "left" if side == "bra" else "right"
            for s in (0, 1):
                env = edge_environment(ref_cols.column(first, top=bit_vec[s]), edge)
                nrm = env.norm()
                frontier.append((env.scale(1 / nrm), math.log(nrm)))
            for i in range(first + step, last + step, step):
                nxt = []
                for env, lg in frontier:
                    for s in (0, 1):
                        fresh = apply_mpo(ref_cols.column(i, top=bit_vec[s]), env)
                        cut = i + 1 if side == "bra" else i
                        out = truncated(fresh, (sw.right if side == "bra" else sw.left).get(cut), side)
                        nrm = out.norm()
                        if nrm == 0:
                            nxt.append((out, -math.inf))
                        else:
                            nxt.append((out.scale(1 / nrm), lg + math.log(nrm)))
                frontier = nxt
            return frontier

        # family index: first-consumed site is the most significant bit
        lefts = grow(0, h - 1, +1, "bra")
        rights = grow(self.n - 1, h, -1, "ket")
        n_suffix = self.n - h
        table = np.zeros(2 ** self.n, dtype=np.complex128)
        for a, (le, lga) in enumerate(lefts):
            for b, (re, lgb) in enumerate(rights):
                if not (math.isfinite(lga) and math.isfinite(lgb)):
                    continue
                mant, lg = overlap_log(le, re)
                # the right family consumed site n-1 first, so reverse its bits
                suffix = int(format(b, f"0{n_suffix}b")[::-1], 2)
                table[(a << n_suffix) | suffix] = mant * math.exp(lg + lga + lgb)
        return table


# ---------------------------------------------------------------------------
# thermodynamic-limit fixed point


@dataclass
class FixedPointResult:
    """Dominant boundary environment of a translationally invariant strip."""

    boundary: TemporalMPS
    multiplier: complex          # per-column growth factor (principal root)
    cell_multiplier: complex     # raw growth factor of one unit cell
    cell_size: int
    iterations: int
    residual: float
    residual_history: List[float]
    converged: bool


def _inner(a: TemporalMPS, b: TemporalMPS) -> complex:
    mant, lg = overlap_log(a.conj_view(), b, _check=False)
    return mant * math.exp(lg)


def fixed_point(cell: Union[TemporalMPO, Sequence[TemporalMPO]], chi: int,
                tol: float = 1e-9, max_iters: int = 200,
                init: Optional[TemporalMPS] = None,
                mu_tol: Optional[float] = None) -> FixedPointResult:
    """Power iteration for the dominant left boundary of a uniform strip.

    The boundary is re-truncated against its own mirror image each step
    (transpose gluing); the per-column multiplier mu accumulates the norm
    growth, and the residual is the overlap distance between successive
    normalized iterates.  Oscillatory non-convergence (expected near
    dynamical transitions) is reported through the residual history, not
    raised.

    With ``mu_tol`` set, the geometric tail of the multiplier sequence is
    Aitken-extrapolated and the iteration also stops once the extrapolated
    multiplier is stable to that relative tolerance (the boundary itself is
    then converged only to the looser state residual).
    """
    cols = [cell] if isinstance(cell, TemporalMPO) else list(cell)
    if init is None:
        ts = []
        for t in cols[0].tensors:
            pl = t.shape[1]
            v = np.ones(pl, dtype=np.complex128) / math.sqrt(pl)
            ts.append(np.tensordot(v, t, axes=([0], [1])))  # (tb, pr, tb')
        env = TemporalMPS(ts, BRA)
    else:
        env = init.copy()
    nrm = env.norm()
    if nrm == 0:
        raise ZeroOverlapError("initial boundary vanished")
    env = env.scale(1.0 / nrm)
    mu_cell = 0j
    mu_seq: List[complex] = []
    mu_star_prev: Optional[complex] = None
    stable = 0
    history: List[float] = []
    res = math.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        prev = env
        for col in cols:
            env = apply_mpo(col, env)
        env, _, _ = pair_compress(env, env, chi)
        nrm = env.norm()
        if nrm == 0 or not math.isfinite(nrm):
            raise ZeroOverlapError("boundary iteration collapsed")
        env = env.scale(1.0 / nrm)
        g = _inner(prev, env)
        mu_cell = g * nrm
        mu_seq.append(mu_cell)
        res = abs(1.0 - abs(g))
        history.append(res)
        if res < tol:
            converged = True
            break
        if mu_tol is not None and len(mu_seq) >= 3:
            e1 = mu_seq[-1] - mu_seq[-2]
            e0 = mu_seq[-2] - mu_seq[-3]
            if abs(e0) > 0:
                r = e1 / e0
                if abs(r) < 0.98:
                    mu_star = mu_seq[-1] + e1 * r / (1.0 - r)
                    if (mu_star_prev is not None and
                            abs(mu_star - mu_star_prev) <= mu_tol * abs(mu_star)):
                        stable += 1
                        if stable >= 2:
                            mu_cell = mu_star
                            converged = True
                            break
                    else:
                        stable = 0
                    mu_star_prev = mu_star
    mu_col = cmath.exp(cmath.log(mu_cell) / len(cols)) if mu_cell != 0 else 0j
    return FixedPointResult(env, mu_col, mu_cell, len(cols), it, res, history,
                            converged=converged)
