"""Metropolis sampling of Born-weighted bit strings and local estimators.

The chain proposes single-spin flips with uniform site choice and accepts
with probability min(1, |psi(x')|^2 / |psi(x)|^2).  One decorrelated sample
is recorded per n accepted flips (a proposal cap keeps frozen chains, e.g.
at T=0, emitting samples).  Error bars come from batch means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .engine import AmplitudeEngine
from .network import PAULI_X, PAULI_Z, QuenchSpec, bits_of
from .tmps import ZeroOverlapError

__all__ = [
    "LocalOperatorSpec", "ChainState", "ObservableEstimate", "ZeroAmplitudeSkip",
    "acceptance_probability", "local_estimator", "metropolis_run",
    "renyi2_swap", "full_enumeration_expectation",
]

_N_BATCHES = 20
_PROPOSAL_CAP_FACTOR = 200  # proposals allowed per acceptance-quota unit
_THERM_FACTOR = 10


class ZeroAmplitudeSkip(ArithmeticError):
    """Reference amplitude vanished; the sample must be skipped."""


@dataclass(frozen=True)
class LocalOperatorSpec:
    """k-site operator (k <= 3) in the computational basis at sites
    ``site .. site + k - 1``."""

    name: str
    site: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 4, 8):
            raise ValueError(f"operator must act on 1..3 sites, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def n_support(self) -> int:
        return int(round(math.log2(self.matrix.shape[0])))

    @staticmethod
    def pauli_z(site: int) -> "LocalOperatorSpec":
        return LocalOperatorSpec(f"Z_{site}", site, PAULI_Z)

    @staticmethod
    def pauli_x(site: int) -> "LocalOperatorSpec":
        return LocalOperatorSpec(f"X_{site}", site, PAULI_X)


@dataclass
class ObservableEstimate:
    """Statistically tagged Monte Carlo (or enumeration) result."""

    name: str
    mean: complex
    std_error: float
    n_samples: int
    autocorrelation_time: float
    acceptance_rate: float


@dataclass
class ChainState:
    """Metropolis chain bookkeeping; the stored amplitude always matches the
    current configuration (refreshed on every accepted flip)."""

    bits: Tuple[int, ...]
    amplitude: complex
    rng: np.random.Generator
    steps: int = 0
    accepted: int = 0
    therm_quota: int = 0
    stride: int = 0


def acceptance_probability(p_new: float, p_old: float) -> float:
    """Metropolis rule min(1, p_new / p_old)."""
    if p_old <= 0.0:
        return 1.0
    return min(1.0, p_new / p_old)


def _support_bits(bits: Sequence[int], site: int, k: int) -> int:
    out = 0
    for j in range(site, site + k):
        out = (out << 1) | bits[j]
    return out


def local_estimator(op: LocalOperatorSpec, bits: Sequence[int],
                    amplitude: Callable[[Sequence[int]], complex]) -> complex:
    """Amplitude-ratio estimator: sum over configurations differing from
    ``bits`` only on the operator support."""
    k = op.n_support
    row = _support_bits(bits, op.site, k)
    col_weights = op.matrix[row]
    nonzero = [c for c in range(2 ** k) if abs(col_weights[c]) > 1e-300]
    if nonzero == [row]:
        return complex(col_weights[row])  # diagonal: no amplitude ratios needed
    psi_x = amplitude(bits)
    if psi_x == 0:
        raise ZeroAmplitudeSkip("local estimator at zero-amplitude configuration")
    total = 0.0 + 0j
    bits = tuple(bits)
    for c in nonzero:
        if c == row:
            total += col_weights[c]
            continue
        flipped = list(bits)
        for j in range(k):
            flipped[op.site + j] = (c >> (k - 1 - j)) & 1
        try:
            psi_xp = amplitude(flipped)
        except ZeroOverlapError:
            continue
        total += col_weights[c] * (psi_xp / psi_x)
    return complex(total)


def _batch_stats(samples: np.ndarray) -> Tuple[complex, float, float]:
    """(mean, std error, autocorrelation estimate) via batch means."""
    m = len(samples)
    mean = complex(np.mean(samples))
    nb = min(_N_BATCHES, m)
    if nb < 2:
        return mean, float("nan"), float("nan")
    size = m // nb
    batches = np.array([np.mean(samples[i * size:(i + 1) * size]) for i in range(nb)])
    err = float(np.std(batches.real, ddof=1) / math.sqrt(nb))
    var_all = float(np.var(samples.real, ddof=1))
    tau = float(size * np.var(batches.real, ddof=1) / var_all) if var_all > 0 else 0.0
    return mean, err, max(tau, 0.0)


class _Chain:
    """Single Metropolis walker over an amplitude oracle."""

    def __init__(self, n: int, start: Tuple[int, ...], engine, seed: int, chain_id: int,
                 stride: Optional[int] = None, therm: Optional[int] = None):
        self.n = n
        self.engine = engine
        key = np.array([seed & 0xFFFFFFFFFFFFFFFF, chain_id], dtype=np.uint64)
        self.rng = np.random.Generator(np.random.Philox(key=key))
        self.bits = start
        self.p = self._prob(start)
        if self.p == 0.0:
            raise ZeroAmplitudeSkip("chain started at a zero-amplitude configuration")
        self.stride = stride if stride is not None else n
        self.therm = therm if therm is not None else _THERM_FACTOR * n
        self.proposals = 0
        self.accepted = 0

    def _prob(self, bits) -> float:
        try:
            return abs(self.engine.amplitude(bits)) ** 2
        except ZeroOverlapError:
            return 0.0

    def _step(self):
        j = int(self.rng.integers(self.n))
        proposal = self.bits[:j] + (1 - self.bits[j],) + self.bits[j + 1:]
        p_new = self._prob(proposal)
        self.proposals += 1
        if p_new > 0.0 and self.rng.random() < acceptance_probability(p_new, self.p):
            self.bits = proposal
            self.p = p_new
            self.accepted += 1
            return True
        return False

    def _advance(self, quota: int):
        """Run until ``quota`` flips were accepted or the proposal cap hits."""
        done = 0
        cap = _PROPOSAL_CAP_FACTOR * max(quota, 1)
        spent = 0
        while done < quota and spent < cap:
            spent += 1
            if self._step():
                done += 1

    def thermalize(self):
        self._advance(self.therm)
        # freeze the sampling stride in proposals so that on average about
        # ``stride`` flips are accepted between samples; sampling at fixed
        # proposal intervals keeps the records Born-distributed (recording at
        # acceptance events would oversample mobile configurations)
        acc = max(self.acceptance_rate, 1.0 / _PROPOSAL_CAP_FACTOR)
        self._stride_proposals = max(1, round(self.stride / acc))
        if self.accepted == 0:
            # single-flip dynamics froze entirely (zero-amplitude neighbors
            # everywhere, e.g. parity-conserving evolutions); fall back to
            # exact independent draws from the full Born distribution
            self._frozen_sampler = self._exact_distribution()

    def _exact_distribution(self):
        table = self.engine.amplitude_table()
        weights = np.abs(table) ** 2
        total = weights.sum()
        if total <= 0:
            raise ZeroAmplitudeSkip("all configuration weights vanished")
        return np.cumsum(weights / total)

    def next_sample(self) -> Tuple[int, ...]:
        frozen = getattr(self, "_frozen_sampler", None)
        if frozen is not None:
            idx = int(np.searchsorted(frozen, self.rng.random()))
            self.bits = tuple((idx >> (self.n - 1 - j)) & 1 for j in range(self.n))
            self.p = self._prob(self.bits)
            return self.bits
        for _ in range(self._stride_proposals):
            self._step()
        return self.bits

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


def _start_bits(spec: QuenchSpec) -> Tuple[int, ...]:
    if isinstance(spec.x0, str) and set(spec.x0) <= {"0", "1"}:
        return bits_of(spec.x0, int(spec.n))
    return tuple([0] * int(spec.n))


def metropolis_run(spec: QuenchSpec, chi: int, n_samples: int, seed: int,
                   observables: Sequence[LocalOperatorSpec],
                   engine: Optional[AmplitudeEngine] = None,
                   tol: float = 1e-8, stride: Optional[int] = None,
                   therm: Optional[int] = None,
                   ) -> Dict[str, ObservableEstimate]:
    """Estimate local observables by Born-weighted Metropolis sampling."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if engine is None:
        engine = AmplitudeEngine(spec, chi, tol)
    n = int(spec.n)
    chain = _Chain(n, _start_bits(spec), engine, seed, 0, stride, therm)
    chain.thermalize()
    series: Dict[str, List[complex]] = {op.name: [] for op in observables}
    for _ in range(n_samples):
        x = chain.next_sample()
        for op in observables:
            try:
                series[op.name].append(local_estimator(op, x, engine.amplitude))
            except (ZeroAmplitudeSkip, ZeroOverlapError):
                series[op.name].append(0.0 + 0j)
    out = {}
    for op in observables:
        samples = np.asarray(series[op.name])
        mean, err, tau = _batch_stats(samples)
        out[op.name] = ObservableEstimate(op.name, mean, err, len(samples), tau,
                                          chain.acceptance_rate)
    return out


def renyi2_swap(spec: QuenchSpec, chi: int, n_samples: int, seed: int, cut: int,
                engine: Optional[AmplitudeEngine] = None, tol: float = 1e-8,
                ) -> ObservableEstimate:
    """Renyi-2 entropy of sites 0..cut-1 from the two-replica swap estimator.

    Two independent chains sample x, y; each decorrelated pair contributes
    W = psi(x_A y_B) psi(y_A x_B) / (psi(x) psi(y)); the purity is the mean
    of Re W and the entropy -log(purity), with the error propagated through
    the logarithm.
    """
    if engine is None:
        engine = AmplitudeEngine(spec, chi, tol)
    n = int(spec.n)
    if not 1 <= cut <= n - 1:
        raise ValueError(f"cut must be in 1..{n - 1}")
    start = _start_bits(spec)
    chains = [_Chain(n, start, engine, seed, cid) for cid in (0, 1)]
    for c in chains:
        c.thermalize()
    w_series = []
    for _ in range(n_samples):
        x = chains[0].next_sample()
        y = chains[1].next_sample()
        num_1 = x[:cut] + y[cut:]
        num_2 = y[:cut] + x[cut:]
        try:
            w = (engine.amplitude(num_1) * engine.amplitude(num_2)
                 / (engine.amplitude(x) * engine.amplitude(y)))
        except ZeroOverlapError:
            w = 0.0 + 0j
        w_series.append(w.real)
    samples = np.asarray(w_series, dtype=float)
    purity, err, tau = _batch_stats(samples)
    purity = purity.real
    acc = float(np.mean([c.acceptance_rate for c in chains]))
    if purity <= 0:
        return ObservableEstimate(f"renyi2_cut{cut}", float("nan"), float("nan"),
                                  len(samples), tau, acc)
    return ObservableEstimate(f"renyi2_cut{cut}", -math.log(purity), err / purity,
                              len(samples), tau, acc)


def full_enumeration_expectation(spec: QuenchSpec, chi: int, op: LocalOperatorSpec,
                                 engine: Optional[AmplitudeEngine] = None,
                                 tol: float = 1e-8) -> complex:
    """Exact Born-weighted sum over every configuration via engine amplitudes.

    Evaluates sum_x p(x) O_loc(x) = <psi|O|psi> from the full amplitude
    table (sampling-free benchmark mode; guarded to n <= 20).
    """
    n = int(spec.n)
    if n > 20:
        raise ValueError("full enumeration guarded to n <= 20")
    if engine is None:
        engine = AmplitudeEngine(spec, chi, tol)
    table = engine.amplitude_table()
    k = op.n_support
    left = 2 ** op.site
    right = 2 ** (n - op.site - k)
    psi = table.reshape(left, 2 ** k, right)
    opsi = np.einsum("ij,ajb->aib", op.matrix, psi).reshape(-1)
    return complex(np.vdot(table, opsi))


def enumeration_norm(spec: QuenchSpec, chi: int,
                     engine: Optional[AmplitudeEngine] = None) -> float:
    """sum_x |psi(x)|^2 from the amplitude table (unitarity diagnostic)."""
    if engine is None:
        engine = AmplitudeEngine(spec, chi)
    table = engine.amplitude_table()
    return float(np.sum(np.abs(table) ** 2))
