"""Temporal entropies, cross-echo free energies, DQPT scans, and conformal
reference formulas.

Generalized temporal entropies come from the complex spectrum of reduced
transition matrices of a bra/ket environment pair; the standard temporal
entropy treats a single environment as a state (Hermitian reduced density
matrix).  All logarithms are natural.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .engine import FixedPointResult, fixed_point, sweep_environments
from .network import ColumnSet, QuenchSpec, CircuitSpec, build_columns, \
    build_circuit_columns, boundary_vectors, gue_sample
from .tmps import TemporalMPS, ZeroOverlapError, apply_mpo, pair_compress, \
    rtm_boundaries, rtm_spectrum
from .engine import edge_environment

__all__ = [
    "EntropySeries", "FreeEnergyScan", "CftPrediction", "CircuitEnsembleResult",
    "entropy_series", "free_energy_scan", "log_derivative", "cft_reference",
    "circuit_entropy_experiment", "fixed_point_entropy_scan",
]

_EIG_FLOOR = 1e-14       # eigenvalues below this are treated as numerical zeros
_CUSP_THRESHOLD = 10.0   # second difference vs median


@dataclass
class EntropySeries:
    """Entropies across temporal cuts (or across total times, see ``meta``)."""

    times: np.ndarray            # physical time of each entry
    cuts: np.ndarray             # temporal cut index of each entry
    s_lr: np.ndarray             # complex generalized entropy
    s_ll: np.ndarray             # real temporal entanglement of the bra
    renyi2_lr: np.ndarray        # complex -log tr(RTM^2)
    renyi2_ll: np.ndarray        # real -log tr(rho^2)
    meta: dict = field(default_factory=dict)


def _entropy_from_spectrum(lam: np.ndarray) -> complex:
    lam = lam[np.abs(lam) > _EIG_FLOOR]
    if lam.size == 0:
        return complex("nan")
    return complex(-np.sum(lam * np.log(lam)))


def _schmidt_spectra(state: TemporalMPS) -> List[np.ndarray]:
    """Normalized Schmidt weights of the state at every internal bond."""
    ts = [t.copy() for t in state.tensors]
    m = len(ts)
    for i in range(m - 1):
        dl, p, dr = ts[i].shape
        q, r = np.linalg.qr(ts[i].reshape(dl * p, dr))
        ts[i] = q.reshape(dl, p, q.shape[1])
        ts[i + 1] = np.tensordot(r, ts[i + 1], axes=([1], [0]))
        s = float(np.max(np.abs(ts[i + 1])))
        if s > 0:
            ts[i + 1] = ts[i + 1] / s
    spectra: List[np.ndarray] = []
    for i in range(m - 1, 0, -1):
        dl, p, dr = ts[i].shape
        u, s, vh = np.linalg.svd(ts[i].reshape(dl, p * dr), full_matrices=False)
        w = s.astype(float) ** 2
        tot = w.sum()
        spectra.append(w / tot if tot > 0 else w)
        ts[i] = vh.reshape(len(s), p, dr)
        ts[i - 1] = np.tensordot(ts[i - 1], u * s, axes=([2], [0]))
        sc = float(np.max(np.abs(ts[i - 1])))
        if sc > 0:
            ts[i - 1] = ts[i - 1] / sc
    spectra.reverse()
    return spectra


def entropy_series(bra: TemporalMPS, ket: TemporalMPS,
                   dt_per_site: float = 1.0, meta: Optional[dict] = None
                   ) -> EntropySeries:
    """Entropies at every temporal cut of a bra/ket environment pair.

    The generalized entropy uses the principal branch of the logarithm on
    the unit-trace RTM spectrum (numerical zeros dropped); the Renyi-2
    variant comes from the trace of the squared bond matrix without a full
    diagonalization.  Unresolvable cuts are reported as NaN, not raised.
    """
    m = bra.n_sites
    cuts = np.arange(1, m)
    s_lr = np.full(m - 1, np.nan, dtype=np.complex128)
    r2_lr = np.full(m - 1, np.nan, dtype=np.complex128)
    for t in cuts:
        try:
            rho_l, rho_r, ov = rtm_boundaries(bra, ket, int(t))
            mat = (rho_r.T @ rho_l) / ov
            lam = np.linalg.eigvals(mat)
            s_lr[t - 1] = _entropy_from_spectrum(lam)
            r2_lr[t - 1] = -cmath.log(complex(np.trace(mat @ mat)))
        except (ZeroOverlapError, np.linalg.LinAlgError, ZeroDivisionError):
            continue
    # single-environment (Hermitian) entropies of the bra
    s_ll = np.full(m - 1, np.nan)
    r2_ll = np.full(m - 1, np.nan)
    for t, w in zip(cuts, _schmidt_spectra(bra)):
        w = w[w > 0]
        s_ll[t - 1] = float(-np.sum(w * np.log(w)))
        r2_ll[t - 1] = float(-math.log(np.sum(w ** 2)))
    return EntropySeries(times=cuts * dt_per_site, cuts=cuts, s_lr=s_lr, s_ll=s_ll,
                         renyi2_lr=r2_lr, renyi2_ll=r2_ll, meta=meta or {})


# ---------------------------------------------------------------------------
# cross-echo free energies and DQPT detection


@dataclass
class FreeEnergyScan:
    """Per-site cross-echo free energies over a grid of total times."""

    times: np.ndarray
    f: np.ndarray                # log|mu| / T (NaN where unconverged)
    boundaries: str              # "x|y" label (initial|final)
    cusp_flags: np.ndarray       # bool per grid point
    second_differences: np.ndarray
    cusp_times: np.ndarray
    meta: dict = field(default_factory=dict)


def detect_cusps(times: np.ndarray, values: np.ndarray,
                 threshold: float = _CUSP_THRESHOLD,
                 window: int = 11) -> Tuple[np.ndarray, np.ndarray]:
    """Flag grid points whose second difference exceeds ``threshold`` times
    the median second difference over a sliding window.

    A local median keeps the rule scale-free: smooth curvature varies slowly
    so neighboring second differences track each other, while a kink spikes
    a single grid point far above its local background.
    """
    n = len(values)
    flags = np.zeros(n, dtype=bool)
    d2 = np.zeros(n)
    ok = np.isfinite(values)
    for i in range(1, n - 1):
        if ok[i - 1] and ok[i] and ok[i + 1]:
            d2[i] = abs(values[i + 1] - 2 * values[i] + values[i - 1])
    half = max(1, window // 2)
    for i in range(1, n - 1):
        if not (ok[i - 1] and ok[i] and ok[i + 1]):
            continue
        lo, hi = max(1, i - half), min(n - 1, i + half + 1)
        neighborhood = d2[lo:hi][ok[lo:hi]]
        med = float(np.median(neighborhood)) if neighborhood.size else 0.0
        if med > 0 and d2[i] > threshold * med:
            flags[i] = True
    return flags, d2


def _bulk_cell(spec: QuenchSpec, x_final) -> List:
    colset = build_columns(spec, x_final)
    return [colset.column(0), colset.column(1)]


def free_energy_scan(x_initial, x_final, hz: float, hx: float,
                     t_grid: Sequence[float], chi: int, dt: float = 0.05,
                     trotter_order: int = 2, n: Union[int, str] = "infinite",
                     tol: float = 1e-9, max_iters: int = 200,
                     threshold: float = _CUSP_THRESHOLD,
                     workers: int = 1) -> FreeEnergyScan:
    """f(T) = (1/(N T)) log |<x_final| U(T) |x_initial>| over a time grid.

    In the thermodynamic limit the per-site free energy comes from the
    boundary fixed-point multiplier.  Grid points whose fixed point fails to
    converge are recorded as NaN and excluded from cusp detection.
    """
    times = np.asarray(list(t_grid), dtype=float)
    args = [(t, x_initial, x_final, hz, hx, chi, dt, trotter_order, n, tol, max_iters)
            for t in times]
    if workers > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=workers) as ex:
            fs = list(ex.map(_free_energy_point, args))
    else:
        fs = [_free_energy_point(a) for a in args]
    fs = np.asarray(fs, dtype=float)
    flags, d2 = detect_cusps(times, fs, threshold)
    label = f"{_label_of(x_initial)}|{_label_of(x_final)}"
    return FreeEnergyScan(times, fs, label, flags, d2, times[flags],
                          meta={"hz": hz, "hx": hx, "chi": chi, "dt": dt,
                                "order": trotter_order, "n": n,
                                "threshold": threshold})


def _label_of(x) -> str:
    return x if isinstance(x, str) else "custom"


def _free_energy_point(args) -> float:
    (t, x_initial, x_final, hz, hx, chi, dt, order, n, tol, max_iters) = args
    if t <= 0:
        return float("nan")
    steps = round(t / dt)
    t_eff = steps * dt
    if steps < 1:
        return float("nan")
    try:
        if isinstance(n, str):
            spec = QuenchSpec(n="infinite", hz=hz, hx=hx, t_total=t_eff, dt=dt,
                              trotter_order=order, x0=x_initial)
            cell = _bulk_cell(spec, x_final)
            fp = fixed_point(cell, chi, tol=tol, max_iters=max_iters,
                             mu_tol=max(tol, 1e-10))
            if not fp.converged:
                return float("nan")
            return math.log(abs(fp.multiplier)) / t_eff
        spec = QuenchSpec(n=int(n), hz=hz, hx=hx, t_total=t_eff, dt=dt,
                          trotter_order=order, x0=x_initial)
        from .engine import amplitude as _amp
        colset = build_columns(spec, x_final)
        a = _amp(colset, chi)
        if a == 0:
            return float("nan")
        return math.log(abs(a)) / (int(n) * t_eff)
    except (ZeroOverlapError, ValueError):
        return float("nan")


# ---------------------------------------------------------------------------
# slope in log T


def log_derivative(series: Union[EntropySeries, Tuple[Sequence[float], Sequence[float]]],
                   window: float = 0.3) -> np.ndarray:
    """Smoothed d(value)/d(log t): rows of (t, slope).

    Centered moving-average smoothing with a window of ``window`` decades in
    log t, centered finite differences, then a second smoothing pass.  A
    window of 0 disables both smoothing passes; the result is then exact on
    logarithmic and constant inputs.
    """
    if isinstance(series, EntropySeries):
        ts = np.asarray(series.times, dtype=float)
        ys = np.real(series.s_lr).astype(float)
    else:
        ts, ys = (np.asarray(a, dtype=float) for a in series)
    ok = np.isfinite(ys) & (ts > 0)
    ts, ys = ts[ok], ys[ok]
    if len(ts) < 5:
        raise ValueError("need at least five finite points")
    u = np.log(ts)

    def smooth(vals: np.ndarray, uu: np.ndarray) -> np.ndarray:
        if window <= 0:
            return vals
        half = window * math.log(10.0) / 2.0
        out = np.empty_like(vals)
        for i in range(len(vals)):
            sel = np.abs(uu - uu[i]) <= half
            out[i] = float(np.mean(vals[sel]))
        return out

    ys_s = smooth(ys, u)
    slopes = np.empty(len(u) - 2)
    for i in range(1, len(u) - 1):
        slopes[i - 1] = (ys_s[i + 1] - ys_s[i - 1]) / (u[i + 1] - u[i - 1])
    mid_u = u[1:-1]
    slopes = smooth(slopes, mid_u)
    return np.column_stack([np.exp(mid_u), slopes])


# ---------------------------------------------------------------------------
# conformal reference formulas


@dataclass
class CftPrediction:
    """Closed-form conformal predictions for the annulus geometry."""

    central_charge: float
    index: int
    velocity: float
    beta0: float
    delta_t: float
    total_time: float
    cut_time: float
    annulus_width: complex
    s_n: complex
    kappa: float
    strip_spectrum: Optional[np.ndarray] = None
    continued_spectrum: Optional[np.ndarray] = None


def cft_reference(c: float, n: int, v: float, beta0: float, delta_t: float,
                  total_time: float, cut_time: float,
                  boundary_exponents: Optional[Sequence[float]] = None
                  ) -> CftPrediction:
    """Analytically continued annulus entropy and transfer spectrum.

    ``beta0`` is the UV cutoff of the continuation (``beta -> i T + 2 beta0``,
    ``tau -> i t``); at ``beta0 = 0`` the closed form has constant imaginary
    part ``(c pi / 24)(1 + 1/n)``.
    """
    T, t = float(total_time), float(cut_time)
    if not 0 < t < T:
        raise ValueError("cut time must satisfy 0 < t < T")
    kappa = c * math.pi / 24.0
    if beta0 == 0:
        width = complex(math.log(2.0 * T * v / (math.pi * delta_t)
                                 * math.sin(math.pi * t / T)), math.pi / 2.0)
    else:
        z = 1j * T + 2.0 * beta0
        width = cmath.log((2.0 * z * v / (math.pi * delta_t))
                          * cmath.sin(1j * math.pi * t / z))
    s_n = (c / 12.0) * (1.0 + 1.0 / n) * width
    strip = continued = None
    if boundary_exponents is not None:
        deltas = np.asarray(boundary_exponents, dtype=float)
        beta_eff = T  # strip spectrum quoted at beta = T after rotation
        strip = kappa / (beta_eff * v) + math.pi * deltas / (v * beta_eff)
        continued = (1j * (kappa / (T * v) + math.pi * deltas / (T * v))
                     * (1.0 + 1j * 2.0 * beta0 / T))
    return CftPrediction(c, n, v, beta0, delta_t, T, t, width, s_n, kappa,
                         strip, continued)


# ---------------------------------------------------------------------------
# thermodynamic-limit and circuit-ensemble entropy scans


def fixed_point_entropy_scan(x_initial, x_final, hz: float, hx: float,
                             t_grid: Sequence[float], chi: int, dt: float = 0.05,
                             trotter_order: int = 2, tol: float = 1e-9,
                             max_iters: int = 200, cut_fraction: float = 0.5
                             ) -> EntropySeries:
    """Mid-cut entropies of the thermodynamic-limit boundary versus total time."""
    times, s_lr, s_ll, r2_lr, r2_ll, cuts = [], [], [], [], [], []
    for t in t_grid:
        steps = round(t / dt)
        if steps < 2:
            continue
        t_eff = steps * dt
        spec = QuenchSpec(n="infinite", hz=hz, hx=hx, t_total=t_eff, dt=dt,
                          trotter_order=trotter_order, x0=x_initial)
        try:
            cell = _bulk_cell(spec, x_final)
            fp = fixed_point(cell, chi, tol=tol, max_iters=max_iters)
            env = fp.boundary
            cut = max(1, min(env.n_sites - 1, int(round(cut_fraction * env.n_sites))))
            lam = rtm_spectrum(env, env, cut)
            s_val = _entropy_from_spectrum(lam)
            rho_l, rho_r, ov = rtm_boundaries(env, env, cut)
            mat = (rho_r.T @ rho_l) / ov
            r2 = -cmath.log(complex(np.trace(mat @ mat)))
            w = _schmidt_spectra(env)[cut - 1]
            w = w[w > 0]
        except (ZeroOverlapError, np.linalg.LinAlgError):
            continue
        times.append(t_eff)
        cuts.append(cut)
        s_lr.append(s_val)
        r2_lr.append(r2)
        s_ll.append(float(-np.sum(w * np.log(w))))
        r2_ll.append(float(-math.log(np.sum(w ** 2))))
    return EntropySeries(np.asarray(times), np.asarray(cuts),
                         np.asarray(s_lr, dtype=np.complex128), np.asarray(s_ll),
                         np.asarray(r2_lr, dtype=np.complex128), np.asarray(r2_ll),
                         meta={"hz": hz, "hx": hx, "chi": chi, "dt": dt,
                               "boundaries": f"{_label_of(x_initial)}|{_label_of(x_final)}"})


@dataclass
class CircuitEnsembleResult:
    """Realization-averaged mid-cut entropies of brickwork circuits."""

    times: np.ndarray
    s_lr_re: np.ndarray
    s_lr_re_err: np.ndarray
    s_ll: np.ndarray
    s_ll_err: np.ndarray
    n_realizations: int
    n_failed: int
    meta: dict = field(default_factory=dict)


def _mirror_left_half(colset: ColumnSet, half_n: int, chi: int
                      ) -> Tuple[TemporalMPS, float]:
    """Left boundary of the half system, truncated against its own mirror."""
    env = edge_environment(colset.column(0), "left")
    nrm = env.norm()
    if nrm == 0:
        raise ZeroOverlapError("edge column vanished")
    env = env.scale(1.0 / nrm)
    lg = math.log(nrm)
    for i in range(1, half_n):
        env = apply_mpo(colset.column(i), env)
        env, _, _ = pair_compress(env, env, chi)
        nrm = env.norm()
        if nrm == 0 or not math.isfinite(nrm):
            raise ZeroOverlapError(f"half-system contraction collapsed at column {i}")
        env = env.scale(1.0 / nrm)
        lg += math.log(nrm)
    return env, lg


def _symmetric_random_product(rng: np.random.Generator, half_n: int) -> List[np.ndarray]:
    """Random single-site states for the left half (mirrored on the right)."""
    out = []
    for _ in range(half_n):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        out.append(v / np.linalg.norm(v))
    return out


def circuit_entropy_experiment(half_n: int, dt: float, t_grid: Sequence[float],
                               chi: int, realizations: int, seed: int = 0,
                               boundaries: str = "0|0",
                               ) -> CircuitEnsembleResult:
    """Mid-cut entropies of random brickwork circuits, averaged over gate
    realizations, with left-right symmetry imposed on the environments.

    ``boundaries`` is "0|0" or "0|rand"; the random final product state is
    drawn per realization, symmetric about the central cut.
    """
    if realizations < 2:
        raise ValueError("need at least two realizations")
    times = [round(t / dt) * dt for t in t_grid if round(t / dt) >= 2]
    per_t_lr: List[List[float]] = [[] for _ in times]
    per_t_ll: List[List[float]] = [[] for _ in times]
    failed = 0
    for r in range(realizations):
        rng = np.random.default_rng(seed + 7919 * r)
        gen = gue_sample(seed + 7919 * r)
        for k, t_eff in enumerate(times):
            depth = round(t_eff / dt)
            spec = CircuitSpec(n=half_n + 1, dt=dt, depth=depth, generator=gen)
            if boundaries == "0|0":
                top = "0" * (half_n + 1)
            elif boundaries == "0|rand":
                top = _symmetric_random_product(rng, half_n) + [np.array([1.0, 0.0])]
            else:
                raise ValueError("boundaries must be '0|0' or '0|rand'")
            try:
                colset = build_circuit_columns(spec, top)
                env, _ = _mirror_left_half(colset, half_n, chi)
                cut = max(1, env.n_sites // 2)
                lam = rtm_spectrum(env, env, cut)
                s = _entropy_from_spectrum(lam)
                w = _schmidt_spectra(env)[cut - 1]
                w = w[w > 0]
                sll = float(-np.sum(w * np.log(w)))
            except (ZeroOverlapError, np.linalg.LinAlgError):
                failed += 1
                continue
            if not (np.isfinite(s.real) and np.isfinite(sll)):
                failed += 1
                continue
            per_t_lr[k].append(float(s.real))
            per_t_ll[k].append(sll)

    def reduce(groups: List[List[float]]) -> Tuple[np.ndarray, np.ndarray]:
        means, errs = [], []
        for g in groups:
            if len(g) >= 2:
                means.append(math.fsum(g) / len(g))
                var = math.fsum((x - means[-1]) ** 2 for x in g) / (len(g) - 1)
                errs.append(math.sqrt(var / len(g)))
            elif g:
                means.append(g[0])
                errs.append(float("nan"))
            else:
                means.append(float("nan"))
                errs.append(float("nan"))
        return np.asarray(means), np.asarray(errs)

    lr_mean, lr_err = reduce(per_t_lr)
    ll_mean, ll_err = reduce(per_t_ll)
    return CircuitEnsembleResult(np.asarray(times), lr_mean, lr_err, ll_mean, ll_err,
                                 realizations, failed,
                                 meta={"half_n": half_n, "dt": dt, "chi": chi,
                                       "boundaries": boundaries, "seed": seed,
                                       "regime": "hamiltonian" if dt <= 0.1 else
                                       ("floquet" if dt >= 0.5 else "intermediate")})
