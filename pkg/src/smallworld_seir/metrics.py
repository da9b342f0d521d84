"""Reproduction numbers, peaks, spatial concentration and alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dynamics import EXPOSED, INFECTIOUS, NONE

SMOOTHING_WINDOW = 6


def theoretical_r0(r: float, k: float, t: float) -> float:
    """Onset reproduction number ``r * k * t``."""
    if r < 0 or k < 0 or t < 0:
        raise ValueError("r, k and t must be nonnegative")
    return r * k * t


@dataclass
class R0Series:
    """Secondary infections grouped by the day each infector became infectious.

    ``secondary[d]`` is the total number of exposures caused by the
    ``infectors[d]`` nodes whose infectious onset was day ``d``. Arrays from
    several replicas can simply be added.
    """

    secondary: np.ndarray
    infectors: np.ndarray

    def __add__(self, other: "R0Series") -> "R0Series":
        return R0Series(self.secondary + other.secondary, self.infectors + other.infectors)

    @property
    def days(self) -> np.ndarray:
        return np.flatnonzero(self.infectors)

    def cohort(self, day: int) -> float | None:
        """Mean secondary count for onset ``day``; None for an empty cohort."""
        if day >= self.infectors.size or self.infectors[day] == 0:
            return None
        return float(self.secondary[day] / self.infectors[day])

    def cohort_values(self) -> dict[int, float]:
        return {int(d): float(self.secondary[d] / self.infectors[d]) for d in self.days}

    def window_average(self, start: int, stop: int | None = None,
                       weighting: str = "infector") -> float | None:
        """Average R0 for infectors with onset in ``[start, stop)``.

        ``weighting="infector"`` counts each infector once; ``"day"`` averages
        the per-day cohort means instead.
        """
        sl = slice(start, stop)
        sec, inf = self.secondary[sl], self.infectors[sl]
        if inf.sum() == 0:
            return None
        if weighting == "infector":
            return float(sec.sum() / inf.sum())
        if weighting == "day":
            present = inf > 0
            return float(np.mean(sec[present] / inf[present]))
        raise ValueError(f"unknown weighting {weighting!r}")

    def phase_averages(self, phase_starts, weighting: str = "infector") -> list[float | None]:
        bounds = list(phase_starts) + [None]
        return [self.window_average(a, b, weighting) for a, b in zip(bounds, bounds[1:])]


def empirical_r0(day_infectious, infector, n_days: int | None = None) -> R0Series:
    """Build an :class:`R0Series` from per-node infection records.

    Args:
        day_infectious: Onset day per node, ``-1`` if the node never became
            infectious.
        infector: Infector id per node, ``-1`` if none.
        n_days: Length of the output arrays; defaults to the last onset + 1.
    """
    day_infectious = np.asarray(day_infectious)
    infector = np.asarray(infector)
    counts = np.bincount(infector[infector != NONE], minlength=day_infectious.size)
    onset = day_infectious != NONE
    if n_days is None:
        n_days = int(day_infectious.max()) + 1 if onset.any() else 0
    secondary = np.bincount(day_infectious[onset], weights=counts[onset], minlength=n_days)
    infectors = np.bincount(day_infectious[onset], minlength=n_days)
    return R0Series(secondary[:n_days], infectors[:n_days])


def daily_r0(new_exposed, infectious, mean_infectious_days: float) -> np.ndarray:
    """Per-day reproduction number from the daily per-case transmission rate.

    ``R(t) = mean_infectious_days * new_exposed[t] / infectious[t - 1]``: the
    exposures made on day ``t`` divided by the number of nodes infectious at
    the start of that day, scaled by the mean infectious period. With fully
    susceptible neighbourhoods this equals ``r * k * mean_infectious_days``.
    Inputs may be single-replica counts or ensemble means (pooled ratio).
    Days with nobody infectious are NaN; day 0 is always NaN.
    """
    new_exposed = np.asarray(new_exposed, dtype=float)
    infectious = np.asarray(infectious, dtype=float)
    out = np.full(new_exposed.size, np.nan)
    prev = infectious[:-1]
    ok = prev > 0
    out[1:][ok] = mean_infectious_days * new_exposed[1:][ok] / prev[ok]
    return out


def phase_means(series, phase_starts, stop: int | None = None) -> list[float | None]:
    """Mean of ``series`` over each phase's days, skipping NaN; None if empty."""
    x = np.asarray(series, dtype=float)
    bounds = list(phase_starts) + [x.size if stop is None else stop]
    out = []
    for a, b in zip(bounds, bounds[1:]):
        chunk = x[a:b]
        chunk = chunk[~np.isnan(chunk)]
        out.append(float(chunk.mean()) if chunk.size else None)
    return out


def active_components(graph, states_or_mask) -> int:
    """Connected components among active (E or I) nodes using short edges only."""
    if hasattr(states_or_mask, "compartment"):
        comp = states_or_mask.compartment
        mask = (comp == EXPOSED) | (comp == INFECTIOUS)
    else:
        mask = np.asarray(states_or_mask, dtype=bool)
    nodes = np.flatnonzero(mask)
    if nodes.size == 0:
        return 0
    starts = graph.indptr[nodes]
    lens = graph.indptr[nodes + 1] - starts
    total = int(lens.sum())
    pos = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
    src = np.repeat(np.arange(nodes.size), lens)
    dst_node = graph.nbr[pos]
    keep = mask[dst_node] & ~graph.long[graph.eid[pos]]
    local = np.full(graph.n, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    adj = coo_matrix((np.ones(int(keep.sum()), dtype=np.int8),
                      (src[keep], local[dst_node[keep]])),
                     shape=(nodes.size, nodes.size))
    n_comp, _ = connected_components(adj, directed=False)
    return int(n_comp)


def rank_profile(counts, keep_zeros: bool = False) -> np.ndarray:
    """Sort per-unit counts descending and divide by the largest."""
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0 or counts.max() <= 0:
        raise ValueError("rank profile needs at least one positive count")
    ranked = np.sort(counts)[::-1]
    if not keep_zeros:
        ranked = ranked[ranked > 0]
    return ranked / ranked[0]


def ranked_units(counts) -> list[tuple[int, int, float]]:
    """``(rank, unit, normalized)`` rows for positive units, largest first."""
    counts = np.asarray(counts, dtype=float)
    order = np.argsort(-counts, kind="stable")
    top = counts[order[0]]
    return [(i + 1, int(u), float(counts[u] / top))
            for i, u in enumerate(order) if counts[u] > 0]


def smooth(series, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Trailing moving average; the first days average what is available."""
    x = np.asarray(series, dtype=float)
    if window <= 1:
        return x.copy()
    csum = np.cumsum(np.concatenate([[0.0], x]))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def align_to_peak(series, target_peak_day: int, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Shift ``series`` so that its smoothed peak lands on ``target_peak_day``.

    Days shifted in from outside are NaN; values pushed past either end are
    dropped. The output has the input's length.
    """
    x = np.asarray(series, dtype=float)
    sm = smooth(x, window)
    if x.size == 0 or np.allclose(sm, sm[0]):
        raise ValueError("series has no peak")
    shift = int(target_peak_day) - int(np.argmax(sm))
    out = np.full(x.size, np.nan)
    if abs(shift) >= x.size:
        return out
    if shift >= 0:
        out[shift:] = x[:x.size - shift]
    else:
        out[:x.size + shift] = x[-shift:]
    return out


def peak_shift(series, target_peak_day: int, window: int = SMOOTHING_WINDOW) -> int:
    sm = smooth(series, window)
    return int(target_peak_day) - int(np.argmax(sm))


@dataclass(frozen=True)
class WavePeaks:
    first: float
    first_day: int
    second: float
    second_day: int


def wave_peaks(series, split_day: int, window: int = 1) -> WavePeaks:
    """Largest values before and from ``split_day``; earliest day wins ties.

    ``series`` is expected to be smoothed already; pass ``window`` to apply a
    trailing moving average first.
    """
    sm = smooth(series, window)
    if not 0 < split_day < sm.size:
        raise ValueError(f"split_day {split_day} outside series of length {sm.size}")
    a = int(np.argmax(sm[:split_day]))
    b = split_day + int(np.argmax(sm[split_day:]))
    return WavePeaks(float(sm[a]), a, float(sm[b]), b)
