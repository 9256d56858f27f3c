"""Edge-level dynamics: inter-arrival times, lifetime activity, node-age
attribution, and preferential-attachment strength.

The degree probability ``p_e(d)`` of a window of edge steps is the number of
steps whose destination had degree ``d`` just before the step, divided by the
sum over the same steps of the number of nodes holding degree ``d`` just
before the step.  Because the edge stream carries no direction, the
destination is either the higher-degree endpoint or a uniformly chosen one.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DynGraphError, InsufficientDataError
from .powerlaw import fit_power_law
from .store import SECONDS_PER_DAY, EventLog

MONTH = 30 * SECONDS_PER_DAY


class Policy(enum.Enum):
    HigherDegree = "higher"
    RandomEndpoint = "random"


# --------------------------------------------------------------------------
# inter-arrival times

@dataclass
class InterArrivalHistogram:
    bucket: int
    gaps: np.ndarray
    fitted_exponent: float
    fit_error: float

    @property
    def fitted(self) -> bool:
        return not np.isnan(self.fitted_exponent)


def edge_incidences(log: EventLog):
    """Per-node edge incidences, grouped by node and ordered by edge index.

    Returns ``(node, other, edge_index)`` arrays of length ``2 * edge_count``.
    """
    m = log.edge_count
    node = np.concatenate([log.edge_u, log.edge_v]).astype(np.int64)
    other = np.concatenate([log.edge_v, log.edge_u]).astype(np.int64)
    eidx = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((eidx, node))
    return node[order], other[order], eidx[order]


def node_gaps(log: EventLog):
    """Consecutive edge gaps of every node.

    Returns ``(node, other, edge_index, gap)`` where the gap ends at edge
    ``edge_index`` (shared with ``other``).
    """
    node, other, eidx = edge_incidences(log)
    t = log.edge_time[eidx]
    same = node[1:] == node[:-1]
    gap = (t[1:] - t[:-1])[same]
    return node[1:][same], other[1:][same], eidx[1:][same], gap


def inter_arrival_histogram(log: EventLog, age_bucket_width: int = MONTH, xmin: int = 1,
                            unit: int = 1, min_samples: int = 50) -> list[InterArrivalHistogram]:
    """Edge inter-arrival gaps bucketed by node age, with a power-law fit per bucket.

    A gap ending at an edge enters the age bucket of each endpoint at that
    edge's creation time, so a gap whose endpoints fall in different buckets
    is counted in both.  Gaps are divided by ``unit`` (integer division)
    before fitting.  Buckets with too few samples carry a NaN exponent.
    """
    node, other, eidx, gap = node_gaps(log)
    t = log.edge_time[eidx]
    b_self = (t - log.node_time[node]) // age_bucket_width
    b_other = (t - log.node_time[other]) // age_bucket_width
    extra = b_other != b_self
    buckets = np.concatenate([b_self, b_other[extra]])
    gaps = np.concatenate([gap, gap[extra]])
    out = []
    for b in np.unique(buckets).tolist():
        g = gaps[buckets == b]
        try:
            fit = fit_power_law(g // unit, xmin=xmin, min_samples=min_samples)
            exponent, err = fit.exponent, fit.ks
        except DynGraphError:
            exponent = err = float("nan")
        out.append(InterArrivalHistogram(int(b), g, exponent, err))
    return out


# --------------------------------------------------------------------------
# activity over a node's lifetime and node-age attribution

def lifetime_activity_profile(log: EventLog, min_history: int = 30 * SECONDS_PER_DAY,
                              min_degree: int = 20, bins: int = 10) -> np.ndarray:
    """Fraction of edges falling in each bin of normalized node age.

    For each node with at least ``min_history`` seconds between joining and
    the end of the data and at least ``min_degree`` edges, every edge is
    mapped to ``(t - join) / (last_edge - join)``.  Nodes whose edges all
    occur at the join time put their mass in bin 0.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    node, _, eidx = edge_incidences(log)
    t = log.edge_time[eidx]
    deg = np.bincount(node, minlength=log.node_count)
    history = log.last_time - log.node_time
    ok = (deg >= min_degree) & (history >= min_history)
    if not np.any(ok):
        raise InsufficientDataError("no qualifying node")
    sel = ok[node]
    node, t = node[sel], t[sel]
    last = np.zeros(log.node_count, dtype=np.int64)
    np.maximum.at(last, node, t)
    join = log.node_time[node]
    span = (last[node] - join).astype(float)
    x = np.divide((t - join).astype(float), span, out=np.zeros(len(t)), where=span > 0)
    hist, _ = np.histogram(x, bins=bins, range=(0.0, 1.0))
    return hist / hist.sum()


def minimal_age_attribution(log: EventLog,
                            thresholds: Sequence[int] = (SECONDS_PER_DAY, 10 * SECONDS_PER_DAY,
                                                         30 * SECONDS_PER_DAY)):
    """Per-day fraction of new edges whose younger endpoint is at most each threshold old.

    Returns ``(days, fractions)`` with one row per day that has edges and one
    column per threshold.
    """
    thresholds = np.asarray(thresholds, dtype=np.int64)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be ascending")
    t = log.edge_time
    if len(t) == 0:
        return np.zeros(0, np.int64), np.zeros((0, len(thresholds)))
    youngest_join = np.maximum(log.node_time[log.edge_u], log.node_time[log.edge_v])
    min_age = t - youngest_join
    day = log.day_of(t)
    days, inv, counts = np.unique(day, return_inverse=True, return_counts=True)
    fractions = np.empty((len(days), len(thresholds)))
    for k, th in enumerate(thresholds.tolist()):
        fractions[:, k] = np.bincount(inv, weights=(min_age <= th).astype(float),
                                      minlength=len(days)) / counts
    return days, fractions


# --------------------------------------------------------------------------
# degree probability and preferential-attachment strength

@dataclass
class DegreeProbabilityProfile:
    at_edge_count: int
    policy: Policy
    degrees: np.ndarray
    pe: np.ndarray
    hits: np.ndarray
    exposure: np.ndarray
    window: int

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.degrees.tolist(), self.pe.tolist()))


@dataclass
class AlphaFit:
    at_edge_count: int
    alpha: float
    mse: float
    policy: Policy
    scale: float = float("nan")
    points: int = 0


@dataclass
class AlphaSeries:
    policy: Policy
    fits: list[AlphaFit]

    @property
    def edge_counts(self) -> np.ndarray:
        return np.array([f.at_edge_count for f in self.fits], dtype=np.int64)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([f.alpha for f in self.fits])


def choice_bits(seed: int, n: int) -> np.ndarray:
    """Per-edge coin flips used for destination choice (0 picks ``u``, 1 picks ``v``)."""
    return np.random.default_rng(seed).integers(0, 2, size=n, dtype=np.int8)


class DegreeReplay:
    """Degree state of every node at every edge step, in interval form.

    Step ``t`` (1-based) is the ``t``-th edge; quantities "before step t" are
    measured after all earlier events, including node creations preceding the
    edge in log order.
    """

    def __init__(self, log: EventLog, upto: int | None = None):
        m = log.edge_count if upto is None else int(upto)
        if m > log.edge_count:
            raise InsufficientDataError(f"log has {log.edge_count} edges, need {m}")
        self.log = log
        self.m = m
        is_edge = (log.kind == 1)
        edges_before = np.cumsum(is_edge) - is_edge
        created_at = edges_before[~is_edge]  # node exists for steps > created_at
        eu = log.edge_u[:m].astype(np.int64)
        ev = log.edge_v[:m].astype(np.int64)
        n = int(np.searchsorted(created_at, m, side="right")) if m else 0
        n = max(n, int(max(eu.max(initial=-1), ev.max(initial=-1))) + 1)
        self.n = n

        node = np.concatenate([eu, ev])
        step = np.concatenate([np.arange(1, m + 1), np.arange(1, m + 1)])
        order = np.lexsort((step, node))
        node_s, step_s = node[order], step[order]
        first = np.ones(len(node_s), dtype=bool)
        first[1:] = node_s[1:] != node_s[:-1]
        group_start = np.maximum.accumulate(np.where(first, np.arange(len(node_s)), 0))
        rank = np.arange(len(node_s)) - group_start  # degree just before this incidence
        deg_before = np.empty(len(node_s), dtype=np.int64)
        deg_before[order] = rank
        self.deg_u = deg_before[:m]
        self.deg_v = deg_before[m:]

        # degree-holding intervals (lo, hi]: degree 0 from creation to first
        # edge, degree k between the k-th and (k+1)-th edge
        created = created_at[:n].astype(np.int64)
        last = np.ones(len(node_s), dtype=bool)
        last[:-1] = node_s[1:] != node_s[:-1]
        nxt = np.empty(len(step_s), dtype=np.int64)
        nxt[:-1] = step_s[1:]
        nxt[last] = np.iinfo(np.int64).max
        self.iv_lo = np.concatenate([created, step_s])
        self.iv_deg = np.concatenate([np.zeros(n, np.int64), rank + 1])
        first_step = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        first_step[node_s[first]] = step_s[first]
        self.iv_hi = np.concatenate([first_step, nxt])
        self.max_degree = int(self.iv_deg.max(initial=0))

    def destination_degree(self, policy: Policy, seed: int = 0) -> np.ndarray:
        bits = choice_bits(seed, self.m)
        du, dv = self.deg_u, self.deg_v
        picked = np.where(bits == 0, du, dv)
        if policy is Policy.RandomEndpoint:
            return picked
        return np.where(du == dv, picked, np.maximum(du, dv))

    def exposure(self, first_step: int, last_step: int) -> np.ndarray:
        """Sum over steps in ``[first_step, last_step]`` of the count of nodes per degree."""
        lo = np.maximum(self.iv_lo, first_step - 1)
        hi = np.minimum(self.iv_hi, last_step)
        w = hi - lo
        live = w > 0
        return np.bincount(self.iv_deg[live], weights=w[live], minlength=self.max_degree + 1)


def _profile_from_counts(hits, exposure, at_edge_count, policy, window, log_bins):
    size = max(len(hits), len(exposure))
    hits = np.pad(hits.astype(float), (0, size - len(hits)))
    exposure = np.pad(exposure.astype(float), (0, size - len(exposure)))
    deg = np.arange(size, dtype=float)
    if log_bins:
        # bin 0 holds degree 0; geometric bins of `log_bins` per decade above it
        edges = np.unique(np.floor(np.logspace(0, np.log10(max(size, 2)) + 1.0 / log_bins,
                                               int(np.ceil(np.log10(max(size, 2)) * log_bins)) + 2)
                                   ).astype(np.int64))
        idx = np.concatenate([[0], np.searchsorted(edges, np.arange(1, size), side="right")])
        nb = int(idx.max()) + 1
        b_hits = np.bincount(idx, weights=hits, minlength=nb)
        b_exp = np.bincount(idx, weights=exposure, minlength=nb)
        b_deg = np.bincount(idx, weights=deg * exposure, minlength=nb)
        keep = b_exp > 0
        degrees = b_deg[keep] / b_exp[keep]
        hits, exposure = b_hits[keep], b_exp[keep]
    else:
        keep = exposure > 0
        degrees = deg[keep]
        hits, exposure = hits[keep], exposure[keep]
    return DegreeProbabilityProfile(at_edge_count, policy, degrees, hits / exposure, hits,
                                    exposure, window)


def edge_probability_profile(log: EventLog, at_edge_count: int,
                             policy: Policy = Policy.RandomEndpoint, window: int = 5000,
                             seed: int = 0, log_bins: int | None = None,
                             replay: DegreeReplay | None = None) -> DegreeProbabilityProfile:
    """Degree probability ``p_e(d)`` over the ``window`` edges ending at ``at_edge_count``.

    Parameters
    ----------
    policy : Policy
        Which endpoint is the destination.  Ties under ``HigherDegree`` and
        all choices under ``RandomEndpoint`` use :func:`choice_bits` with
        ``seed``.
    log_bins : int, optional
        Aggregate counts over logarithmic degree bins (this many per decade);
        the reported degree of a bin is its exposure-weighted mean degree.
    """
    if at_edge_count > log.edge_count:
        raise InsufficientDataError(f"log has {log.edge_count} edges, need {at_edge_count}")
    if window < 1 or at_edge_count < window:
        raise ValueError("need 1 <= window <= at_edge_count")
    rp = replay if replay is not None else DegreeReplay(log, at_edge_count)
    dest = rp.destination_degree(policy, seed)
    first = at_edge_count - window + 1
    hits = np.bincount(dest[first - 1: at_edge_count], minlength=rp.max_degree + 1)
    exposure = rp.exposure(first, at_edge_count)
    return _profile_from_counts(hits, exposure, at_edge_count, policy, window, log_bins)


def fit_alpha(profile: DegreeProbabilityProfile, min_points: int = 5) -> AlphaFit:
    """Least-squares fit of ``log p_e(d) = log c + alpha log d``.

    Degrees with zero probability (and degree 0) are excluded; the reported
    MSE compares measured and fitted ``p_e`` on the linear scale.
    """
    ok = (profile.pe > 0) & (profile.degrees > 0)
    if ok.sum() < min_points:
        raise InsufficientDataError(f"{int(ok.sum())} populated degrees, need {min_points}")
    x = np.log(profile.degrees[ok])
    y = np.log(profile.pe[ok])
    alpha, intercept = np.polyfit(x, y, 1)
    fitted = np.exp(intercept) * profile.degrees[ok] ** alpha
    mse = float(np.mean((profile.pe[ok] - fitted) ** 2))
    return AlphaFit(profile.at_edge_count, float(alpha), mse, profile.policy,
                    float(np.exp(intercept)), int(ok.sum()))


def alpha_series(log: EventLog, window: int = 5000, start_edges: int = 600_000, seed: int = 0,
                 log_bins: int | None = None, min_points: int = 5,
                 policies: Sequence[Policy] = (Policy.HigherDegree, Policy.RandomEndpoint)
                 ) -> dict[Policy, AlphaSeries]:
    """Fit alpha on consecutive ``window``-edge windows ending at ``start_edges``,
    ``start_edges + window``, ...

    Both policies are evaluated on the same windows.  Windows with too few
    populated degrees are skipped.
    """
    if log.edge_count < start_edges:
        raise InsufficientDataError(f"log has {log.edge_count} edges, need {start_edges}")
    if start_edges < window:
        raise ValueError("start_edges must be at least one window")
    rp = DegreeReplay(log)
    dests = {p: rp.destination_degree(p, seed) for p in policies}
    out = {p: AlphaSeries(p, []) for p in policies}
    for end in range(start_edges, log.edge_count + 1, window):
        first = end - window + 1
        exposure = rp.exposure(first, end)
        for p in policies:
            hits = np.bincount(dests[p][first - 1: end], minlength=rp.max_degree + 1)
            prof = _profile_from_counts(hits, exposure, end, p, window, log_bins)
            try:
                out[p].fits.append(fit_alpha(prof, min_points))
            except InsufficientDataError:
                continue
    return out


def write_alpha_csv(series: dict[Policy, AlphaSeries], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["edge_count", "policy", "alpha", "mse"])
    for p, s in series.items():
        for f in s.fits:
            w.writerow([f.at_edge_count, p.value, repr(f.alpha), repr(f.mse)])
