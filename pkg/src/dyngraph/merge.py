"""Predicting community merges one snapshot ahead.

Every tracked community at every snapshot with a successor snapshot yields
one feature row: size, in-degree ratio (internal edges over summed member
degree), similarity to its own previous incarnation, and for each of those
three a trailing standard deviation plus first- and second-order change
indicators; the community's age completes the row.  The label says whether
the lineage merges into another one at the next snapshot.

The classifier is a linear SVM fitted by stochastic subgradient descent on
the class-weighted hinge loss with L2 regularization.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError
from .store import GraphSnapshot
from .tracking import EventType, Tracking

FEATURE_NAMES = (
    "size", "in_degree_ratio", "self_similarity",
    "size_std", "in_degree_ratio_std", "self_similarity_std",
    "size_first", "in_degree_ratio_first", "self_similarity_first",
    "size_second", "in_degree_ratio_second", "self_similarity_second",
    "age",
)
DEFAULT_WINDOW = 5


@dataclass
class FeatureTable:
    X: np.ndarray
    y: np.ndarray  # True = merges at the next snapshot
    age: np.ndarray
    young: np.ndarray  # fewer than three snapshots of history; indicators zero-filled
    lineage: np.ndarray
    snapshot: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lineage", "snapshot", *FEATURE_NAMES, "young", "label"])
        for i in range(len(self.y)):
            w.writerow([int(self.lineage[i]), int(self.snapshot[i]),
                        *(repr(float(x)) for x in self.X[i]), int(self.young[i]),
                        "merges_next" if self.y[i] else "survives_next"])


def _sign(x: float) -> float:
    return float(np.sign(x))


def _change_indicators(values: list[float]) -> tuple[float, float, float]:
    """Trailing std and first/second-order indicators at the last value."""
    cur = values[-1]
    std = float(np.std(values)) if len(values) > 1 else 0.0
    first = _sign(cur - values[-2]) if len(values) >= 2 else 0.0
    if len(values) >= 3:
        second = _sign((cur - values[-2]) - (values[-2] - values[-3]))
    else:
        second = 0.0
    return std, first, second


def _snapshot_tables(tracking: Tracking, snapshots: Sequence[GraphSnapshot]):
    """Internal edge counts and summed degrees per community label, per snapshot."""
    out = []
    for part, snap in zip(tracking.partitions, snapshots):
        k = part.n_communities
        lu, lv = part.labels[snap.edge_u], part.labels[snap.edge_v]
        internal = np.bincount(lu[lu == lv], minlength=k)
        degsum = np.bincount(part.labels, weights=snap.degree, minlength=k)
        out.append((internal, degsum))
    return out


def extract_features(tracking: Tracking, snapshots: Sequence[GraphSnapshot],
                     window: int = DEFAULT_WINDOW,
                     exclude_born_at: int | None = None) -> FeatureTable:
    """One labelled row per (lineage, snapshot) that has a next snapshot.

    ``exclude_born_at`` drops lineages born at that snapshot index (used to
    ignore communities created by an external network merge).
    """
    if not tracking.timelines:
        raise DegenerateInputError("no timelines")
    tables = _snapshot_tables(tracking, snapshots)
    last = len(snapshots) - 1
    rows, labels, ages, young, lin, snap_idx = [], [], [], [], [], []
    for t in tracking.timelines:
        if exclude_born_at is not None and t.birth == exclude_born_at:
            continue
        merge_at = {e.snapshot for e in t.events if e.kind is EventType.Merge}
        hist = {"size": [], "ratio": [], "sim": []}
        prev_members = None
        for k in sorted(t.labels):
            label = t.labels[k]
            members = t.members[k]
            internal, degsum = tables[k]
            size = float(len(members))
            ratio = float(internal[label] / degsum[label]) if degsum[label] > 0 else 0.0
            if prev_members is None:
                sim = 0.0
            else:
                inter = np.intersect1d(prev_members, members, assume_unique=True).size
                sim = inter / (len(prev_members) + len(members) - inter)
            prev_members = members
            for key, val in (("size", size), ("ratio", ratio), ("sim", sim)):
                if key == "sim" and k == t.birth:
                    continue  # no previous incarnation; keep the placeholder out of the history
                hist[key].append(val)
                hist[key] = hist[key][-window:] if len(hist[key]) > window else hist[key]
            if k >= last:
                continue
            ind = [_change_indicators(hist[key]) if hist[key] else (0.0, 0.0, 0.0)
                   for key in ("size", "ratio", "sim")]
            age = k - t.birth
            rows.append([size, ratio, sim,
                         ind[0][0], ind[1][0], ind[2][0],
                         ind[0][1], ind[1][1], ind[2][1],
                         ind[0][2], ind[1][2], ind[2][2],
                         float(age)])
            labels.append((k + 1) in merge_at)
            ages.append(age)
            young.append(age < 2)
            lin.append(t.lineage_id)
            snap_idx.append(k)
    if not rows:
        raise DegenerateInputError("no feature rows")
    return FeatureTable(np.array(rows), np.array(labels, bool), np.array(ages, int),
                        np.array(young, bool), np.array(lin, int), np.array(snap_idx, int))


# --------------------------------------------------------------------------
# classifier

@dataclass
class LinearSVM:
    weights: np.ndarray
    bias: float
    column_means: np.ndarray
    column_stds: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def decision(self, X) -> np.ndarray:
        Z = (np.asarray(X, float) - self.column_means) / self.column_stds
        return Z @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return self.decision(X) > 0

    def to_json(self) -> str:
        return json.dumps({
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "column_means": self.column_means.tolist(),
            "column_stds": self.column_stds.tolist(),
            "feature_names": list(self.feature_names),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LinearSVM":
        d = json.loads(text)
        return cls(np.array(d["weights"]), float(d["bias"]), np.array(d["column_means"]),
                   np.array(d["column_stds"]), tuple(d.get("feature_names", FEATURE_NAMES)))


def fit_svm(X, y, lam: float = 1e-3, epochs: int = 30, seed: int = 0,
            batch: int = 16) -> LinearSVM:
    """Class-weighted hinge loss + ``lam/2 |w|^2`` by mini-batch subgradient descent.

    Columns are z-scored with the training statistics (zero-variance columns
    keep unit scale).  Step size decays as ``1 / (lam * (t + t0))``; the
    returned weights average the second half of the iterates.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, bool)
    if y.all() or not y.any():
        raise DegenerateInputError("training data has a single class")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    Z = (X - mean) / std
    s = np.where(y, 1.0, -1.0)
    n, d = Z.shape
    cw = np.where(y, n / (2.0 * y.sum()), n / (2.0 * (~y).sum()))
    rng = np.random.default_rng(seed)
    w = np.zeros(d)
    b = 0.0
    w_avg = np.zeros(d)
    b_avg = 0.0
    n_avg = 0
    t0 = 1.0 / lam  # first steps of size ~1
    t = 0
    steps = epochs * int(np.ceil(n / batch))
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            eta = 1.0 / (lam * (t + t0))
            margin = s[idx] * (Z[idx] @ w + b)
            act = margin < 1
            coef = (cw[idx] * s[idx] * act) / len(idx)
            w = (1 - eta * lam) * w + eta * (coef @ Z[idx])
            b += eta * coef.sum()
            t += 1
            if t > steps // 2:
                w_avg += w
                b_avg += b
                n_avg += 1
    return LinearSVM(w_avg / n_avg, b_avg / n_avg, mean, std)


@dataclass
class ClassReport:
    merge_accuracy: float  # correctly predicted merges / actual merges
    no_merge_accuracy: float
    n_merge: int
    n_no_merge: int
    by_age: dict[int, tuple[float, float, int, int]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "merge_accuracy": self.merge_accuracy,
            "no_merge_accuracy": self.no_merge_accuracy,
            "n_merge": self.n_merge,
            "n_no_merge": self.n_no_merge,
            "by_age": {str(a): list(v) for a, v in self.by_age.items()},
        }


def _rate(hit, total) -> float:
    return float(hit / total) if total else float("nan")


def class_report(y, pred, age=None) -> ClassReport:
    y = np.asarray(y, bool)
    pred = np.asarray(pred, bool)
    rep = ClassReport(_rate(np.sum(pred & y), y.sum()), _rate(np.sum(~pred & ~y), (~y).sum()),
                      int(y.sum()), int((~y).sum()))
    if age is not None:
        age = np.asarray(age)
        for a in np.unique(age).tolist():
            m = age == a
            rep.by_age[int(a)] = (_rate(np.sum(pred[m] & y[m]), y[m].sum()),
                                  _rate(np.sum(~pred[m] & ~y[m]), (~y[m]).sum()),
                                  int(y[m].sum()), int((~y[m]).sum()))
    return rep


def stratified_folds(y, folds: int, seed: int = 0) -> np.ndarray:
    """Fold index per row, each class spread evenly over folds."""
    y = np.asarray(y, bool)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=int)
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        fold[rng.permutation(idx)] = np.arange(len(idx)) % folds
    return fold


def train_classifier(X, y, folds: int = 5, seed: int = 0, age=None, lam: float = 1e-3,
                     epochs: int = 30) -> tuple[LinearSVM, ClassReport]:
    """Cross-validated per-class accuracies and a model fitted on all rows.

    Each fold's model is standardized with its own training rows only.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, bool)
    if y.all() or not y.any():
        raise DegenerateInputError("training data has a single class")
    if folds < 2 or folds > len(y):
        raise ValueError(f"need 2 <= folds <= rows ({len(y)})")
    fold = stratified_folds(y, folds, seed)
    pred = np.zeros(len(y), bool)
    for f in range(folds):
        test = fold == f
        model = fit_svm(X[~test], y[~test], lam, epochs, seed + 1 + f)
        pred[test] = model.predict(X[test])
    return fit_svm(X, y, lam, epochs, seed), class_report(y, pred, age)


# --------------------------------------------------------------------------
# destination of a merge

def strongest_tie(edge_u, edge_v, labels, subject: int, seed: int = 0) -> int:
    """Community with the most edges to community ``subject``.

    Ties go to the larger community, then to a seeded random pick.
    """
    labels = np.asarray(labels)
    lu, lv = labels[np.asarray(edge_u)], labels[np.asarray(edge_v)]
    cross = (lu == subject) ^ (lv == subject)
    other = np.where(lu[cross] == subject, lv[cross], lu[cross])
    if other.size == 0:
        raise DegenerateInputError(f"community {subject} has no external edges")
    counts = np.bincount(other, minlength=int(labels.max()) + 1)
    sizes = np.bincount(labels, minlength=len(counts))
    cand = np.flatnonzero(counts == counts.max())
    if cand.size > 1:
        cand = cand[sizes[cand] == sizes[cand].max()]
    if cand.size > 1:
        return int(np.random.default_rng(seed).choice(cand))
    return int(cand[0])


def predict_destination(tracking: Tracking, lineage_id: int, k: int,
                        snapshots: Sequence[GraphSnapshot], seed: int = 0) -> int:
    """Community label at snapshot ``k`` that lineage ``lineage_id`` is predicted to join."""
    t = tracking.timelines[lineage_id]
    if k not in t.labels:
        raise ValueError(f"lineage {lineage_id} is not alive at snapshot {k}")
    snap = snapshots[k]
    return strongest_tie(snap.edge_u, snap.edge_v, tracking.partitions[k].labels,
                         t.labels[k], seed)


@dataclass
class HitRate:
    hits: int
    total: int

    @property
    def rate(self) -> float:
        return self.hits / self.total if self.total else float("nan")


def destination_hit_rate(tracking: Tracking, snapshots: Sequence[GraphSnapshot],
                         seed: int = 0) -> HitRate:
    """How often the strongest tie before a merge is the community actually joined."""
    hits = total = 0
    for t in tracking.timelines:
        for e in t.events:
            if e.kind is not EventType.Merge:
                continue
            k = e.snapshot - 1
            target = tracking.timelines[e.other]
            if k not in target.labels:
                continue
            try:
                guess = predict_destination(tracking, t.lineage_id, k, snapshots, seed)
            except DegenerateInputError:
                guess = -1
            total += 1
            hits += guess == target.labels[k]
    return HitRate(hits, total)


def case_hit_rate(cases, seed: int = 0) -> HitRate:
    """Hit rate over ``(pairs, labels, subject, realized)`` cases."""
    hits = 0
    for pairs, labels, subject, realized in cases:
        pairs = np.asarray(pairs)
        hits += strongest_tie(pairs[:, 0], pairs[:, 1], labels, subject, seed) == realized
    return HitRate(int(hits), len(cases))
