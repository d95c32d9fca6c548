"""Affiliation network data: ingestion, projections, tetrad balance statistics."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import substream
from .errors import DataError

MARK_COLUMN = "mark"


@dataclass(frozen=True)
class AffiliationDataset:
    """Binary actor x event matrix with covariate tables.

    ``dyad_covariates`` has shape ``(n_a, n_e, r_d)``; when no dyad covariates
    are supplied it is a single intercept column of ones.
    """

    Y: np.ndarray
    actor_covariates: np.ndarray
    event_covariates: np.ndarray
    dyad_covariates: np.ndarray
    actor_ids: tuple[str, ...]
    event_ids: tuple[str, ...]
    actor_marks: tuple[str, ...] | None = None
    actor_covariate_names: tuple[str, ...] = ()
    event_covariate_names: tuple[str, ...] = ()
    dyad_covariate_names: tuple[str, ...] = ("intercept",)

    def __post_init__(self):
        Y = np.asarray(self.Y)
        if Y.ndim != 2:
            raise DataError("Y must be a 2-D matrix")
        n_a, n_e = Y.shape
        if n_a == 0 or n_e == 0:
            raise DataError(f"empty mode: Y has shape {Y.shape}")
        if not np.all((Y == 0) | (Y == 1)):
            raise DataError("Y entries must be 0 or 1")
        Y = Y.astype(np.int8)
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)

        xa = _as_2d(self.actor_covariates, n_a, "actor_covariates")
        xe = _as_2d(self.event_covariates, n_e, "event_covariates")
        xd = np.asarray(self.dyad_covariates, dtype=float)
        if xd.ndim != 3 or xd.shape[:2] != (n_a, n_e) or xd.shape[2] < 1:
            raise DataError(f"dyad_covariates must have shape ({n_a}, {n_e}, r_d>=1), got {xd.shape}")
        for name, arr in (("actor_covariates", xa), ("event_covariates", xe), ("dyad_covariates", xd)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains missing or non-finite values")
        object.__setattr__(self, "actor_covariates", xa)
        object.__setattr__(self, "event_covariates", xe)
        object.__setattr__(self, "dyad_covariates", xd)

        if len(self.actor_ids) != n_a or len(self.event_ids) != n_e:
            raise DataError("id label counts do not match Y")
        if len(set(self.actor_ids)) != n_a:
            raise DataError("duplicate actor ids")
        if len(set(self.event_ids)) != n_e:
            raise DataError("duplicate event ids")
        if self.actor_marks is not None and len(self.actor_marks) != n_a:
            raise DataError("actor_marks length does not match n_a")
        if len(self.actor_covariate_names) not in (0, xa.shape[1]):
            raise DataError("actor covariate names do not match columns")
        if len(self.event_covariate_names) not in (0, xe.shape[1]):
            raise DataError("event covariate names do not match columns")
        if len(self.dyad_covariate_names) != xd.shape[2]:
            object.__setattr__(self, "dyad_covariate_names", tuple(f"d{j}" for j in range(xd.shape[2])))
        if not self.actor_covariate_names:
            object.__setattr__(self, "actor_covariate_names", tuple(f"a{j}" for j in range(xa.shape[1])))
        if not self.event_covariate_names:
            object.__setattr__(self, "event_covariate_names", tuple(f"e{j}" for j in range(xe.shape[1])))

    @property
    def n_actors(self) -> int:
        return self.Y.shape[0]

    @property
    def n_events(self) -> int:
        return self.Y.shape[1]

    @classmethod
    def from_matrix(cls, Y, actor_covariates=None, event_covariates=None, dyad_covariates=None, **kw):
        """Wrap a bare 0/1 matrix, filling in intercept-only covariates and index labels."""
        Y = np.asarray(Y)
        if Y.ndim != 2:
            raise DataError("Y must be a 2-D matrix")
        n_a, n_e = Y.shape
        if actor_covariates is None:
            actor_covariates = np.zeros((n_a, 0))
        if event_covariates is None:
            event_covariates = np.zeros((n_e, 0))
        if dyad_covariates is None:
            dyad_covariates = np.ones((n_a, n_e, 1))
        kw.setdefault("actor_ids", tuple(f"a{i}" for i in range(n_a)))
        kw.setdefault("event_ids", tuple(f"e{k}" for k in range(n_e)))
        return cls(Y, actor_covariates, event_covariates, dyad_covariates, **kw)

    def with_Y(self, Y) -> "AffiliationDataset":
        """Same covariates and labels, different tie matrix."""
        import dataclasses

        return dataclasses.replace(self, Y=Y)


def _as_2d(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(n, 0)
    if x.ndim != 2 or x.shape[0] != n:
        raise DataError(f"{name} must have {n} rows, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class CycleCensus:
    """Counts over all tetrads (unordered actor pair x unordered event pair).

    ``by_tie_count[c]`` counts tetrads carrying ``c`` ties. Among two-tie
    tetrads, ``disjoint`` is the 1-L2 pattern, ``shared_actor`` the actor
    two-path (1-L_A2) and ``shared_event`` the event two-path (1-L_E2).
    """

    total_tetrads: int
    balanced: int
    by_tie_count: dict[int, int]
    two_tie_breakdown: dict[str, int] = field(default_factory=dict)

    @property
    def configurations(self) -> dict[str, int]:
        """Balanced tetrads keyed by configuration name."""
        return {
            "0-L2": self.by_tie_count[0],
            "1-L2": self.two_tie_breakdown["disjoint"],
            "1-L_A2": self.two_tie_breakdown["shared_actor"],
            "1-L_E2": self.two_tie_breakdown["shared_event"],
            "C4": self.by_tie_count[4],
        }

    @property
    def proportion(self) -> float:
        return self.balanced / self.total_tetrads


# ---------------------------------------------------------------- ingestion


def _read_csv(path, required_first):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != required_first:
        raise DataError(f"{path}: first column must be '{required_first}', got '{header[0]}'")
    body = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        body.append([c.strip() for c in r])
    return header, body


def _unique_ids(ids, path, what):
    seen = set()
    for x in ids:
        if x == "":
            raise DataError(f"{path}: empty {what} id")
        if x in seen:
            raise DataError(f"{path}: duplicate {what} id '{x}'")
        seen.add(x)


def _expand_covariates(header, body, path, base_levels):
    """Numeric columns pass through; other columns become indicators against a base level."""
    columns, names = [], []
    for j, name in enumerate(header):
        values = [r[j] for r in body]
        if any(v == "" or v.upper() in ("NA", "NAN") for v in values):
            raise DataError(f"{path}: missing value in column '{name}'")
        try:
            columns.append(np.array([float(v) for v in values]))
            names.append(name)
            continue
        except ValueError:
            pass
        levels = sorted(set(values))
        base = base_levels.get(name, levels[0])
        if base not in levels:
            raise DataError(f"{path}: base level '{base}' not present in column '{name}'")
        for lev in levels:
            if lev == base:
                continue
            columns.append(np.array([1.0 if v == lev else 0.0 for v in values]))
            names.append(f"{name}={lev}")
    n = len(body)
    X = np.column_stack(columns) if columns else np.zeros((n, 0))
    return X, tuple(names)


def load_dataset(edge_file, actor_file, event_file, grouping_map=None, base_levels=None) -> AffiliationDataset:
    """Read edge/actor/event CSVs into a validated dataset.

    When ``grouping_map`` (CSV ``event_id,group``) is given, events sharing a
    group are merged by logical OR and the column takes the group name.
    Numeric event covariates of merged events are averaged over members.
    """
    base_levels = dict(base_levels or {})

    a_header, a_body = _read_csv(actor_file, "actor_id")
    actor_ids = [r[0] for r in a_body]
    _unique_ids(actor_ids, actor_file, "actor")
    marks = None
    cov_cols = list(range(1, len(a_header)))
    if MARK_COLUMN in a_header[1:]:
        m = a_header.index(MARK_COLUMN)
        marks = tuple(r[m] for r in a_body)
        cov_cols.remove(m)
    X_a, a_names = _expand_covariates(
        [a_header[j] for j in cov_cols], [[r[j] for j in cov_cols] for r in a_body], actor_file, base_levels
    )

    e_header, e_body = _read_csv(event_file, "event_id")
    raw_events = [r[0] for r in e_body]
    _unique_ids(raw_events, event_file, "event")
    X_e_raw, e_names = _expand_covariates(e_header[1:], [r[1:] for r in e_body], event_file, base_levels)

    group_of = {x: x for x in raw_events}
    if grouping_map is not None:
        g_header, g_body = _read_csv(grouping_map, "event_id")
        if len(g_header) < 2:
            raise DataError(f"{grouping_map}: expected columns event_id,group")
        seen = set()
        for r in g_body:
            if r[0] not in group_of:
                raise DataError(f"{grouping_map}: unknown event id '{r[0]}'")
            if r[0] in seen:
                raise DataError(f"{grouping_map}: duplicate event id '{r[0]}'")
            if r[1] == "":
                raise DataError(f"{grouping_map}: empty group for '{r[0]}'")
            seen.add(r[0])
            group_of[r[0]] = r[1]
    event_ids = list(dict.fromkeys(group_of[x] for x in raw_events))
    col_of = {g: k for k, g in enumerate(event_ids)}
    raw_col = np.array([col_of[group_of[x]] for x in raw_events])
    X_e = np.zeros((len(event_ids), X_e_raw.shape[1]))
    counts = np.bincount(raw_col, minlength=len(event_ids))
    np.add.at(X_e, raw_col, X_e_raw)
    X_e /= counts[:, None]

    ed_header, ed_body = _read_csv(edge_file, "actor_id")
    if len(ed_header) < 2 or ed_header[1] != "event_id":
        raise DataError(f"{edge_file}: header must be actor_id,event_id[,weight]")
    has_weight = len(ed_header) > 2 and ed_header[2] == "weight"
    row_of = {x: i for i, x in enumerate(actor_ids)}
    raw_index = {x: j for j, x in enumerate(raw_events)}
    Y = np.zeros((len(actor_ids), len(event_ids)), dtype=np.int8)
    for lineno, r in enumerate(ed_body, start=2):
        a, e = r[0], r[1]
        if a not in row_of:
            raise DataError(f"{edge_file}:{lineno}: unknown actor id '{a}'")
        if e not in raw_index:
            raise DataError(f"{edge_file}:{lineno}: unknown event id '{e}'")
        w = r[2] if has_weight else "1"
        try:
            wv = float(w)
        except ValueError:
            raise DataError(f"{edge_file}:{lineno}: weight '{w}' is not a number") from None
        if wv not in (0.0, 1.0):
            raise DataError(f"{edge_file}:{lineno}: non-binary weight '{w}'")
        if wv == 1.0:
            Y[row_of[a], raw_col[raw_index[e]]] = 1

    n_a, n_e = Y.shape
    return AffiliationDataset(
        Y=Y,
        actor_covariates=X_a,
        event_covariates=X_e,
        dyad_covariates=np.ones((n_a, n_e, 1)),
        actor_ids=tuple(actor_ids),
        event_ids=tuple(event_ids),
        actor_marks=marks,
        actor_covariate_names=a_names,
        event_covariate_names=e_names,
    )


# ---------------------------------------------------------------- statistics


def _matrix(data) -> np.ndarray:
    if isinstance(data, AffiliationDataset):
        return data.Y
    Y = np.asarray(data)
    if Y.ndim != 2 or not np.all((Y == 0) | (Y == 1)):
        raise DataError("expected a binary 2-D matrix")
    return Y


def project(data, mode: str = "actor") -> np.ndarray:
    """One-mode projection: ``Y Y'`` for actors, ``Y' Y`` for events."""
    Y = _matrix(data).astype(np.int64)
    if mode == "actor":
        return Y @ Y.T
    if mode == "event":
        return Y.T @ Y
    raise ValueError(f"mode must be 'actor' or 'event', got {mode!r}")


def tie_density(data) -> float:
    Y = _matrix(data)
    return float(Y.sum()) / Y.size


def _pattern_counts(Y):
    """Per event pair (k<l): numbers of actors with row pattern 00, 10, 01, 11."""
    Y = Y.astype(np.int64)
    n_a = Y.shape[0]
    deg = Y.sum(axis=0)
    both = Y.T @ Y
    k, l = np.triu_indices(Y.shape[1], 1)
    n11 = both[k, l]
    n10 = deg[k] - n11
    n01 = deg[l] - n11
    n00 = n_a - n10 - n01 - n11
    return n00, n10, n01, n11


def _c2(x):
    return x * (x - 1) // 2


def cycle_census(data) -> CycleCensus:
    """Classify all tetrads by tie count, aggregated per event pair.

    For an event pair each actor shows one of four row patterns; a pair of
    actors forms a tetrad whose tie count is the sum of their patterns.
    """
    Y = _matrix(data)
    n_a, n_e = Y.shape
    if n_a < 2 or n_e < 2:
        raise DataError(f"tetrad statistics need at least 2 actors and 2 events, got {Y.shape}")
    n00, n10, n01, n11 = _pattern_counts(Y)
    one = n10 + n01
    by = {
        0: int(_c2(n00).sum()),
        1: int((n00 * one).sum()),
        2: 0,
        3: int((n11 * one).sum()),
        4: int(_c2(n11).sum()),
    }
    two = {
        "disjoint": int((n10 * n01).sum()),
        "shared_actor": int((n00 * n11).sum()),
        "shared_event": int((_c2(n10) + _c2(n01)).sum()),
    }
    by[2] = sum(two.values())
    agree, disagree = n00 + n11, one
    balanced = int((_c2(agree) + _c2(disagree)).sum())
    total = math.comb(n_a, 2) * math.comb(n_e, 2)
    return CycleCensus(total_tetrads=total, balanced=balanced, by_tie_count=by, two_tie_breakdown=two)


def balance_proportion(data) -> float:
    """Fraction of tetrads whose signed tie product is +1."""
    Y = _matrix(data)
    n_a, n_e = Y.shape
    if n_a < 2 or n_e < 2:
        raise DataError(f"tetrad statistics need at least 2 actors and 2 events, got {Y.shape}")
    n00, n10, n01, n11 = _pattern_counts(Y)
    agree = n00 + n11
    balanced = (_c2(agree) + _c2(n_a - agree)).sum()
    return float(balanced) / (math.comb(n_a, 2) * math.comb(n_e, 2))


def expected_balance_under_independence(p0: float) -> float:
    """Balanced-tetrad proportion when every tie is i.i.d. Bernoulli(p0)."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    q = 1.0 - p0
    return p0**4 + q**4 + 6.0 * p0**2 * q**2


@dataclass(frozen=True)
class RandomizationResult:
    observed: float
    p0: float
    null_proportions: np.ndarray
    p_value: float

    def quantiles(self, qs=(0.0, 0.025, 0.5, 0.975, 1.0)) -> dict[float, float]:
        return {q: float(np.quantile(self.null_proportions, q)) for q in qs}


def balance_randomization_test(data, n_reps: int = 100, seed: int | None = None, n_jobs: int = 1):
    """Compare observed balance with i.i.d. Bernoulli(p0) matrices of the same shape.

    Replicate ``r`` draws from its own substream, so results do not depend on
    ``n_jobs``.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    Y = _matrix(data)
    observed = balance_proportion(Y)
    p0 = tie_density(Y)

    def one(r):
        rng = substream(seed, "balance-null", r)
        return balance_proportion((rng.random(Y.shape) < p0).astype(np.int8))

    if n_jobs == 1:
        null = [one(r) for r in range(n_reps)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            null = list(ex.map(one, range(n_reps)))
    null = np.array(null)
    p_value = float(np.mean(null >= observed))
    return RandomizationResult(observed=observed, p0=p0, null_proportions=null, p_value=p_value)
