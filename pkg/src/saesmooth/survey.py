"""Survey microdata and design-weighted direct estimation.

Implements the Hájek ratio estimator of an area proportion and its
with-replacement multistage variance estimator, computed as a sum over
clusters of weighted residual totals.  Stage-wise cluster inclusion
probabilities are assumed to be absorbed into the unit weights, so the
variance works from weighted cluster totals only.  Within an area the
clusters of all strata are pooled into a single sum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "SurveyUnit",
    "SurveyDataset",
    "DirectEstimates",
    "hajek_estimate",
    "hajek_variance",
    "direct_estimates",
]

REQUIRED_COLUMNS = ("response", "weight", "stratum", "cluster", "area")


def _number_formatter(sig_digits):
    # full-precision repr round-trips exactly; fixed digits give stable files
    if sig_digits is None:
        return lambda v: repr(float(v))
    return lambda v: format(float(v), f".{int(sig_digits)}g")


@dataclass(frozen=True)
class SurveyUnit:
    """One sampled individual.

    ``weight`` is the final design weight (inverse inclusion probability,
    all stages combined).  ``response`` must be 0 or 1.
    """

    response: int
    weight: float
    stratum_id: str
    cluster_id: str
    area_id: str

    def __post_init__(self):
        if self.response not in (0, 1):
            raise ValidationError(
                f"response must be 0 or 1, got {self.response!r}"
            )
        if not (self.weight > 0 and np.isfinite(self.weight)):
            raise ValidationError(
                f"weight must be positive and finite, got {self.weight!r}"
            )


class SurveyDataset:
    """Unit-level records of a stratified two-stage cluster sample.

    Stored column-wise (integer-coded identifiers) for fast aggregation;
    the ``units`` property reconstructs :class:`SurveyUnit` views on
    demand.  The area universe is fixed at construction and may include
    areas with no sampled units.

    Parameters
    ----------
    units : iterable of SurveyUnit
    areas : sequence of str
        All area identifiers in canonical order, including unsampled ones.
    """

    def __init__(self, units, areas):
        units = list(units)
        self.areas: tuple[str, ...] = tuple(str(a) for a in areas)
        if len(set(self.areas)) != len(self.areas):
            raise ValidationError("duplicate names in area universe")
        resp = np.fromiter((u.response for u in units), dtype=np.int8, count=len(units))
        wt = np.fromiter((u.weight for u in units), dtype=np.float64, count=len(units))
        self._init_columns(
            resp,
            wt,
            [u.stratum_id for u in units],
            [u.cluster_id for u in units],
            [u.area_id for u in units],
        )

    def _init_columns(self, response, weight, strata, clusters, unit_areas):
        area_index = {a: i for i, a in enumerate(self.areas)}
        try:
            area_code = np.array([area_index[str(a)] for a in unit_areas], dtype=np.int64)
        except KeyError:
            bad = sorted({str(a) for a in unit_areas} - set(self.areas))
            raise ValidationError(
                f"unit area(s) not in area universe: {bad[:5]}"
            ) from None
        strata = [str(s) for s in strata]
        clusters = [str(c) for c in clusters]
        self.stratum_names = sorted(set(strata)) if strata else []
        self.cluster_names = sorted(set(clusters)) if clusters else []
        s_index = {s: i for i, s in enumerate(self.stratum_names)}
        c_index = {c: i for i, c in enumerate(self.cluster_names)}
        self.response = response
        self.weight = weight
        self.stratum_code = np.array([s_index[s] for s in strata], dtype=np.int64)
        self.cluster_code = np.array([c_index[c] for c in clusters], dtype=np.int64)
        self.area_code = area_code
        self._check_cluster_nesting()

    def _check_cluster_nesting(self):
        # Each cluster must sit inside exactly one stratum and one area.
        for label, codes in (("stratum", self.stratum_code), ("area", self.area_code)):
            first = {}
            for c, v in zip(self.cluster_code, codes):
                prev = first.setdefault(int(c), int(v))
                if prev != int(v):
                    raise ValidationError(
                        f"cluster {self.cluster_names[int(c)]!r} appears in "
                        f"more than one {label}"
                    )

    @classmethod
    def from_arrays(cls, response, weight, strata, clusters, unit_areas, areas):
        """Fast constructor from parallel columns (validates like __init__)."""
        self = cls.__new__(cls)
        self.areas = tuple(str(a) for a in areas)
        if len(set(self.areas)) != len(self.areas):
            raise ValidationError("duplicate names in area universe")
        response = np.asarray(response, dtype=np.int8)
        weight = np.asarray(weight, dtype=np.float64)
        bad = ~np.isin(response, (0, 1))
        if bad.any():
            raise ValidationError(
                f"responses must be 0 or 1 ({int(bad.sum())} other values found)"
            )
        if not np.all((weight > 0) & np.isfinite(weight)):
            raise ValidationError("weights must be positive and finite")
        self._init_columns(response, weight, strata, clusters, unit_areas)
        return self

    @classmethod
    def from_csv(cls, path, areas=None):
        """Read microdata from CSV.

        Required columns: ``response, weight, stratum, cluster, area``
        (header row mandatory, UTF-8).  A row whose response is not the
        literal 0 or 1, or whose weight is not a positive number, is
        rejected with its file line number.  When ``areas`` is omitted the
        universe is the area identifiers in order of first appearance.
        """
        resp, wt, strata, clusters, unit_areas = [], [], [], [], []
        seen_areas: dict[str, None] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ValidationError(f"{path}: empty file, header row required")
            missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise ValidationError(
                    f"{path}: missing required column(s): {', '.join(missing)}"
                )
            for row in reader:
                lineno = reader.line_num
                r = (row["response"] or "").strip()
                if r not in ("0", "1"):
                    raise ValidationError(
                        f"{path}:{lineno}: response must be 0 or 1, got {r!r}"
                    )
                try:
                    w = float(row["weight"])
                except (TypeError, ValueError):
                    w = float("nan")
                if not (w > 0 and np.isfinite(w)):
                    raise ValidationError(
                        f"{path}:{lineno}: weight must be a positive number, "
                        f"got {row['weight']!r}"
                    )
                resp.append(int(r))
                wt.append(w)
                strata.append(row["stratum"].strip())
                clusters.append(row["cluster"].strip())
                a = row["area"].strip()
                unit_areas.append(a)
                seen_areas.setdefault(a)
        if areas is None:
            areas = list(seen_areas)
        return cls.from_arrays(resp, wt, strata, clusters, unit_areas, areas)

    def to_csv(self, path, sig_digits=None):
        """Write the microdata back out; ``sig_digits`` rounds the weights."""
        fmt = _number_formatter(sig_digits)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REQUIRED_COLUMNS)
            for i in range(len(self.response)):
                writer.writerow(
                    [
                        int(self.response[i]),
                        fmt(self.weight[i]),
                        self.stratum_names[self.stratum_code[i]],
                        self.cluster_names[self.cluster_code[i]],
                        self.areas[self.area_code[i]],
                    ]
                )

    @property
    def n_units(self) -> int:
        return len(self.response)

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    @property
    def units(self):
        """Iterate over the rows as :class:`SurveyUnit` objects."""
        for i in range(self.n_units):
            yield SurveyUnit(
                response=int(self.response[i]),
                weight=float(self.weight[i]),
                stratum_id=self.stratum_names[self.stratum_code[i]],
                cluster_id=self.cluster_names[self.cluster_code[i]],
                area_id=self.areas[self.area_code[i]],
            )

    def area_index(self, area) -> int:
        try:
            return self.areas.index(str(area))
        except ValueError:
            raise KeyError(f"unknown area: {area!r}") from None


@dataclass(frozen=True, eq=False)
class DirectEstimates:
    """Per-area direct estimates, the response data for all area models.

    Arrays follow the canonical area order.  ``p_hat`` is NaN for an area
    with no sampled units; ``v_hat`` is NaN wherever ``has_variance`` is
    false (fewer than two sampled clusters).  ``dof`` equals ``m - 1`` for
    areas with a variance estimate and 0 otherwise.
    """

    areas: tuple[str, ...]
    p_hat: np.ndarray
    v_hat: np.ndarray
    dof: np.ndarray
    n: np.ndarray
    m: np.ndarray
    sampled: np.ndarray
    has_variance: np.ndarray

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    def to_csv(self, path, sig_digits=None):
        fmt = _number_formatter(sig_digits)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["area", "p_hat", "v_hat", "dof", "n_units", "n_clusters", "sampled"]
            )
            for i, a in enumerate(self.areas):
                writer.writerow(
                    [
                        a,
                        fmt(self.p_hat[i]) if self.sampled[i] else "",
                        fmt(self.v_hat[i]) if self.has_variance[i] else "",
                        int(self.dof[i]),
                        int(self.n[i]),
                        int(self.m[i]),
                        int(self.sampled[i]),
                    ]
                )

    @classmethod
    def from_csv(cls, path):
        areas, p, v, dof, n, m, sampled = [], [], [], [], [], [], []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            need = ["area", "p_hat", "v_hat", "dof", "n_units", "n_clusters", "sampled"]
            if reader.fieldnames is None or any(
                c not in reader.fieldnames for c in need
            ):
                raise ValidationError(
                    f"{path}: direct-estimates file must have columns {need}"
                )
            for row in reader:
                lineno = reader.line_num
                try:
                    areas.append(row["area"])
                    sampled.append(bool(int(row["sampled"])))
                    p.append(float(row["p_hat"]) if row["p_hat"] else np.nan)
                    v.append(float(row["v_hat"]) if row["v_hat"] else np.nan)
                    dof.append(int(row["dof"]))
                    n.append(int(row["n_units"]))
                    m.append(int(row["n_clusters"]))
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from None
        if len(set(areas)) != len(areas):
            raise ValidationError(f"{path}: duplicate area rows")
        return cls(
            areas=tuple(areas),
            p_hat=np.array(p),
            v_hat=np.array(v),
            dof=np.array(dof, dtype=np.int64),
            n=np.array(n, dtype=np.int64),
            m=np.array(m, dtype=np.int64),
            sampled=np.array(sampled, dtype=bool),
            has_variance=np.isfinite(np.array(v)),
        )


def _area_rows(dataset: SurveyDataset, area) -> np.ndarray:
    code = dataset.area_index(area)
    return np.flatnonzero(dataset.area_code == code)


def hajek_estimate(dataset: SurveyDataset, area) -> float:
    """Weight-ratio estimate of the proportion in one area.

    ``p_hat = sum(w_i * y_i) / sum(w_i)`` over the area's units.

    Raises
    ------
    ValidationError
        If the area has no sampled units (distinct from an estimate of 0).
    """
    rows = _area_rows(dataset, area)
    if rows.size == 0:
        raise ValidationError(f"no data for area {area!r}")
    w = dataset.weight[rows]
    y = dataset.response[rows].astype(np.float64)
    return float((w * y).sum() / w.sum())


def hajek_variance(dataset: SurveyDataset, area) -> tuple[float, int]:
    """Cluster-based variance of the Hájek estimate, with degrees of freedom.

    Uses the with-replacement multistage estimator on residuals: with
    ``z_j = sum_{i in j} w_i (y_i - p_hat)`` the weighted residual total of
    cluster ``j`` and ``W`` the total weight in the area,

    ``v_hat = m / (m - 1) * sum_j (z_j - mean(z))**2 / W**2``

    over the area's ``m`` sampled clusters (all strata pooled), and
    ``dof = m - 1``.

    Raises
    ------
    ValidationError
        If the area has fewer than two sampled clusters.
    """
    rows = _area_rows(dataset, area)
    if rows.size == 0:
        raise ValidationError(f"no data for area {area!r}")
    clusters = dataset.cluster_code[rows]
    _, local = np.unique(clusters, return_inverse=True)
    m = int(local.max()) + 1
    if m < 2:
        raise ValidationError(
            f"variance inestimable for area {area!r}: only {m} sampled cluster"
        )
    w = dataset.weight[rows]
    y = dataset.response[rows].astype(np.float64)
    p_hat = float((w * y).sum() / w.sum())
    z = np.bincount(local, weights=w * (y - p_hat), minlength=m)
    dev = z - z.mean()
    v = m / (m - 1) * float((dev * dev).sum()) / float(w.sum()) ** 2
    return v, m - 1


def direct_estimates(dataset: SurveyDataset) -> DirectEstimates:
    """Direct estimates for every area in the universe.

    Unsampled areas are flagged, never imputed.  Per-area values equal the
    single-area operations applied independently.
    """
    a_count = dataset.n_areas
    p = np.full(a_count, np.nan)
    v = np.full(a_count, np.nan)
    dof = np.zeros(a_count, dtype=np.int64)
    n = np.bincount(dataset.area_code, minlength=a_count).astype(np.int64)
    m = np.zeros(a_count, dtype=np.int64)
    for i, area in enumerate(dataset.areas):
        rows = np.flatnonzero(dataset.area_code == i)
        if rows.size == 0:
            continue
        m[i] = len(np.unique(dataset.cluster_code[rows]))
        p[i] = hajek_estimate(dataset, area)
        if m[i] >= 2:
            v[i], d = hajek_variance(dataset, area)
            dof[i] = d
    return DirectEstimates(
        areas=dataset.areas,
        p_hat=p,
        v_hat=v,
        dof=dof,
        n=n,
        m=m,
        sampled=n > 0,
        has_variance=np.isfinite(v),
    )
