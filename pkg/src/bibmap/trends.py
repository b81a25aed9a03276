"""Time-series analytics: per-year publication counts, citation totals by
publication year, polynomial trend fitting, and category weights.

The trend model is a truncated Taylor expansion around an origin year t0:

    n(t) = c0 + c1 (t - t0) + c2 (t - t0)^2 + ... up to max_degree

Terms are chosen by classical stepwise selection: forward-add the candidate
with the smallest t-test p-value while it clears alpha_enter, then
backward-drop any included term whose p-value exceeds alpha_exit, repeated
to a fixpoint. The intercept is always kept. OLS is solved through a QR
decomposition; centering years at t0 keeps the design well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats
from scipy.linalg import solve_triangular

from bibmap.errors import RegressionError
from bibmap.queries import ALL_FIELDS, FieldMask, QueryAst, match_reference
from bibmap.records import Corpus

DEFAULT_MAX_DEGREE = 4
DEFAULT_ALPHA_ENTER = 0.05
DEFAULT_ALPHA_EXIT = 0.10

# SSR below this fraction of SST counts as a perfect fit; stepping stops
# because t-tests are meaningless at zero residual
_PERFECT_FIT_RTOL = 1e-12
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class TimeSeries:
    points: tuple[tuple[int, float], ...]
    partial_year: int | None = None   # excluded from fits, kept in tables
    unyeared: int = 0                 # references without a year
    uncited: int = 0                  # references lacking a citation count

    def __post_init__(self):
        years = [year for year, _ in self.points]
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("time series years must be strictly increasing")
        if self.partial_year is not None and self.partial_year not in years:
            raise ValueError(f"partial year {self.partial_year} is not in the series")

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(year for year, _ in self.points)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(value for _, value in self.points)

    def fit_points(self) -> tuple[tuple[int, float], ...]:
        """Points usable for fitting: the partial year is dropped."""
        return tuple(p for p in self.points if p[0] != self.partial_year)


def _partial_year_for(corpus: Corpus, to_year: int) -> int | None:
    if corpus.retrieval_date is not None and corpus.retrieval_date.year == to_year:
        return to_year
    return None


def counts_per_year(corpus: Corpus, from_year: int, to_year: int) -> TimeSeries:
    """References published per year, zero-filled over [from_year, to_year]."""
    if from_year > to_year:
        raise ValueError(f"year range reversed: {from_year} > {to_year}")
    counts = {year: 0 for year in range(from_year, to_year + 1)}
    unyeared = 0
    for ref in corpus:
        if ref.year is None:
            unyeared += 1
        elif from_year <= ref.year <= to_year:
            counts[ref.year] += 1
    points = tuple((year, float(counts[year])) for year in sorted(counts))
    return TimeSeries(points=points, partial_year=_partial_year_for(corpus, to_year),
                      unyeared=unyeared)


def cumulative_citations_per_year(corpus: Corpus, from_year: int,
                                  to_year: int) -> TimeSeries:
    """Total citations received, grouped by publication year. A reference
    without an attached count contributes 0 and is tallied in `uncited`."""
    if from_year > to_year:
        raise ValueError(f"year range reversed: {from_year} > {to_year}")
    totals = {year: 0 for year in range(from_year, to_year + 1)}
    unyeared = 0
    uncited = 0
    for ref in corpus:
        if ref.citation_count is None:
            uncited += 1
        if ref.year is None:
            unyeared += 1
        elif from_year <= ref.year <= to_year:
            totals[ref.year] += ref.citation_count or 0
    points = tuple((year, float(totals[year])) for year in sorted(totals))
    return TimeSeries(points=points, partial_year=_partial_year_for(corpus, to_year),
                      unyeared=unyeared, uncited=uncited)


@dataclass(frozen=True)
class RegressionModel:
    t0: int
    max_degree: int
    degrees: tuple[int, ...]            # selected polynomial degrees, sorted
    coefficients: dict                  # degree -> coefficient; 0 is the intercept
    std_errors: dict                    # degree -> standard error
    p_values: dict                      # degree -> two-sided t-test p-value
    r2: float | None                    # None when SST = 0 (constant series)
    sigma: float
    n_points: int

    def __post_init__(self):
        if sorted(self.degrees) != list(self.degrees):
            raise ValueError("selected degrees must be sorted")
        if len(self.degrees) + 1 > self.n_points:
            raise ValueError("more parameters than points")


def predict(model: RegressionModel, t: float) -> float:
    dt = t - model.t0
    value = model.coefficients[0]
    for degree in model.degrees:
        value += model.coefficients[degree] * dt ** degree
    return value


def _pvalue(coef: float, se: float, dof: int) -> float:
    if se == 0.0:
        return 0.0 if coef != 0.0 else 1.0
    if dof < 1:
        return 1.0
    t_stat = abs(coef / se)
    return 2.0 * float(_scipy_stats.t.sf(t_stat, dof))


def _ols(x: np.ndarray, y: np.ndarray, degrees: tuple[int, ...]):
    """Intercept + the given power columns, solved via QR.

    Returns (coefs, std_errors, p_values, ssr) with entries keyed 0 for the
    intercept and each degree for its power term.
    """
    n = len(y)
    columns = [np.ones(n)] + [x ** degree for degree in degrees]
    design = np.column_stack(columns)
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = _RANK_RTOL * (diag.max() if diag.size else 1.0)
    bad = [i for i, d in enumerate(diag) if d <= tol]
    if bad:
        names = ["intercept" if i == 0 else f"(t-t0)^{degrees[i - 1]}" for i in bad]
        raise RegressionError(f"design matrix is rank deficient; collinear columns: "
                              + ", ".join(names))
    coefs = solve_triangular(r, q.T @ y)
    residuals = y - design @ coefs
    ssr = float(residuals @ residuals)
    dof = n - design.shape[1]
    sigma2 = ssr / dof if dof > 0 else 0.0
    r_inv = solve_triangular(r, np.eye(design.shape[1]))
    var = sigma2 * np.sum(r_inv * r_inv, axis=1)
    ses = np.sqrt(np.maximum(var, 0.0))
    keys = [0] + list(degrees)
    coef_map = {k: float(c) for k, c in zip(keys, coefs)}
    se_map = {k: float(s) for k, s in zip(keys, ses)}
    p_map = {k: _pvalue(coef_map[k], se_map[k], dof) for k in keys}
    return coef_map, se_map, p_map, ssr


def fit_stepwise(series: TimeSeries, t0: int,
                 max_degree: int = DEFAULT_MAX_DEGREE,
                 alpha_enter: float = DEFAULT_ALPHA_ENTER,
                 alpha_exit: float = DEFAULT_ALPHA_EXIT) -> RegressionModel:
    """Stepwise polynomial fit of the series around t0."""
    points = series.fit_points()
    n = len(points)
    if max_degree < 1:
        raise RegressionError(f"max degree must be at least 1, got {max_degree}")
    if n < max_degree + 2:
        raise RegressionError(
            f"need at least {max_degree + 2} points to fit degree {max_degree}, "
            f"got {n}")
    years = [year for year, _ in points]
    if not years[0] <= t0 <= years[-1]:
        raise RegressionError(f"origin year {t0} lies outside the series "
                              f"range {years[0]}..{years[-1]}")

    x = np.array([year - t0 for year in years], dtype=float)
    y = np.array([value for _, value in points], dtype=float)
    sst = float(np.sum((y - y.mean()) ** 2))

    selected: list[int] = []
    coef_map, se_map, p_map, ssr = _ols(x, y, ())

    def perfect(current_ssr: float) -> bool:
        return current_ssr <= _PERFECT_FIT_RTOL * sst or (sst == 0.0 and current_ssr == 0.0)

    seen = {frozenset()}   # visited term sets; breaks add/remove cycles
    if sst > 0.0:
        while not perfect(ssr):
            # forward: try each remaining degree, take the lowest p-value entrant
            best = None
            for degree in range(1, max_degree + 1):
                if degree in selected:
                    continue
                trial = tuple(sorted(selected + [degree]))
                if n - (len(trial) + 1) < 1:
                    continue
                try:
                    cand = _ols(x, y, trial)
                except RegressionError:
                    continue
                p_new = cand[2][degree]
                if p_new < alpha_enter and (best is None or p_new < best[0]):
                    best = (p_new, degree, trial, cand)
            if best is None:
                break
            _, _, selected_t, (coef_map, se_map, p_map, ssr) = best
            selected = list(selected_t)
            # backward: drop the worst offender until everything clears alpha_exit
            while selected and not perfect(ssr):
                worst = max(selected, key=lambda d: p_map[d])
                if p_map[worst] <= alpha_exit:
                    break
                selected.remove(worst)
                coef_map, se_map, p_map, ssr = _ols(x, y, tuple(selected))
            state = frozenset(selected)
            if state in seen:
                break
            seen.add(state)

    degrees = tuple(sorted(selected))
    dof = n - (len(degrees) + 1)
    sigma = (ssr / dof) ** 0.5 if dof > 0 else 0.0
    # the intercept is always in the model, so SSR <= SST up to rounding;
    # clamp so an intercept-only fit cannot report r2 = -epsilon
    r2 = max(0.0, 1.0 - ssr / sst) if sst > 0.0 else None
    return RegressionModel(t0=t0, max_degree=max_degree, degrees=degrees,
                           coefficients=coef_map, std_errors=se_map,
                           p_values=p_map, r2=r2, sigma=sigma, n_points=n)


@dataclass(frozen=True)
class CategorySpec:
    name: str
    query: QueryAst
    mask: FieldMask = ALL_FIELDS

    def __post_init__(self):
        if not self.name:
            raise ValueError("category needs a non-empty name")


@dataclass(frozen=True)
class CategoryRow:
    name: str
    count: int
    ids: tuple[str, ...]


@dataclass(frozen=True)
class CategoryTable:
    rows: tuple[CategoryRow, ...] = ()
    explicit_total: int = 0   # distinct references matching at least one category


def category_counts(corpus: Corpus, specs: list[CategorySpec]) -> CategoryTable:
    """Per-category match counts; a reference may land in several categories."""
    rows = []
    matched_any: set[str] = set()
    for spec in specs:
        ids = tuple(ref.id for ref in corpus
                    if match_reference(ref, spec.query, spec.mask))
        rows.append(CategoryRow(name=spec.name, count=len(ids), ids=ids))
        matched_any.update(ids)
    return CategoryTable(rows=tuple(rows), explicit_total=len(matched_any))
