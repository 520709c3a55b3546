"""Conditional independence tests for continuous, discrete and mixed data.

All three tests return a :class:`TestResult`. Degenerate inputs (constant
columns, no usable strata) never raise; they yield ``p_value = 1`` and a
flag from :data:`DEGENERATE_FLAGS` so a single bad column cannot abort an
audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal

import numpy as np
from scipy import stats

from .data import Dataset, Kind
from .errors import InsufficientSamples, InvalidQuery

TestKind = Literal["partial_correlation", "chi_squared", "residual_pillai"]

DEGENERATE_FLAGS = frozenset({"degenerate_column", "single_level", "all_strata_sparse", "zero_df"})

PILLAI_MIN_SAMPLES = 50


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    test_kind: TestKind
    x: str
    y: str
    z: tuple[str, ...]
    effective_samples: int
    flags: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)
    q_value: float | None = None

    @property
    def degenerate(self) -> bool:
        return any(f in DEGENERATE_FLAGS for f in self.flags)

    def with_q(self, q: float) -> TestResult:
        return replace(self, q_value=float(q))

    def to_json(self) -> dict:
        return {
            "test_kind": self.test_kind,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "q_value": self.q_value,
            "effective_samples": self.effective_samples,
            "flags": list(self.flags),
            "details": self.details,
        }


@dataclass(frozen=True)
class RegressorConfig:
    """Residualizer for the mixed-data test."""

    family: Literal["gradient_boosted_trees", "linear"] = "gradient_boosted_trees"
    tree_count: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("gradient_boosted_trees", "linear"):
            raise ValueError(f"unknown regressor family {self.family!r}")
        if self.tree_count < 1 or self.max_depth < 1:
            raise ValueError("tree_count and max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")


def _ordered_z(ds: Dataset, x: str, y: str, z: Iterable[str]) -> tuple[str, ...]:
    z = set(z)
    if x == y:
        raise InvalidQuery("x and y must differ")
    if x in z or y in z:
        raise InvalidQuery("conditioning set must exclude x and y")
    for var in (x, y, *z):
        if var not in ds.columns:
            raise InvalidQuery(f"unknown variable {var!r}")
    return tuple(v for v in ds.ids if v in z)


def _clip_p(p: float) -> float:
    if not math.isfinite(p):
        return 1.0
    return min(1.0, max(0.0, float(p)))


# --- partial correlation ---------------------------------------------------


def _residualize_linear(target: np.ndarray, design: np.ndarray | None) -> np.ndarray:
    """Least-squares residuals with an intercept; no regressors means centering."""
    target = np.asarray(target, dtype=float)
    if design is None or design.shape[1] == 0:
        return target - target.mean(axis=0)
    X = np.column_stack([np.ones(len(target)), design])
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    return target - X @ coef


def _is_flat(residual: np.ndarray, original: np.ndarray) -> bool:
    scale = max(1.0, float(np.std(original)))
    return float(np.std(residual)) <= 1e-10 * scale


def partial_correlation_test(ds: Dataset, x: str, y: str, z: Iterable[str] = ()) -> TestResult:
    """Fisher-z test on the Pearson correlation of least-squares residuals."""
    zs = _ordered_z(ds, x, y, z)
    n = ds.sample_count
    if n <= len(zs) + 3:
        raise InsufficientSamples(f"need N > |z| + 3, got N={n}, |z|={len(zs)}")
    design = np.column_stack([ds[v].astype(float) for v in zs]) if zs else None
    xv, yv = ds[x].astype(float), ds[y].astype(float)
    rx, ry = _residualize_linear(xv, design), _residualize_linear(yv, design)
    if _is_flat(rx, xv) or _is_flat(ry, yv):
        return TestResult(0.0, 1.0, "partial_correlation", x, y, zs, n, ("degenerate_column",), {"r": 0.0})

    rx, ry = rx - rx.mean(), ry - ry.mean()
    r = float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
    limit = 1.0 - 1e-15
    r_used = min(limit, max(-limit, r))
    fisher = 0.5 * math.log((1 + r_used) / (1 - r_used))
    statistic = math.sqrt(n - len(zs) - 3) * abs(fisher)
    p = 2.0 * stats.norm.sf(statistic)
    return TestResult(statistic, _clip_p(p), "partial_correlation", x, y, zs, n, (), {"r": r})


# --- stratified chi-squared -------------------------------------------------


def _strata(ds: Dataset, zs: tuple[str, ...]) -> np.ndarray:
    if not zs:
        return np.zeros(ds.sample_count, dtype=np.int64)
    stacked = np.column_stack([ds.codes(v)[0] for v in zs])
    _, inverse = np.unique(stacked, axis=0, return_inverse=True)
    return inverse.ravel()


def pearson_chi2(table: np.ndarray) -> tuple[float, int]:
    """Pearson statistic and df of a contingency table, ignoring empty rows/columns."""
    table = np.asarray(table, dtype=float)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 0.0, 0
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
    statistic = float(((table - expected) ** 2 / expected).sum())
    return statistic, (table.shape[0] - 1) * (table.shape[1] - 1)


def chi_squared_test(ds: Dataset, x: str, y: str, z: Iterable[str] = ()) -> TestResult:
    """Stratified Pearson chi-squared test.

    A stratum of z is kept only when it holds at least 5 observations per
    x-by-y cell on average; statistics and degrees of freedom are summed over
    kept strata.
    """
    zs = _ordered_z(ds, x, y, z)
    n = ds.sample_count
    xc, lx = ds.codes(x)
    yc, ly = ds.codes(y)
    if lx < 2 or ly < 2:
        return TestResult(0.0, 1.0, "chi_squared", x, y, zs, n, ("single_level",), {"df": 0})

    strata = _strata(ds, zs)
    n_strata = int(strata.max()) + 1
    min_count = 5 * lx * ly
    statistic, df, used, kept = 0.0, 0, 0, 0
    for s in range(n_strata):
        mask = strata == s
        count = int(mask.sum())
        if count < min_count:
            continue
        kept += 1
        used += count
        table = np.zeros((lx, ly))
        np.add.at(table, (xc[mask], yc[mask]), 1)
        stat_s, df_s = pearson_chi2(table)
        statistic += stat_s
        df += df_s

    details = {
        "df": df,
        "strata": n_strata,
        "dropped_strata": n_strata - kept,
        "dropped_fraction": (n - used) / n if n else 0.0,
    }
    flags: list[str] = []
    if kept < n_strata:
        flags.append("pooled_sparse_strata")
    if kept == 0:
        return TestResult(0.0, 1.0, "chi_squared", x, y, zs, 0, tuple(flags + ["all_strata_sparse"]), details)
    if df == 0:
        return TestResult(0.0, 1.0, "chi_squared", x, y, zs, used, tuple(flags + ["zero_df"]), details)
    p = stats.chi2.sf(statistic, df)
    return TestResult(statistic, _clip_p(p), "chi_squared", x, y, zs, used, tuple(flags), details)


# --- residual Pillai's trace -----------------------------------------------


def _block(ds: Dataset, var: str) -> np.ndarray:
    """Continuous columns as-is; discrete ones as indicator columns minus a reference level."""
    if ds.kinds[var] == "continuous":
        return ds[var].astype(float).reshape(-1, 1)
    codes, levels = ds.codes(var)
    onehot = np.zeros((len(codes), levels))
    onehot[np.arange(len(codes)), codes] = 1.0
    return onehot[:, 1:]


def _residualize(block: np.ndarray, design: np.ndarray | None, cfg: RegressorConfig) -> np.ndarray:
    if design is None or cfg.family == "linear":
        return _residualize_linear(block, design)
    from sklearn.ensemble import HistGradientBoostingRegressor

    out = np.empty_like(block)
    for j in range(block.shape[1]):
        model = HistGradientBoostingRegressor(
            max_iter=cfg.tree_count,
            max_depth=cfg.max_depth,
            learning_rate=cfg.learning_rate,
            early_stopping=False,
            random_state=cfg.seed,
        )
        model.fit(design, block[:, j])
        out[:, j] = block[:, j] - model.predict(design)
    return out


def _orthonormal_basis(residuals: np.ndarray) -> np.ndarray:
    centered = residuals - residuals.mean(axis=0)
    if centered.shape[1] == 0:
        return centered
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 1e-12 * math.sqrt(len(centered)):
        return u[:, :0]
    rank = int(np.sum(s > s[0] * max(centered.shape) * np.finfo(float).eps * 10))
    return u[:, :rank]


def canonical_correlations(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Canonical correlations between two column blocks (descending)."""
    qa, qb = _orthonormal_basis(a), _orthonormal_basis(b)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return np.zeros(0)
    return np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), 0.0, 1.0)


def pillai_f_test(trace: float, p: int, q: int, n: int) -> tuple[float, int, int, float]:
    """F approximation for Pillai's trace between blocks of rank p and q over n samples.

    Returns (F, df1, df2, p-value). For p = q = 1 this is the exact
    t-test of a correlation coefficient.
    """
    s = min(p, q)
    df1 = p * q
    df2 = s * (n - 1 + s - p - q)
    if df2 <= 0:
        raise InsufficientSamples(f"Pillai F-approximation needs more samples (df2={df2})")
    if trace >= s:
        return math.inf, df1, df2, 0.0
    f_value = (df2 / df1) * trace / (s - trace)
    return f_value, df1, df2, float(stats.f.sf(f_value, df1, df2))


def residual_pillai_test(
    ds: Dataset,
    x: str,
    y: str,
    z: Iterable[str] = (),
    cfg: RegressorConfig | None = None,
) -> TestResult:
    """Regress x and y on z, then test the residual blocks with Pillai's trace."""
    cfg = cfg or RegressorConfig()
    zs = _ordered_z(ds, x, y, z)
    n = ds.sample_count
    if n < PILLAI_MIN_SAMPLES:
        raise InsufficientSamples(f"mixed test needs N >= {PILLAI_MIN_SAMPLES}, got {n}")

    bx, by = _block(ds, x), _block(ds, y)
    if bx.shape[1] == 0 or by.shape[1] == 0:
        return TestResult(0.0, 1.0, "residual_pillai", x, y, zs, n, ("single_level",))
    design = np.column_stack([_block(ds, v) for v in zs]) if zs else None
    rx, ry = _residualize(bx, design, cfg), _residualize(by, design, cfg)
    qx, qy = _orthonormal_basis(rx), _orthonormal_basis(ry)
    p, q = qx.shape[1], qy.shape[1]
    if p == 0 or q == 0:
        return TestResult(0.0, 1.0, "residual_pillai", x, y, zs, n, ("degenerate_column",))

    flags = ("rank_deficient",) if (p < bx.shape[1] or q < by.shape[1]) else ()
    cc = np.clip(np.linalg.svd(qx.T @ qy, compute_uv=False), 0.0, 1.0)
    trace = float(np.sum(cc**2))
    f_value, df1, df2, pval = pillai_f_test(trace, p, q, n)
    details = {"F": f_value, "df1": df1, "df2": df2, "canonical_correlations": [float(c) for c in cc]}
    return TestResult(trace, _clip_p(pval), "residual_pillai", x, y, zs, n, flags, details)


# --- dispatch ---------------------------------------------------------------


def select_test(kind_x: Kind, kind_y: Kind, kinds_z: Iterable[Kind] = ()) -> TestKind:
    kinds = {kind_x, kind_y, *kinds_z}
    if kinds == {"continuous"}:
        return "partial_correlation"
    if kinds == {"discrete"}:
        return "chi_squared"
    return "residual_pillai"


def ci_test(
    ds: Dataset,
    x: str,
    y: str,
    z: Iterable[str] = (),
    cfg: RegressorConfig | None = None,
) -> TestResult:
    """Run whichever test :func:`select_test` picks for the variables' kinds."""
    z = tuple(z)
    kind = select_test(ds.kinds[x], ds.kinds[y], [ds.kinds[v] for v in z])
    if kind == "partial_correlation":
        return partial_correlation_test(ds, x, y, z)
    if kind == "chi_squared":
        return chi_squared_test(ds, x, y, z)
    return residual_pillai_test(ds, x, y, z, cfg)
