# Copyright 2023 D-Wave
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Least-squares fitting of the interference model and its diagnostic battery.

The model has no intercept, so goodness of fit uses the uncentered total sum of
squares: R^2 = 1 - SSE / sum(y^2). The F statistic compares (SSR / k) with
(SSE / (n - k)) where SSR = sum(fitted^2). Centered R^2 would understate the fit of
a through-origin regression and is not reported.
"""
import logging
import math

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.special
import statsmodels.api as sm
from statsmodels.stats import stattools
from statsmodels.stats.diagnostic import het_breuschpagan

from helpers.errors import (CollinearityError, DegreesOfFreedomError, DomainError,
                            InsufficientDataError, UndefinedCorrelationError)
from helpers.model import FITTED, InterferenceModel

logger = logging.getLogger(__name__)

FEATURE_NAMES = ('t1', 't2', 't3')
CONDITION_LIMIT = 1e10
MIN_RESIDUALS = 8
DEFAULT_ALPHA = 0.05

# interference bands used to summarize a dataset
LOW_BAND = 0.5
HIGH_BAND = 1.0


@dataclass(frozen=True)
class DatasetRow:
    """One co-location of a dataset.

    Attributes:
        features (FeatureRow): model terms and the scores they come from
        observed (float, optional): measured interference level, None when the co-execution failed
        error (str, optional): failure description of the co-execution
    """
    features: object
    observed: Optional[float]
    error: Optional[str] = None

    @property
    def failed(self):
        return self.error is not None or self.observed is None


@dataclass(frozen=True)
class InterferenceDataset:
    """Rows of (co-location features, observed interference level).

    Attributes:
        rows (tuple[DatasetRow]): dataset rows
        calibration_id (str): identifier of the calibration the scores were normalized with
        generated (str): generation timestamp
    """
    rows: Tuple[DatasetRow, ...]
    calibration_id: str = ''
    generated: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'rows', tuple(self.rows))
        for row in self.rows:
            if row.observed is not None and not math.isfinite(row.observed):
                raise DomainError(f'non-finite observed interference in row {row.features.name}')

    def __len__(self):
        return len(self.rows)

    def usable_rows(self, include_failed=False):
        """Rows entering a fit; failed rows only when requested and they carry an observation."""
        if include_failed:
            return [r for r in self.rows if r.observed is not None]
        return [r for r in self.rows if not r.failed]

    def design_matrix(self, include_failed=False):
        rows = self.usable_rows(include_failed)
        return np.array([r.features.as_array() for r in rows], dtype=float).reshape(-1, 3)

    def observations(self, include_failed=False):
        return np.array([r.observed for r in self.usable_rows(include_failed)], dtype=float)


@dataclass(frozen=True)
class FitDiagnostics:
    """Goodness of fit, significance tests and residuals of a fit.

    Attributes:
        r2 (float): uncentered coefficient of determination
        r2_adj (float): adjusted R^2, NaN when undefined (n = k + 1 and imperfect fit)
        f_statistic (float): regression F statistic
        f_pvalue (float): p-value of the F statistic
        t_statistics (tuple[float]): coefficient t statistics
        t_pvalues (tuple[float]): two-sided coefficient p-values
        std_errors (tuple[float]): coefficient standard errors
        residuals (tuple[float]): observed minus fitted
        fitted (tuple[float]): fitted values
        design (tuple[tuple[float]]): design matrix rows
        normality_pvalue (float, optional): Jarque-Bera p-value
        heteroscedasticity_pvalue (float, optional): Breusch-Pagan p-value
        n (int): number of observations
        k (int): number of coefficients
        sse (float): residual sum of squares
        ssr (float): uncentered regression sum of squares
    """
    r2: float
    r2_adj: float
    f_statistic: float
    f_pvalue: float
    t_statistics: Tuple[float, ...]
    t_pvalues: Tuple[float, ...]
    std_errors: Tuple[float, ...]
    residuals: Tuple[float, ...]
    fitted: Tuple[float, ...]
    design: Tuple[Tuple[float, ...], ...]
    normality_pvalue: Optional[float] = None
    heteroscedasticity_pvalue: Optional[float] = None
    n: int = 0
    k: int = 3
    sse: float = 0.0
    ssr: float = 0.0

    def to_dict(self):
        return {
            'r2': self.r2, 'r2_adj': self.r2_adj,
            'f_statistic': self.f_statistic, 'f_pvalue': self.f_pvalue,
            't_statistics': list(self.t_statistics), 't_pvalues': list(self.t_pvalues),
            'std_errors': list(self.std_errors),
            'normality_pvalue': self.normality_pvalue,
            'heteroscedasticity_pvalue': self.heteroscedasticity_pvalue,
            'n': self.n, 'k': self.k, 'sse': self.sse, 'ssr': self.ssr,
            'residuals': list(self.residuals), 'fitted': list(self.fitted),
            'design': [list(r) for r in self.design],
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for key in ('t_statistics', 't_pvalues', 'std_errors', 'residuals', 'fitted'):
            data[key] = tuple(float(x) for x in data.get(key, ()))
        data['design'] = tuple(tuple(float(x) for x in r) for r in data.get('design', ()))
        return cls(**data)


@dataclass(frozen=True)
class CoefficientTest:
    name: str
    t_statistic: float
    pvalue: float
    significant: bool


@dataclass(frozen=True)
class SignificanceReport:
    alpha: float
    f_statistic: float
    f_pvalue: float
    regression_significant: bool
    coefficients: Tuple[CoefficientTest, ...]

    @property
    def all_significant(self):
        return self.regression_significant and all(c.significant for c in self.coefficients)


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    pvalue: float
    passed: bool
    note: str = ''


@dataclass(frozen=True)
class ResidualReport:
    alpha: float
    linearity: CheckResult
    homoscedasticity: CheckResult
    normality: CheckResult

    @property
    def checks(self):
        return (self.linearity, self.homoscedasticity, self.normality)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)


def f_survival(f_statistic, d1, d2):
    """Upper tail of the F distribution through the regularized incomplete beta function."""
    if math.isinf(f_statistic):
        return 0.0
    if f_statistic <= 0:
        return 1.0
    return float(scipy.special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f_statistic)))


def t_two_sided_pvalue(t_statistic, dof):
    """Two-sided p-value of a Student t statistic through the regularized incomplete beta function."""
    if math.isnan(t_statistic):
        return 1.0
    if math.isinf(t_statistic):
        return 0.0
    return float(scipy.special.betainc(dof / 2.0, 0.5, dof / (dof + t_statistic ** 2)))


def _adjusted(r2, n, k):
    if r2 == 1.0:
        return 1.0
    if n <= k + 1:
        raise DegreesOfFreedomError(f'adjusted R^2 needs n > k + 1, got n={n}, k={k}')
    return 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1)


def r2_adjusted(diag, n=None, k=None):
    """Adjusted R^2 of a fit, 1 - (1 - R^2)(n - 1)/(n - k - 1).

    Args:
        diag (FitDiagnostics): diagnostics carrying the uncentered R^2
        n (int, optional): number of observations, defaults to ``diag.n``
        k (int, optional): number of coefficients, defaults to ``diag.k``

    Returns:
        float: adjusted R^2; 1.0 for a perfect fit whatever n and k
    """
    n = diag.n if n is None else n
    k = diag.k if k is None else k
    if k < 1 or n <= k:
        raise DegreesOfFreedomError(f'adjusted R^2 needs n > k >= 1, got n={n}, k={k}')
    return _adjusted(diag.r2, n, k)


def _dependent_columns(design):
    _, singular_values, vt = np.linalg.svd(design, full_matrices=False)
    null_vector = np.abs(vt[-1])
    dependent = [FEATURE_NAMES[j] for j in np.flatnonzero(null_vector > 1e-6 * null_vector.max())]
    return singular_values, dependent


def _check_rank(design):
    singular_values, dependent = _dependent_columns(design)
    smallest = singular_values[-1]
    condition = math.inf if smallest == 0 else singular_values[0] / smallest
    if condition > CONDITION_LIMIT:
        raise CollinearityError(f'design matrix is rank deficient (condition number {condition:.3g})',
                                dependent)
    return condition


def fit(dataset, floor_negative=False, include_failed=False):
    """Fits the no-intercept three-term model by ordinary least squares.

    The system is solved through a QR decomposition with column pivoting after the
    condition number of the design matrix has been checked.

    Args:
        dataset (InterferenceDataset): features and observed interference levels
        floor_negative (bool): floor negative observations at 0 before fitting
        include_failed (bool): keep rows whose co-execution reported an error

    Returns:
        InterferenceModel: fitted model with its diagnostics
    """
    design = dataset.design_matrix(include_failed)
    observed = dataset.observations(include_failed)
    n, k = design.shape
    if n < k + 1:
        raise InsufficientDataError(f'fitting {k} coefficients needs at least {k + 1} rows, got {n}')
    if floor_negative:
        observed = np.maximum(observed, 0.0)

    condition = _check_rank(design)
    q, r, perm = scipy.linalg.qr(design, mode='economic', pivoting=True)
    coefficients = np.empty(k)
    coefficients[perm] = scipy.linalg.solve_triangular(r, q.T @ observed)
    logger.debug('fitted %s on %d rows, condition number %.3g', coefficients, n, condition)

    r_inv = scipy.linalg.solve_triangular(r, np.eye(k))
    unscaled_cov = np.empty((k, k))
    unscaled_cov[np.ix_(perm, perm)] = r_inv @ r_inv.T

    diagnostics = _diagnostics(design, observed, coefficients, unscaled_cov)
    return InterferenceModel(*coefficients, provenance=FITTED, diagnostics=diagnostics)


def _diagnostics(design, observed, coefficients, unscaled_cov):
    n, k = design.shape
    fitted = design @ coefficients
    residuals = observed - fitted
    sse = float(residuals @ residuals)
    ssr = float(fitted @ fitted)
    sst = float(observed @ observed)
    if sse == 0.0:
        r2 = 1.0
    else:
        r2 = 1.0 - sse / sst if sst > 0 else 0.0
    try:
        r2_adj = _adjusted(r2, n, k)
    except DegreesOfFreedomError:
        r2_adj = math.nan

    dof = n - k
    if sse == 0.0:
        # zero residual variance: every nonzero term is significant
        f_statistic = math.inf if ssr > 0 else math.nan
        f_pvalue = 0.0 if ssr > 0 else 1.0
        sigma2 = 0.0
    else:
        sigma2 = sse / dof
        f_statistic = (ssr / k) / sigma2
        f_pvalue = f_survival(f_statistic, k, dof)

    std_errors = np.sqrt(np.maximum(np.diag(unscaled_cov) * sigma2, 0.0))
    t_statistics = []
    for estimate, se in zip(coefficients, std_errors):
        if se > 0:
            t_statistics.append(float(estimate / se))
        elif estimate == 0:
            t_statistics.append(0.0)
        else:
            t_statistics.append(math.copysign(math.inf, estimate))
    t_pvalues = [t_two_sided_pvalue(t, dof) for t in t_statistics]

    normality_pvalue = heteroscedasticity_pvalue = None
    if n >= MIN_RESIDUALS:
        normality_pvalue = jarque_bera(residuals)[1]
        heteroscedasticity_pvalue = breusch_pagan(residuals, design)[1]

    return FitDiagnostics(
        r2=r2, r2_adj=r2_adj, f_statistic=f_statistic, f_pvalue=f_pvalue,
        t_statistics=tuple(t_statistics), t_pvalues=tuple(t_pvalues),
        std_errors=tuple(float(s) for s in std_errors),
        residuals=tuple(float(e) for e in residuals), fitted=tuple(float(f) for f in fitted),
        design=tuple(tuple(float(x) for x in row) for row in design),
        normality_pvalue=normality_pvalue, heteroscedasticity_pvalue=heteroscedasticity_pvalue,
        n=n, k=k, sse=sse, ssr=ssr,
    )


def significance(diag, alpha=DEFAULT_ALPHA):
    """Marks the regression and each coefficient significant when its p-value is below alpha.

    Args:
        diag (FitDiagnostics): fit diagnostics
        alpha (float): significance level

    Returns:
        SignificanceReport: F test and per-coefficient t tests
    """
    coefficients = tuple(
        CoefficientTest(name, t, p, p < alpha)
        for name, t, p in zip(FEATURE_NAMES, diag.t_statistics, diag.t_pvalues))
    return SignificanceReport(alpha, diag.f_statistic, diag.f_pvalue, diag.f_pvalue < alpha,
                              coefficients)


def jarque_bera(residuals):
    """Jarque-Bera normality statistic with its chi-squared(2) p-value.

    Args:
        residuals (array_like): residuals

    Returns:
        tuple[float, float]: statistic and p-value
    """
    residuals = np.asarray(residuals, dtype=float)
    if np.ptp(residuals) == 0:
        return 0.0, 1.0
    statistic, pvalue, _, _ = stattools.jarque_bera(residuals)
    return float(statistic), float(pvalue)


def breusch_pagan(residuals, regressors):
    """Studentized Breusch-Pagan (Koenker) heteroscedasticity test.

    Squared residuals are regressed on a constant and the regressors; the statistic
    n * R^2 follows a chi-squared distribution with one degree of freedom per regressor.

    Args:
        residuals (array_like): residuals of the fit
        regressors (array_like): matrix of regressors, one row per residual

    Returns:
        tuple[float, float]: LM statistic and p-value
    """
    residuals = np.asarray(residuals, dtype=float)
    regressors = np.asarray(regressors, dtype=float).reshape(residuals.size, -1)
    if np.ptp(residuals ** 2) == 0:
        return 0.0, 1.0
    exog = sm.add_constant(regressors, has_constant='add')
    statistic, pvalue, _, _ = het_breuschpagan(residuals, exog, robust=True)
    return float(statistic), float(pvalue)


def _correlation_pvalue(r, n):
    if abs(r) >= 1.0:
        return 0.0
    dof = n - 2
    if dof <= 0:
        return 1.0
    return t_two_sided_pvalue(r * math.sqrt(dof / (1.0 - r * r)), dof)


def residual_checks(diag, alpha=DEFAULT_ALPHA):
    """Checks linearity, homoscedasticity and normality of the residuals.

    Linearity has no single standard test; the correlation between residuals and
    fitted values stands in for it and the report says so.

    Args:
        diag (FitDiagnostics): fit diagnostics with residuals, fitted values and design
        alpha (float): significance level; a check passes when its p-value exceeds it

    Returns:
        ResidualReport: the three checks
    """
    residuals = np.asarray(diag.residuals, dtype=float)
    n = residuals.size
    if n < MIN_RESIDUALS:
        raise InsufficientDataError(f'residual checks need at least {MIN_RESIDUALS} residuals, got {n}')

    proxy = 'proxy: correlation of residuals with fitted values'
    try:
        r = pearson(residuals, diag.fitted)
        r_pvalue = _correlation_pvalue(r, n)
        linearity = CheckResult('linearity', r, r_pvalue, r_pvalue > alpha, proxy)
    except UndefinedCorrelationError:
        linearity = CheckResult('linearity', 0.0, 1.0, True, proxy + '; constant input')

    bp_statistic, bp_pvalue = breusch_pagan(residuals, diag.design)
    homoscedasticity = CheckResult('homoscedasticity', bp_statistic, bp_pvalue, bp_pvalue > alpha,
                                   'Breusch-Pagan (studentized)')
    jb_statistic, jb_pvalue = jarque_bera(residuals)
    normality = CheckResult('normality', jb_statistic, jb_pvalue, jb_pvalue > alpha, 'Jarque-Bera')
    return ResidualReport(alpha, linearity, homoscedasticity, normality)


def pearson(x, y):
    """Sample Pearson correlation coefficient.

    Args:
        x (array_like): first sample
        y (array_like): second sample, same length

    Returns:
        float: correlation in [-1, 1]
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError(f'pearson needs two 1-d samples of equal length, got {x.shape} and {y.shape}')
    if x.size < 2:
        raise DomainError('pearson needs at least 2 points')
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError('correlation is undefined for a sample with zero variance')
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def coefficient_of_variation(values):
    """Sample standard deviation (n - 1 denominator) over the mean; 0.0 for a single value.

    Args:
        values (array_like): sample

    Returns:
        float: coefficient of variation
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError('coefficient of variation needs at least one value')
    mean = float(values.mean())
    if mean == 0:
        raise DomainError('coefficient of variation is undefined for a zero mean')
    if values.size == 1:
        return 0.0
    return float(values.std(ddof=1)) / mean


@dataclass(frozen=True)
class DatasetSummary:
    n: int
    sllc_correlation: float
    coefficient_of_variation: float
    share_low: float
    share_medium: float
    share_high: float
    minimum: float
    maximum: float


def analyze_dataset(dataset):
    """Describes the spread of a dataset and its dependence on accumulated SLLC access.

    Args:
        dataset (InterferenceDataset): dataset whose rows carry accumulated scores

    Returns:
        DatasetSummary: correlation between T_sllc and interference, coefficient of
        variation and the share of rows below 0.5, in [0.5, 1.0] and above 1.0
    """
    rows = dataset.usable_rows()
    if not rows:
        raise InsufficientDataError('dataset has no usable rows')
    observed = np.array([r.observed for r in rows])
    t_sllc = np.array([r.features.accumulated[0] for r in rows])
    n = len(rows)
    return DatasetSummary(
        n=n,
        sllc_correlation=pearson(t_sllc, observed),
        coefficient_of_variation=coefficient_of_variation(observed),
        share_low=float(np.sum(observed < LOW_BAND)) / n,
        share_medium=float(np.sum((observed >= LOW_BAND) & (observed <= HIGH_BAND))) / n,
        share_high=float(np.sum(observed > HIGH_BAND)) / n,
        minimum=float(observed.min()),
        maximum=float(observed.max()),
    )
