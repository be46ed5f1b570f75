"""
Selection Service

Model tests (F and likelihood-ratio tests for effects, Hausman,
Wooldridge serial correlation, Breusch-Pagan heteroscedasticity) and the
decision procedure that picks one panel model.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from sharevalue.config import DEFAULT_ALPHA, HAUSMAN_EIGEN_CUTOFF, MAX_WORKERS
from sharevalue.exceptions import (
    DegenerateTestError,
    InsufficientDataError,
    NestingError,
    ShareValueError,
)
from sharevalue.schemas.estimation import (
    CovarianceMethod,
    CovMatrix,
    FitResult,
    ModelSelectionReport,
    ModelTag,
    SelectionStep,
    TestDecision,
    TestResult,
)
from sharevalue.schemas.panel import EstimationSample
from sharevalue.services.distributions import Distribution, dist_sf, two_sided_t
from sharevalue.services.estimator_service import fit_model
from sharevalue.services.inference_service import covariance
from sharevalue.services.least_squares import solve_least_squares

# SSR_r may undershoot SSR_u by rounding only
NESTING_TOLERANCE = 1e-9
NOT_PSD_FLAG = "not_positive_semidefinite"

CANDIDATES: Tuple[ModelTag, ...] = (
    ModelTag.pooled,
    ModelTag.fe_individual,
    ModelTag.fe_time,
    ModelTag.fe_twoway,
    ModelTag.re_individual,
    ModelTag.re_time,
)

# (restricted, unrestricted) pairs tested with F and LR, in report order
EFFECT_PAIRS: Tuple[Tuple[ModelTag, ModelTag], ...] = (
    (ModelTag.pooled, ModelTag.fe_individual),
    (ModelTag.pooled, ModelTag.fe_time),
    (ModelTag.pooled, ModelTag.fe_twoway),
    (ModelTag.fe_time, ModelTag.fe_twoway),
    (ModelTag.fe_individual, ModelTag.fe_twoway),
)

HAUSMAN_PAIRS: Dict[str, Tuple[ModelTag, ModelTag]] = {
    "individual": (ModelTag.fe_individual, ModelTag.re_individual),
    "time": (ModelTag.fe_time, ModelTag.re_time),
}


def _decide(p_value: float, alpha: float) -> TestDecision:
    return TestDecision.reject_null if p_value < alpha else TestDecision.fail_to_reject


def _result(name: str, statistic: float, df, p_value: float, alpha: float,
            null_hypothesis: str, flags: Sequence[str] = ()) -> TestResult:
    p_value = float(min(1.0, max(0.0, p_value)))
    return TestResult(
        name=name,
        statistic=float(statistic),
        df=df,
        p_value=p_value,
        decision=_decide(p_value, alpha),
        alpha=alpha,
        null_hypothesis=null_hypothesis,
        flags=list(flags),
    )


def _nested_difference(restricted: FitResult, unrestricted: FitResult) -> Tuple[int, float]:
    if restricted.n_obs != unrestricted.n_obs:
        raise NestingError("restricted and unrestricted fits use different samples")
    q = restricted.df_resid - unrestricted.df_resid
    if q <= 0:
        raise NestingError(
            f"{restricted.model_tag.value} is not nested in {unrestricted.model_tag.value} (parameter difference {q})"
        )
    difference = restricted.ssr - unrestricted.ssr
    if difference < -NESTING_TOLERANCE * max(unrestricted.ssr, 1.0):
        raise NestingError(
            f"restricted SSR {restricted.ssr:.6g} below unrestricted SSR {unrestricted.ssr:.6g}"
        )
    return q, max(difference, 0.0)


def f_test_effects(
    restricted: FitResult,
    unrestricted: FitResult,
    alpha: float = DEFAULT_ALPHA,
    name: Optional[str] = None,
) -> TestResult:
    """
    F = [(SSR_r - SSR_u) / q] / [SSR_u / df_u] with q the difference in
    estimated parameters.

    Raises:
        NestingError: models not nested, or SSR_r < SSR_u beyond rounding
    """
    q, difference = _nested_difference(restricted, unrestricted)
    df_u = unrestricted.df_resid
    if unrestricted.ssr <= 0:
        statistic = 0.0 if difference == 0 else float("inf")
    else:
        statistic = (difference / q) / (unrestricted.ssr / df_u)
    p_value = 1.0 if statistic == 0 else dist_sf(statistic, Distribution.f, q, df_u)
    return _result(
        name or f"f_{restricted.model_tag.value}_vs_{unrestricted.model_tag.value}",
        statistic, (q, df_u), p_value, alpha,
        f"{restricted.model_tag.value} is adequate against {unrestricted.model_tag.value}",
    )


def lr_test_effects(
    restricted: FitResult,
    unrestricted: FitResult,
    alpha: float = DEFAULT_ALPHA,
    name: Optional[str] = None,
) -> TestResult:
    """
    Gaussian likelihood-ratio test; 2(logL_u - logL_r) = n ln(SSR_r / SSR_u)
    against chi-square(q).
    """
    q, difference = _nested_difference(restricted, unrestricted)
    n = unrestricted.n_obs
    if difference == 0:
        statistic = 0.0
    elif unrestricted.ssr <= 0:
        statistic = float("inf")
    else:
        statistic = max(0.0, n * np.log1p(difference / unrestricted.ssr))
    p_value = 1.0 if statistic == 0 else dist_sf(statistic, Distribution.chi_square, q)
    return _result(
        name or f"lr_{restricted.model_tag.value}_vs_{unrestricted.model_tag.value}",
        statistic, q, p_value, alpha,
        f"{restricted.model_tag.value} is adequate against {unrestricted.model_tag.value}",
    )


def hausman_test(
    fe: FitResult,
    re: FitResult,
    cov_fe: CovMatrix,
    cov_re: CovMatrix,
    alpha: float = DEFAULT_ALPHA,
    name: str = "hausman",
    cutoff: float = HAUSMAN_EIGEN_CUTOFF,
) -> TestResult:
    """
    H = q'(V_FE - V_RE)^+ q over the common slopes, q = b_FE - b_RE.

    The pseudo-inverse keeps eigenvalues above cutoff * max eigenvalue and df
    is the number kept. A difference matrix with clearly negative eigenvalues
    is flagged rather than rejected.

    Raises:
        DegenerateTestError: no eigenvalue survives the cutoff
    """
    names = tuple(fe.regressor_names)
    if names != tuple(re.regressor_names):
        raise DegenerateTestError("FE and RE fits have different regressors")

    q = np.asarray(fe.slopes, dtype=float) - np.asarray(re.slopes, dtype=float)
    difference = cov_fe.block(names) - cov_re.block(names)
    difference = 0.5 * (difference + difference.T)
    eigenvalues, eigenvectors = np.linalg.eigh(difference)

    threshold = cutoff * max(float(eigenvalues.max()), 0.0)
    keep = eigenvalues > threshold
    rank = int(keep.sum())
    if rank == 0:
        raise DegenerateTestError("V_FE - V_RE has no positive eigenvalue above the cutoff")

    flags: List[str] = []
    if eigenvalues.min() < -threshold:
        flags.append(NOT_PSD_FLAG)
        logger.warning("{}: V_FE - V_RE is not positive semidefinite (min eigenvalue {:.3g})",
                       name, float(eigenvalues.min()))

    projections = eigenvectors[:, keep].T @ q
    statistic = max(0.0, float(np.sum(projections ** 2 / eigenvalues[keep])))
    p_value = 1.0 if statistic == 0 else dist_sf(statistic, Distribution.chi_square, rank)
    return _result(name, statistic, rank, p_value, alpha,
                   "effects are uncorrelated with the regressors (random effects consistent)", flags)


def lag_pairs(residuals: np.ndarray, sample: EstimationSample) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lagged, current, entity code) for consecutive-year pairs within entities."""
    years = np.asarray(sample.period_ids, dtype=np.int64)[sample.period_index]
    same_entity = sample.entity_index[1:] == sample.entity_index[:-1]
    consecutive = (years[1:] - years[:-1]) == 1
    pair = np.flatnonzero(same_entity & consecutive)
    return residuals[pair], residuals[pair + 1], sample.entity_index[pair + 1]


def wooldridge_serial_test(
    pooled: FitResult,
    sample: EstimationSample,
    alpha: float = DEFAULT_ALPHA,
) -> TestResult:
    """
    Regress the pooled residual on its one-year lag (no intercept) and report
    the entity-clustered t statistic of the lag coefficient, df = G - 1.

    Raises:
        InsufficientDataError: no consecutive-year pairs, or a single entity with pairs
    """
    if pooled.n_obs != sample.n_obs:
        raise InsufficientDataError("pooled fit and sample are not aligned")
    lagged, current, entity = lag_pairs(pooled.residuals, sample)
    if lagged.size == 0:
        raise InsufficientDataError("no consecutive-year residual pairs within any entity")

    codes, entity = np.unique(entity, return_inverse=True)
    clusters = codes.size
    if clusters < 2:
        raise InsufficientDataError("serial correlation test needs pairs from at least 2 entities")

    sxx = float(lagged @ lagged)
    if sxx <= 0:
        raise InsufficientDataError("lagged residuals are identically zero")
    rho = float(lagged @ current) / sxx
    scores = np.bincount(entity, weights=lagged * (current - rho * lagged), minlength=clusters)
    variance = clusters / (clusters - 1) * float(scores @ scores) / sxx ** 2
    if variance <= 0:
        raise InsufficientDataError("clustered variance of the lag coefficient is zero")

    t_stat = rho / np.sqrt(variance)
    return _result("wooldridge_serial", t_stat, clusters - 1, two_sided_t(t_stat, clusters - 1), alpha,
                   "no first-order serial correlation in pooled residuals")


def breusch_pagan_test(fit: FitResult, sample: EstimationSample, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Koenker's studentized LM test: n R^2 of e^2 on [1, ln x], chi-square(k)."""
    squared = fit.residuals ** 2
    centered = squared - squared.mean()
    total = float(centered @ centered)
    if total <= 0:
        raise DegenerateTestError("squared residuals have no variation")
    design = np.column_stack([np.ones(sample.n_obs), sample.ln_x])
    auxiliary = solve_least_squares(design, squared)
    r_squared = 1.0 - auxiliary.ssr / total
    statistic = max(0.0, sample.n_obs * r_squared)
    k = sample.k
    return _result("breusch_pagan", statistic, k, dist_sf(statistic, Distribution.chi_square, k), alpha,
                   "residual variance does not depend on the regressors")


# ----------------------------------------------------------------------
# Decision procedure
# ----------------------------------------------------------------------
def _stronger_individual(individual: Optional[TestResult], time: Optional[TestResult]) -> bool:
    if individual is None:
        return False
    return time is None or individual.p_value <= time.p_value


def _fit_candidates(
    sample: EstimationSample, max_workers: int
) -> Tuple[Dict[ModelTag, FitResult], List[str]]:
    fits: Dict[ModelTag, FitResult] = {}
    skipped: List[str] = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [(tag, executor.submit(fit_model, sample, tag)) for tag in CANDIDATES]

        # fold in candidate order so the report does not depend on scheduling
        for tag, future in futures:
            try:
                fits[tag] = future.result()
            except ShareValueError as exc:
                if tag == ModelTag.pooled:
                    raise
                logger.warning("Candidate {} skipped: {}", tag.value, exc.detail)
                skipped.append(f"{tag.value}: {exc.detail}")
    return fits, skipped


def run_selection(
    sample: EstimationSample,
    alpha: float = DEFAULT_ALPHA,
    max_workers: int = MAX_WORKERS,
) -> Tuple[ModelSelectionReport, Dict[ModelTag, FitResult]]:
    """select_model plus the candidate fits it estimated."""
    log = logger.bind(stage="selection")
    fits, skipped = _fit_candidates(sample, max_workers)
    tests: Dict[str, TestResult] = {}
    steps: List[SelectionStep] = []

    def step(text: str, cites: Sequence[str] = ()) -> None:
        steps.append(SelectionStep(order=len(steps) + 1, text=text, cites=list(cites)))

    # 1. effects existence
    f_names: Dict[Tuple[ModelTag, ModelTag], str] = {}
    for restricted, unrestricted in EFFECT_PAIRS:
        if restricted not in fits or unrestricted not in fits:
            continue
        f_result = f_test_effects(fits[restricted], fits[unrestricted], alpha)
        lr_result = lr_test_effects(fits[restricted], fits[unrestricted], alpha)
        tests[f_result.name] = f_result
        tests[lr_result.name] = lr_result
        f_names[(restricted, unrestricted)] = f_result.name
        step(
            f"{restricted.value} vs {unrestricted.value}: F = {f_result.statistic:.4f} "
            f"(p = {f_result.p_value:.4g}), LR = {lr_result.statistic:.4f} (p = {lr_result.p_value:.4g})",
            [f_result.name, lr_result.name],
        )

    def f_test(pair: Tuple[ModelTag, ModelTag]) -> Optional[TestResult]:
        name = f_names.get(pair)
        return tests[name] if name else None

    oneway_individual = f_test((ModelTag.pooled, ModelTag.fe_individual))
    oneway_time = f_test((ModelTag.pooled, ModelTag.fe_time))
    joint = f_test((ModelTag.pooled, ModelTag.fe_twoway))
    given_time = f_test((ModelTag.fe_time, ModelTag.fe_twoway))
    given_individual = f_test((ModelTag.fe_individual, ModelTag.fe_twoway))

    if joint is not None:
        effects_present = joint.rejected
        individual = given_time if given_time is not None else oneway_individual
        time = given_individual if given_individual is not None else oneway_time
        individual_sig = bool(individual and individual.rejected) and effects_present
        time_sig = bool(time and time.rejected) and effects_present
        cites = [joint.name] + [t.name for t in (individual, time) if t is not None]
        if effects_present and not (individual_sig or time_sig):
            # jointly significant but neither conditionally: keep the stronger one-way dimension
            oneway = [t for t in (oneway_individual, oneway_time) if t is not None]
            strongest = min(oneway, key=lambda t: t.p_value) if oneway else None
            individual_sig = strongest is not None and strongest is oneway_individual
            time_sig = strongest is not None and strongest is oneway_time
            cites += [t.name for t in oneway]
    else:
        individual_sig = bool(oneway_individual and oneway_individual.rejected)
        time_sig = bool(oneway_time and oneway_time.rejected)
        effects_present = individual_sig or time_sig
        cites = [t.name for t in (oneway_individual, oneway_time) if t is not None]

    step(
        f"Effects: individual {'significant' if individual_sig else 'not significant'}, "
        f"time {'significant' if time_sig else 'not significant'} at alpha = {alpha}",
        list(dict.fromkeys(cites)),
    )

    # 2. pooled adequacy
    serial: Optional[TestResult] = None
    try:
        serial = wooldridge_serial_test(fits[ModelTag.pooled], sample, alpha)
        tests[serial.name] = serial
        step(
            f"Wooldridge serial correlation on pooled residuals: t = {serial.statistic:.4f} "
            f"(p = {serial.p_value:.4g}), {'rejected' if serial.rejected else 'not rejected'}",
            [serial.name],
        )
    except ShareValueError as exc:
        skipped.append(f"wooldridge_serial: {exc.detail}")
        step(f"Wooldridge serial correlation test not computed: {exc.detail}")

    # 3. FE vs RE per dimension
    hausman: Dict[str, Optional[TestResult]] = {}
    for dimension, (fe_tag, re_tag) in HAUSMAN_PAIRS.items():
        hausman[dimension] = None
        if fe_tag not in fits or re_tag not in fits:
            continue
        try:
            result = hausman_test(
                fits[fe_tag], fits[re_tag],
                covariance(fits[fe_tag], sample, CovarianceMethod.classical),
                covariance(fits[re_tag], sample, CovarianceMethod.classical),
                alpha, name=f"hausman_{dimension}",
            )
        except ShareValueError as exc:
            skipped.append(f"hausman_{dimension}: {exc.detail}")
            step(f"Hausman test ({dimension}) not computed: {exc.detail}")
            continue
        hausman[dimension] = result
        tests[result.name] = result
        step(
            f"Hausman {fe_tag.value} vs {re_tag.value}: H = {result.statistic:.4f} "
            f"(p = {result.p_value:.4g}), {'fixed' if result.rejected else 'random'} effects preferred",
            [result.name],
        )

    # 4. decision
    def fe_or_re(dimension: str) -> Tuple[ModelTag, List[str]]:
        fe_tag, re_tag = HAUSMAN_PAIRS[dimension]
        result = hausman[dimension]
        if result is None:
            return (fe_tag if fe_tag in fits else re_tag), []
        return (fe_tag if result.rejected else re_tag), [result.name]

    decision_cites: List[str] = []
    if not effects_present:
        selected = ModelTag.pooled
        text = "No significant effects: pooled OLS selected"
        if serial is not None and serial.rejected:
            text += "; pooled residuals are serially correlated, white-period standard errors recommended"
            decision_cites.append(serial.name)
    elif individual_sig and time_sig and ModelTag.fe_twoway in fits:
        selected = ModelTag.fe_twoway
        text = "Both effect dimensions significant: two-way fixed effects selected (two-way random effects unavailable)"
    elif individual_sig and (not time_sig or _stronger_individual(oneway_individual, oneway_time)):
        selected, decision_cites = fe_or_re("individual")
        text = f"Individual effects only: {selected.value} selected"
    else:
        selected, decision_cites = fe_or_re("time")
        text = f"Time effects only: {selected.value} selected"
    step(text, decision_cites)

    # diagnostic
    try:
        heteroscedasticity = breusch_pagan_test(fits[selected], sample, alpha)
        tests[heteroscedasticity.name] = heteroscedasticity
        step(
            f"Breusch-Pagan on {selected.value} residuals: LM = {heteroscedasticity.statistic:.4f} "
            f"(p = {heteroscedasticity.p_value:.4g})",
            [heteroscedasticity.name],
        )
    except ShareValueError as exc:
        skipped.append(f"breusch_pagan: {exc.detail}")

    log.info("Selected {} ({} tests, {} skipped)", selected.value, len(tests), len(skipped))
    report = ModelSelectionReport(
        alpha=alpha,
        selected_model=selected,
        tests=list(tests.values()),
        narrative=steps,
        skipped=skipped,
    )
    return report, fits


def select_model(
    sample: EstimationSample,
    alpha: float = DEFAULT_ALPHA,
    max_workers: int = MAX_WORKERS,
) -> ModelSelectionReport:
    """
    Run the test battery and pick a model.

    Order: F and LR tests for effects (pooled vs each FE model, then each
    one-way FE vs two-way), Wooldridge on pooled residuals, Hausman per
    dimension, decision, then a Breusch-Pagan diagnostic on the chosen model.
    """
    report, _ = run_selection(sample, alpha, max_workers)
    return report


def override_report(model_tag: ModelTag, alpha: float = DEFAULT_ALPHA) -> ModelSelectionReport:
    model_tag = ModelTag(model_tag)
    return ModelSelectionReport(
        alpha=alpha,
        selected_model=model_tag,
        narrative=[SelectionStep(order=1, text=f"Model {model_tag.value} set by override; selection tests skipped")],
        override=True,
    )
