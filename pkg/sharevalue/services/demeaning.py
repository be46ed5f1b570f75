"""
Within transformations.

One-way demeaning subtracts group means once. Two-way demeaning on an
unbalanced panel alternates entity and period demeaning until no value moves
by more than the tolerance; on a balanced panel the first sweep is already
exact and the second only confirms it.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from sharevalue.config import DEMEAN_MAX_ITERATIONS, DEMEAN_TOLERANCE
from sharevalue.exceptions import ConvergenceError
from sharevalue.schemas.estimation import EffectsMode
from sharevalue.schemas.panel import EstimationSample


@dataclass(frozen=True)
class DemeanResult:
    values: np.ndarray
    iterations: int
    max_change: float


def group_means(values: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    """Column-wise group means; ``values`` is n x m, result is n_groups x m."""
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    counts[counts == 0] = 1.0
    sums = np.column_stack([
        np.bincount(codes, weights=values[:, j], minlength=n_groups) for j in range(values.shape[1])
    ])
    return sums / counts[:, None]


def demean_by(values: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    return values - group_means(values, codes, n_groups)[codes]


def demean_within(
    values: np.ndarray,
    sample: EstimationSample,
    mode: EffectsMode,
    tolerance: float = DEMEAN_TOLERANCE,
    max_iterations: int = DEMEAN_MAX_ITERATIONS,
) -> DemeanResult:
    """
    Remove entity means, period means, or both (alternating projections).

    Args:
        values: n x m matrix aligned with the sample rows
        sample: Provides the entity/period codes
        mode: individual, time or twoway
        tolerance: Max-abs-change stop rule for the twoway sweeps
        max_iterations: Sweep cap for twoway

    Raises:
        ConvergenceError: twoway sweeps hit the cap
    """
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    mode = EffectsMode(mode)

    if mode == EffectsMode.individual:
        result = DemeanResult(demean_by(values, sample.entity_index, sample.n_entities), 1, 0.0)
    elif mode == EffectsMode.time:
        result = DemeanResult(demean_by(values, sample.period_index, sample.n_periods), 1, 0.0)
    else:
        current = values
        change = np.inf
        for sweep in range(1, max_iterations + 1):
            updated = demean_by(current, sample.entity_index, sample.n_entities)
            updated = demean_by(updated, sample.period_index, sample.n_periods)
            change = float(np.max(np.abs(updated - current))) if updated.size else 0.0
            current = updated
            if change < tolerance:
                result = DemeanResult(current, sweep, change)
                break
        else:
            raise ConvergenceError("two-way demeaning", max_iterations, change)

    if squeeze:
        return DemeanResult(result.values[:, 0], result.iterations, result.max_change)
    return result


def component_labels(sample: EstimationSample) -> Tuple[int, np.ndarray]:
    """
    Connected components of the bipartite entity-period observation graph.

    Returns the component count and one label per node, entities first and
    then periods.
    """
    n, t = sample.n_entities, sample.n_periods
    rows = sample.entity_index
    cols = sample.period_index + n
    graph = coo_matrix((np.ones(sample.n_obs), (rows, cols)), shape=(n + t, n + t))
    count, labels = connected_components(graph, directed=False)
    return int(count), labels


def effect_components(sample: EstimationSample) -> int:
    return component_labels(sample)[0]


def absorbed_parameters(sample: EstimationSample, mode: EffectsMode) -> Tuple[int, int, int]:
    """
    Independently estimated intercept/effect parameters per mode.

    Returns (n_entity_effects, n_period_effects, n_parameters); two-way
    parameters are N + T - C for C connected components.
    """
    mode = EffectsMode(mode)
    if mode == EffectsMode.individual:
        return sample.n_entities, 0, sample.n_entities
    if mode == EffectsMode.time:
        return 0, sample.n_periods, sample.n_periods
    components = effect_components(sample)
    return sample.n_entities, sample.n_periods, sample.n_entities + sample.n_periods - components
