"""
Synthetic Service

Unbalanced firm-year panels drawn from
ln Y_it = a0 + b'ln X_it + mu_i + gamma_t + e_it with the ground truth kept
alongside, so estimators and tests can be checked without real market data.

Every entity draws from its own stream spawned from the seed, so output does
not depend on generation order.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from sharevalue.config import MAX_MISSING_RETRIES
from sharevalue.exceptions import InsufficientDataError
from sharevalue.schemas.panel import REGRESSOR_NAMES, VALUE_COLUMNS, PanelDataset
from sharevalue.schemas.synthetic import SyntheticConfig


@dataclass(frozen=True)
class SyntheticTruth:
    """Parameters and per-row draws behind a generated panel."""
    b: np.ndarray
    a0: float
    mu: np.ndarray
    gamma: np.ndarray
    entity_ids: Tuple[str, ...]
    period_ids: Tuple[int, ...]
    entity_index: np.ndarray
    period_index: np.ndarray
    ln_x: np.ndarray
    eps: np.ndarray
    shock: np.ndarray

    @property
    def n_obs(self) -> int:
        return int(self.eps.shape[0])

    def recombine(self) -> np.ndarray:
        """ln Y per row from the recorded components."""
        return (
            self.a0
            + self.mu[self.entity_index]
            + self.gamma[self.period_index]
            + self.ln_x @ self.b
            + self.shock
            + self.eps
        )

    def weighted_gamma_mean(self) -> float:
        counts = np.bincount(self.period_index, minlength=len(self.period_ids))
        return float(counts @ self.gamma) / self.n_obs


@dataclass(frozen=True)
class SyntheticPanel:
    dataset: PanelDataset
    truth: SyntheticTruth
    spec: SyntheticConfig


@dataclass
class _EntityDraw:
    present: np.ndarray
    z_mu: float
    ln_x: np.ndarray
    eps: np.ndarray
    shocked: bool


def entity_labels(n_entities: int) -> List[str]:
    width = max(5, len(str(n_entities)))
    return [f"E{number:0{width}d}" for number in range(1, n_entities + 1)]


def _ar1(rng: np.random.Generator, length: int, columns: int, rho: float, scale: float) -> np.ndarray:
    """Stationary AR(1) paths with marginal sd ``scale``."""
    shocks = rng.standard_normal((length, columns))
    path = np.empty((length, columns))
    path[0] = scale * shocks[0]
    innovation = scale * np.sqrt(1.0 - rho * rho)
    for t in range(1, length):
        path[t] = rho * path[t - 1] + innovation * shocks[t]
    return path


def _draw_entity(rng: np.random.Generator, spec: SyntheticConfig, label: str) -> _EntityDraw:
    n_periods = spec.n_periods
    present = rng.random(n_periods) >= spec.missing_rate
    retries = 0
    while not present.any():
        if retries >= MAX_MISSING_RETRIES:
            raise InsufficientDataError(
                f"entity {label} lost every period after {MAX_MISSING_RETRIES} redraws (missing_rate {spec.missing_rate})"
            )
        present = rng.random(n_periods) >= spec.missing_rate
        retries += 1

    k = len(spec.b)
    z_mu = float(rng.standard_normal())
    corr = spec.effect_regressor_corr
    idiosyncratic = rng.standard_normal(k)
    level = (
        np.asarray(spec.regressor_means, dtype=float)
        + spec.regressor_between_sd * (corr * z_mu + np.sqrt(1.0 - corr * corr) * idiosyncratic)
    )
    within = _ar1(rng, n_periods, k, spec.regressor_ar, spec.regressor_within_sd)
    eps = _ar1(rng, n_periods, 1, spec.eps_ar, spec.sigma_eps)[:, 0]

    share = spec.crash.affected_share if spec.crash is not None else 1.0
    shocked = bool(rng.random() < share)
    return _EntityDraw(present=present, z_mu=z_mu, ln_x=level + within, eps=eps, shocked=shocked)


def generate_panel(spec: SyntheticConfig) -> SyntheticPanel:
    """
    Draw a panel and its ground truth.

    Args:
        spec: Validated generator settings

    Returns:
        SyntheticPanel with the dataset (prices and indicators in levels,
        rows ordered by entity then year) and the truth that produced it

    Raises:
        InsufficientDataError: an entity kept no period after the redraw limit
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_entities + 1)
    period_rng = np.random.default_rng(children[0])
    labels = entity_labels(spec.n_entities)
    draws = [
        _draw_entity(np.random.default_rng(child), spec, label)
        for child, label in zip(children[1:], labels)
    ]

    periods = spec.periods
    present = np.vstack([draw.present for draw in draws])
    entity_index, period_index = np.nonzero(present)
    ln_x = np.vstack([draw.ln_x[draw.present] for draw in draws])
    eps = np.concatenate([draw.eps[draw.present] for draw in draws])

    gamma = spec.sigma_gamma * period_rng.standard_normal(spec.n_periods)
    shock = np.zeros(entity_index.size)
    if spec.crash is not None:
        crash_position = periods.index(spec.crash.year)
        if spec.crash.affected_share >= 1.0:
            gamma[crash_position] += spec.crash.shock
        else:
            shocked = np.array([draw.shocked for draw in draws])
            hit = shocked[entity_index] & (period_index == crash_position)
            shock[hit] = spec.crash.shock

    period_counts = np.bincount(period_index, minlength=spec.n_periods)
    gamma = gamma - float(period_counts @ gamma) / entity_index.size

    mu = spec.sigma_mu * np.array([draw.z_mu for draw in draws])
    if spec.center_entity_effects:
        entity_counts = np.bincount(entity_index, minlength=spec.n_entities)
        mu = mu - float(entity_counts @ mu) / entity_index.size

    truth = SyntheticTruth(
        b=np.asarray(spec.b, dtype=float),
        a0=float(spec.a0),
        mu=mu,
        gamma=gamma,
        entity_ids=tuple(labels),
        period_ids=periods,
        entity_index=entity_index.astype(np.int64),
        period_index=period_index.astype(np.int64),
        ln_x=ln_x,
        eps=eps,
        shock=shock,
    )
    ln_y = truth.recombine()

    frame = pd.DataFrame({
        "entity_id": np.asarray(labels, dtype=object)[entity_index],
        "period": np.asarray(periods, dtype=np.int64)[period_index],
    })
    levels = np.exp(np.column_stack([ln_y, ln_x]))
    for position, column in enumerate(VALUE_COLUMNS):
        frame[column] = levels[:, position]

    dataset = PanelDataset(frame=frame, currency_code=spec.currency_code, period_range=(periods[0], periods[-1]))
    logger.info(
        "Generated synthetic panel: {} entities, {} periods, {} observations (seed {})",
        spec.n_entities, spec.n_periods, entity_index.size, spec.seed,
    )
    return SyntheticPanel(dataset=dataset, truth=truth, spec=spec)


TRUTH_FILES = {
    "entity_effects": "truth_entity_effects.csv",
    "period_effects": "truth_period_effects.csv",
    "coefficients": "truth_coefficients.csv",
}


def truth_tables(truth: SyntheticTruth) -> Dict[str, pd.DataFrame]:
    """True effects and coefficients keyed like ``TRUTH_FILES``."""
    return {
        "entity_effects": pd.DataFrame({"entity_id": truth.entity_ids, "mu": truth.mu}),
        "period_effects": pd.DataFrame({"year": truth.period_ids, "gamma": truth.gamma}),
        "coefficients": pd.DataFrame({
            "name": ["const", *REGRESSOR_NAMES],
            "value": [truth.a0, *truth.b.tolist()],
        }),
    }


def write_truth(truth: SyntheticTruth, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write the true effects and coefficients as CSV files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for key, frame in truth_tables(truth).items():
        paths[key] = out_dir / TRUTH_FILES[key]
        frame.to_csv(paths[key], index=False, lineterminator="\n")
    return paths
