import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from sharevalue.schemas.panel import PanelDataset
from sharevalue.schemas.synthetic import CrashScenario, SyntheticConfig
from sharevalue.services.estimator_service import fit_fixed_effects
from sharevalue.services.panel_service import prepare_sample, write_panel
from sharevalue.services.synthetic_service import generate_panel

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def build_sample(**settings):
    """Generate a synthetic panel and return (estimation sample, synthetic panel)."""
    panel = generate_panel(SyntheticConfig(**settings))
    return prepare_sample(panel.dataset), panel


@pytest.fixture
def synthetic_sample():
    """Factory: synthetic_sample(seed=..., n_entities=..., ...) -> (sample, panel)."""
    return build_sample


@pytest.fixture(scope="session")
def market_panel():
    """Unbalanced 300 x 8 panel with both effect dimensions, correlated with the regressors."""
    return build_sample(
        n_entities=300, n_periods=8, missing_rate=0.1, sigma_mu=0.5, sigma_gamma=0.2,
        sigma_eps=0.3, effect_regressor_corr=0.6, seed=20240611,
    )


@pytest.fixture(scope="session")
def market_twoway(market_panel):
    sample, _ = market_panel
    return fit_fixed_effects(sample, "twoway")


@pytest.fixture(scope="session")
def crash_panel():
    """Shock of -0.4 to half the firms in 2008."""
    return build_sample(
        n_entities=2000, n_periods=8, start_year=2004, missing_rate=0.05,
        sigma_mu=0.5, sigma_gamma=0.05, sigma_eps=0.1,
        crash=CrashScenario(year=2008, shock=-0.4, affected_share=0.5), seed=2008,
    )


@pytest.fixture
def sample_csv():
    return FIXTURES_DIR / "sample_panel.csv"


@pytest.fixture
def malformed_csv():
    return FIXTURES_DIR / "malformed_panel.csv"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def panel_csv(tmp_path):
    """Synthetic 60 x 6 panel on disk; the fourth row has a zero dividend."""
    panel = generate_panel(SyntheticConfig(n_entities=60, n_periods=6, missing_rate=0.1, seed=17))
    frame = panel.dataset.frame.copy()
    frame.loc[3, "dividends_per_share"] = 0.0
    path = tmp_path / "panel.csv"
    path.write_bytes(write_panel(PanelDataset(frame, panel.dataset.currency_code, panel.dataset.period_range)))
    return path
