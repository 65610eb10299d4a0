import sys
from datetime import date
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from loadshield.ingest import ProfileSet  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20090601)


def make_set(values, business_id="b0", industry="hotel", start=date(2009, 7, 4)):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    days = [date.fromordinal(start.toordinal() + i) for i in range(len(values))]
    return ProfileSet.from_matrix(business_id, industry, days, values)


DEMO_TOML = """
seed = 0
[input]
readings = "data/train.csv"
score_readings = "data/score.csv"
prices = "data/prices.csv"
[calendar]
season = ["2009-06-01", "2009-09-30"]
score_season = ["2010-06-01", "2010-09-30"]
price_season = ["2009-06-01", "2009-09-30"]
day_class = "weekend"
[model]
k_max = 5
[output]
out_dir = "out"
plots = {plots}
[synth]
noise_std = 0.05
n_days = 8
[[synth.industries]]
label = "hotel"
archetypes = ["midday-peak", "evening-peak"]
n_businesses = 8
[[attacks]]
kind = "bypass"
target_business = "hotel-0000"
n_days = 8
[[attacks]]
kind = "rcsa"
target_business = "hotel-0000"
n_days = 8
"""


@pytest.fixture
def demo_config(tmp_path):
    """A config file for a small synthetic run, rooted in a temp dir."""
    def _make(plots=False, extra=""):
        path = tmp_path / "run.toml"
        path.write_text(DEMO_TOML.format(plots=str(plots).lower()) + extra)
        return path
    return _make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
