"""Access to the bundled synthetic scoreboard panel.

The packaged CSV is a 1912-row synthetic panel (239 regions x 8 years, 14
indicators, EURIS tier codes) engineered so that the published aggregate
results of the analysis pipeline are reproduced: correlation structure,
leading eigenvalues, the four-cluster reduced-space geometry with its sizes
and centroids, pivot shares, classifier headroom and the period-shift KS
statistics. It stands in for the official scoreboard file, which users
supply themselves.
"""

from __future__ import annotations

from importlib import resources

from .dataset import ColumnSchema, IndicatorPanel, load_scoreboard

FIXTURE_NAME = "euris_2016_2023_panel.csv"


def fixture_path() -> str:
    return str(resources.files("innoscope").joinpath("data", FIXTURE_NAME))


def load_fixture_panel() -> IndicatorPanel:
    with resources.files("innoscope").joinpath("data", FIXTURE_NAME).open(
            "r", encoding="utf-8") as fh:
        return load_scoreboard(fh, ColumnSchema())
