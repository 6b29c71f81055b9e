"""Lifecycle analytics for novel hashtags that emerge after exogenous shock events.

Detection of novel/popular/relevant hashtags, per-minute conversational
vibrancy features, growth and persistence measurement from smoothed
cumulative curves, a two-class taxonomy, regression with ARMA errors for
growth and Cox / Kaplan-Meier models for persistence.
"""

__version__ = "0.1.0"

from .episodes import EpisodeConfig, HashtagDetector, HashtagEpisode
from .events import EventStream, TweetEvent, parse_events, read_events, validate_stream
from .growth import ArmaErrorRegression, build_design, diagnostics
from .survival import CoxPH, KaplanMeier, hazard_effect, median_survival
from .taxonomy import TrajectoryClusterer, label_classes
from .trajectory import SmoothingSpline, TrajectoryAnalyzer
from .vibrancy import VibrancyExtractor, expected_audience

__all__ = [
    "__version__",
    "EpisodeConfig",
    "HashtagDetector",
    "HashtagEpisode",
    "EventStream",
    "TweetEvent",
    "parse_events",
    "read_events",
    "validate_stream",
    "ArmaErrorRegression",
    "build_design",
    "diagnostics",
    "CoxPH",
    "KaplanMeier",
    "hazard_effect",
    "median_survival",
    "TrajectoryClusterer",
    "label_classes",
    "SmoothingSpline",
    "TrajectoryAnalyzer",
    "VibrancyExtractor",
    "expected_audience",
]
