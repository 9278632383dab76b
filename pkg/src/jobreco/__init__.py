"""Job recommendation engine with embedding, text and collaborative strategies."""

__version__ = "0.1.0"

from .core import Interaction, InteractionKind, JobPosting, RecoError, SlateRequest, Surface  # noqa: E402
from .engine import Engine, EngineConfig  # noqa: E402
from .strategies import Slate, StrategyId  # noqa: E402

__all__ = [
    "Engine", "EngineConfig", "Interaction", "InteractionKind", "JobPosting", "RecoError",
    "Slate", "SlateRequest", "StrategyId", "Surface", "__version__",
]
