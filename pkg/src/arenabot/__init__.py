"""Arena robot simulator, Monte Carlo learner and entropy analysis."""

__version__ = "0.1.0"
