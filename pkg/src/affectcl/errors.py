"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Shapes, dimensions or settings are inconsistent with each other."""


class DegenerateInputError(ValueError):
    """Input is mathematically unusable (zero vector, zero variance, empty set)."""


class CorpusFormatError(ValueError):
    """Corpus files violate the documented on-disk layout."""


class TrainingError(RuntimeError):
    """A training run cannot continue (non-finite loss, degenerate labels)."""
