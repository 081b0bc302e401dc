"""Exception hierarchy shared by every stage of the pipeline."""


class GlueError(Exception):
    """Base class; ``stage`` names the pipeline step that failed."""

    stage = "pipeline"


class ZeroVector(GlueError, ValueError):
    stage = "seqspace"


class GeneratorOverflow(GlueError):
    stage = "space"


class NonUniform(GlueError):
    stage = "lift"


class NoConvergence(GlueError):
    stage = "weak_limit"


class HorizonExhausted(GlueError):
    stage = "selection"

    def __init__(self, message, pair=None, index=None, detail=None):
        super().__init__(message)
        self.pair = pair
        self.index = index
        self.detail = detail or {}


class JitterTooLarge(GlueError, ValueError):
    stage = "chain"


class OutOfRange(GlueError, IndexError):
    stage = "glue"


class DegenerateImage(GlueError):
    stage = "audit"


class BoundViolated(GlueError):
    """Raised by strict audits; ``summary`` carries the full per-pair forensics."""

    stage = "audit"

    def __init__(self, message, summary=None):
        super().__init__(message)
        self.summary = summary


class ConfigError(GlueError, ValueError):
    stage = "config"


class InvalidChain(GlueError):
    """A chain or certificate failed re-validation; ``report`` holds the details."""

    stage = "chain"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
