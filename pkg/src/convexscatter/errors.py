"""Exception hierarchy shared by all modules."""


class ScatterError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class OffSurface(ScatterError):
    pass


class TangentHit(ScatterError):
    """A ray meets a boundary tangentially; ``hit`` carries the contact."""

    def __init__(self, message, hit=None):
        super().__init__(message)
        self.hit = hit


class DegenerateRay(ScatterError):
    pass


class NoConvergence(ScatterError):
    pass


class StoryMismatch(ScatterError):
    pass


class AtFocus(ScatterError):
    pass


class NeverPasses(ScatterError):
    pass


class ResolutionTooCoarse(ScatterError):
    pass


class Blowup(ScatterError):
    pass


class FociInsideObstacle(ScatterError):
    pass


class SupportClipped(ScatterError):
    pass


class ConfigError(Exception):
    """Bad scenario config (CLI exit code 2)."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class MissingManifest(ScatterError):
    pass
