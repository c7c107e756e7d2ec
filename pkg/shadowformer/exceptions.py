# shadowformer/exceptions.py

from typing import Iterable, List


class ShadowFormerError(Exception):
    """Base class for errors surfaced to the command line as one-line reasons."""


class ShapeError(ShadowFormerError, ValueError):
    pass


class FormatError(ShadowFormerError, ValueError):
    pass


class RegionError(ShadowFormerError, ValueError):
    pass


class ConfigError(ShadowFormerError, ValueError):
    pass


class CheckpointError(ShadowFormerError):
    pass


class LayoutError(ShadowFormerError):
    def __init__(self, message: str, stems: Iterable[str] = ()) -> None:
        self.stems: List[str] = list(stems)
        if self.stems:
            message = f"{message}: {', '.join(self.stems)}"
        super().__init__(message)


class MissingResultsError(ShadowFormerError):
    def __init__(self, missing: Iterable[str]) -> None:
        self.missing: List[str] = list(missing)
        super().__init__(f"{len(self.missing)} result image(s) missing: {', '.join(self.missing)}")


class TrainingError(ShadowFormerError, RuntimeError):
    def __init__(self, step: int, message: str) -> None:
        self.step = step
        super().__init__(f"step {step}: {message}")
