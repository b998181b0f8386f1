import logging
import time
from contextlib import contextmanager
from typing import Iterator, Optional

import numpy as np
from rich.logging import RichHandler

LOG_FORMAT = "%(name)s: %(message)s"


def get_rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(seed)


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    root = logging.getLogger()
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(RichHandler(show_path=False, rich_tracebacks=False))
    root.setLevel(level)
    for handler in root.handlers:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()
        self.elapsed = 0.0

    def lap(self) -> float:
        return time.perf_counter() - self.start


@contextmanager
def stopwatch() -> Iterator[Stopwatch]:
    watch = Stopwatch()
    try:
        yield watch
    finally:
        watch.elapsed = time.perf_counter() - watch.start
