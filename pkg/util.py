import functools
import math
import os

import numpy as np
import yaml

VERSION = "0.3.1"

WHITE = "\033[97m"
BLUE = "\033[34m"
GREEN = "\033[32m"
ORANGE = "\033[38;5;208m"
PINK = "\033[38;5;205m"
PURPLE = "\033[35m"
RESET = "\033[0m"


class ContractViolation(ValueError):
    """Raised when a caller breaks an operation's precondition."""


class ConfigurationError(ValueError):
    """Raised for incompatible sets, maps, families or experiment documents."""


class ResourceLimitError(RuntimeError):
    """Raised when a request would exceed a hard size limit."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, best_point, residual):
        super().__init__(message)
        self.best_point = best_point
        self.residual = residual


class InexactVariationWarning(UserWarning):
    pass


class NegativeRegretWarning(UserWarning):
    pass


class UnboundedSetWarning(UserWarning):
    pass


def load_config(config_file=None):
    if config_file is None:
        config_file = 'config.yaml'

    base_path = os.path.dirname(__file__)  # Get current file directory
    config_file = os.path.join(base_path, config_file)

    with open(config_file, 'r', encoding='utf-8') as file:
        return yaml.safe_load(file)


@functools.lru_cache(maxsize=None)
def _cached_defaults():
    return load_config().get('defaults', {})


def defaults():
    """Returns a copy of the `defaults` section of config.yaml."""
    return dict(_cached_defaults())


def make_rng(seed):
    """
    Creates the counter-based generator used for every seeded draw.

    Args:
        seed (int or None): 64-bit seed. None gives fresh OS entropy.

    Returns:
        numpy.random.Generator: Philox-backed generator.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def format_float(value: float) -> str:
    """17 significant digits, round-trip exact."""
    if not math.isfinite(value):
        return repr(float(value))
    return format(float(value), ".17g")


def format_point(point) -> str:
    return ";".join(format_float(v) for v in np.asarray(point, dtype=float).ravel())


def parse_point(text: str) -> np.ndarray:
    return np.array([float(v) for v in str(text).split(";")], dtype=float)


class SummaryDumper(yaml.SafeDumper):
    pass


def _represent_float(dumper, value):
    if not math.isfinite(value):
        return dumper.represent_float(value)
    text = format_float(value)
    # the YAML 1.1 float resolver needs a dot in the mantissa
    if "." not in text:
        mantissa, _, exponent = text.partition("e")
        text = f"{mantissa}.0" + (f"e{exponent}" if exponent else "")
    return dumper.represent_scalar('tag:yaml.org,2002:float', text)


SummaryDumper.add_representer(float, _represent_float)
SummaryDumper.add_representer(np.float64, lambda d, v: _represent_float(d, float(v)))
SummaryDumper.add_representer(np.int64, lambda d, v: d.represent_int(int(v)))
SummaryDumper.add_representer(np.bool_, lambda d, v: d.represent_bool(bool(v)))


def dump_summary(document: dict, path: str):
    """Writes a summary document as YAML with 17-digit floats and stable key order."""
    with open(path, 'w', encoding='utf-8') as file:
        yaml.dump(document, file, Dumper=SummaryDumper, sort_keys=False, allow_unicode=True)
