"""Quasi-random hyperparameter search plans.

Learning rate and weight decay are sampled with Halton sequences in coprime
prime bases and mapped log-uniformly into their ranges, because both ranges
span orders of magnitude. The first points of a Halton sequence are strongly
correlated across bases, so a configurable number of leading points is
skipped. Everything is deterministic and prefix-stable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from . import jsonutil
from .probe_store import ValidationError, _atomic_write_bytes

LR_BASE = 2
WD_BASE = 3
DEFAULT_COUNT = 75
DEFAULT_SKIP = 20
DEFAULT_LR_RANGE = (1e-4, 1e-1)
DEFAULT_WD_RANGE = (1e-6, 1e-4)

ASSUMPTIONS = {
    "halton_bases": {"learning_rate": LR_BASE, "weight_decay": WD_BASE},
    "skip": "first `skip` Halton points dropped; low indices correlate across bases",
    "mapping": "log-uniform: value = 10^(log10(lo) + u * (log10(hi) - log10(lo)))",
}


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def halton(index: int, base: int) -> float:
    """Radical inverse of `index` in a prime base; index starts at 1.

    Writes the index in the base and mirrors its digits across the radix
    point: index 5 = 101 in base 2 becomes 0.101 = 0.625.
    """
    if not isinstance(index, int) or index < 1:
        raise ValidationError(f"halton index must be a positive integer, got {index!r}")
    if not isinstance(base, int) or not _is_prime(base):
        raise ValidationError(f"halton base must be a prime, got {base!r}")
    value = 0.0
    scale = 1.0 / base
    i = index
    while i > 0:
        value += (i % base) * scale
        i //= base
        scale /= base
    return value


def log_uniform(u: float, low: float, high: float) -> float:
    """Map u in [0, 1] onto [low, high] uniformly in log10 space."""
    import math

    lo, hi = math.log10(low), math.log10(high)
    return 10.0 ** (lo + u * (hi - lo))


@dataclass(frozen=True)
class HpoConfig:
    """One sampled training configuration.

    The searched fields are learning_rate and weight_decay; the rest of the
    recipe is held fixed (SGD, cosine schedule, 100 epochs, batch 128).
    """

    index: int
    learning_rate: float
    weight_decay: float
    optimizer: str = "SGD"
    scheduler: str = "cosine"
    epochs: int = 100
    batch_size: int = 128

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError(f"config index must be >= 1, got {self.index}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.weight_decay > 0:
            raise ValidationError(f"weight_decay must be positive, got {self.weight_decay}")
        fixed = (self.optimizer, self.scheduler, self.epochs, self.batch_size)
        if fixed != ("SGD", "cosine", 100, 128):
            raise ValidationError(f"fixed training fields may not change, got {fixed}")


def _check_range(name: str, rng: tuple[float, float]) -> tuple[float, float]:
    low, high = float(rng[0]), float(rng[1])
    if not (low > 0 and high > 0 and low < high):
        raise ValidationError(
            f"{name} range must be positive with low < high, got ({low}, {high})"
        )
    return low, high


def plan(
    count: int = DEFAULT_COUNT,
    lr_range: tuple[float, float] = DEFAULT_LR_RANGE,
    wd_range: tuple[float, float] = DEFAULT_WD_RANGE,
    skip: int = DEFAULT_SKIP,
) -> tuple[HpoConfig, ...]:
    """Deterministic list of configs; config k uses Halton index k + skip.

    Learning rate takes base 2, weight decay base 3, both mapped
    log-uniformly into their ranges. plan(m) is a prefix of plan(n) for
    m <= n under the same skip.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    if skip < 0:
        raise ValidationError(f"skip must be >= 0, got {skip}")
    lr_lo, lr_hi = _check_range("learning rate", lr_range)
    wd_lo, wd_hi = _check_range("weight decay", wd_range)
    configs = []
    for k in range(1, count + 1):
        idx = k + skip
        lr = log_uniform(halton(idx, LR_BASE), lr_lo, lr_hi)
        wd = log_uniform(halton(idx, WD_BASE), wd_lo, wd_hi)
        configs.append(HpoConfig(index=k, learning_rate=lr, weight_decay=wd))
    return tuple(configs)


def write_plan(configs, out_dir) -> list[Path]:
    """One JSON file per config plus a combined JSON-lines file.

    plan_meta.json records the sampling assumptions (bases, skip, log
    mapping) alongside the plan so consumers see them explicitly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    lines = []
    for cfg in configs:
        doc = asdict(cfg)
        path = out / f"config_{cfg.index:04d}.json"
        _atomic_write_bytes(path, (jsonutil.dumps(doc) + "\n").encode())
        written.append(path)
        lines.append(jsonutil.dumps(doc, indent=0).replace("\n", ""))
    combined = out / "plan.jsonl"
    _atomic_write_bytes(combined, ("\n".join(lines) + "\n").encode())
    written.append(combined)
    meta = out / "plan_meta.json"
    _atomic_write_bytes(meta, (json.dumps(ASSUMPTIONS, indent=2) + "\n").encode())
    written.append(meta)
    return written
