"""Noise corruptions and robustness metrics for classifiers.

Three pixel-noise corruptions (gaussian, shot, impulse) are generated here at
five severities; the severity parameter tables are explicit configuration.
Corruption Error normalizes a model's error rates by a reference model's, and
category means aggregate CEs (blur/weather/digital categories accept
externally computed CE rows, since only noise generators live in-package).
Shift consistency measures how often predictions survive small translations.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadSeverity, InvalidConfig, MissingCorruption,
                     ShapeMismatch, ShiftOutOfRange, ZeroReference)

GAUSSIAN = "gaussian"
SHOT = "shot"
IMPULSE = "impulse"
NOISE_CORRUPTIONS = (GAUSSIAN, SHOT, IMPULSE)

# severity index 1..5 -> parameter; override by passing a table of this shape
DEFAULT_SEVERITY = {
    GAUSSIAN: (0.08, 0.12, 0.18, 0.26, 0.38),  # additive sigma
    SHOT: (60.0, 25.0, 12.0, 5.0, 3.0),        # photon count scale
    IMPULSE: (0.03, 0.06, 0.09, 0.17, 0.27),   # replaced fraction
}

CATEGORY_MEMBERS = {
    "noise": NOISE_CORRUPTIONS,
    "blur": ("defocus", "glass", "motion", "zoom"),
    "weather": ("snow", "frost", "fog", "brightness"),
    "digital": ("contrast", "elastic", "pixelate", "jpeg"),
}


def _severity_param(kind: str, severity: int, table) -> float:
    table = DEFAULT_SEVERITY if table is None else table
    if kind not in table:
        raise InvalidConfig(f"unknown corruption kind {kind!r}")
    levels = table[kind]
    if len(levels) != 5:
        raise InvalidConfig(f"severity table for {kind!r} must have 5 entries")
    if not isinstance(severity, (int, np.integer)) or not 1 <= severity <= 5:
        raise BadSeverity(f"severity must be an integer in 1..5, got {severity!r}")
    return float(levels[severity - 1])


def corrupt(image: np.ndarray, kind: str, severity: int, rng_seed=0,
            table=None) -> np.ndarray:
    """Apply one noise corruption to a unit-scale image; output stays in [0,1].

    ``rng_seed`` is any ``np.random.default_rng`` seed, so callers can derive
    independent per-image streams.
    """
    param = _severity_param(kind, severity, table)
    x = np.asarray(image, dtype=np.float64)
    if x.size and (x.min() < -1e-9 or x.max() > 1 + 1e-9):
        raise InvalidConfig("corrupt expects images on the [0, 1] scale")
    rng = np.random.default_rng(rng_seed)
    if kind == GAUSSIAN:
        out = x + rng.normal(0.0, param, size=x.shape)
    elif kind == SHOT:
        if param <= 0:
            raise InvalidConfig("shot-noise count scale must be positive")
        out = rng.poisson(x * param).astype(np.float64) / param
    else:  # impulse
        replaced = rng.random(x.shape) < param
        salt = rng.random(x.shape) < 0.5
        out = np.where(replaced, np.where(salt, 1.0, 0.0), x)
    return np.clip(out, 0.0, 1.0)


def corrupt_dataset(dataset, kind: str, severity: int, seed: int = 0,
                    table=None, workers: int = 1):
    """Corrupt every image with an independent (seed, index) stream.

    Worker count only affects wall-clock time; per-image streams make the
    output identical regardless of scheduling.
    """
    from .datasets import Dataset

    _severity_param(kind, severity, table)  # validate before any work
    n = len(dataset)

    def one(i):
        return corrupt(dataset.images[i], kind, severity,
                       rng_seed=[seed, i], table=table)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            planes = list(pool.map(one, range(n)))
    else:
        planes = [one(i) for i in range(n)]
    images = np.stack(planes) if n else dataset.images.astype(np.float64)
    return Dataset(images, dataset.labels)


# --- error matrices ---


@dataclass(frozen=True)
class ErrorMatrix:
    """Top-1 error rate per (corruption, severity 1..5) for one model."""

    model_id: str
    corruptions: tuple
    errors: np.ndarray  # shape (len(corruptions), 5), entries in [0, 1]

    def __post_init__(self):
        e = np.asarray(self.errors, dtype=np.float64)
        if e.shape != (len(self.corruptions), 5):
            raise ShapeMismatch(
                f"need a {len(self.corruptions)}x5 grid, got shape {e.shape}")
        if e.size and (e.min() < 0 or e.max() > 1):
            raise InvalidConfig("error rates must lie in [0, 1]")
        object.__setattr__(self, "errors", e)

    def row(self, corruption: str) -> np.ndarray:
        try:
            return self.errors[self.corruptions.index(corruption)]
        except ValueError:
            raise MissingCorruption([corruption]) from None

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# model: {self.model_id}\n")
        out.write("corruption,severity_1,severity_2,severity_3,severity_4,severity_5\n")
        for name, row in zip(self.corruptions, self.errors):
            out.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()

    @staticmethod
    def from_csv(text: str) -> "ErrorMatrix":
        model_id = ""
        names, rows = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "model:" in line:
                    model_id = line.split("model:", 1)[1].strip()
                continue
            cells = next(csv.reader([line]))
            if cells[0] == "corruption":
                continue
            if len(cells) != 6:
                raise InvalidConfig(f"bad error-matrix row: {line!r}")
            names.append(cells[0])
            rows.append([float(v) for v in cells[1:]])
        return ErrorMatrix(model_id, tuple(names), np.asarray(rows).reshape(-1, 5))

    def to_json_dict(self) -> dict:
        return {
            "model": self.model_id,
            "errors": {name: [float(v) for v in row]
                       for name, row in zip(self.corruptions, self.errors)},
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ErrorMatrix":
        names = tuple(d["errors"])
        grid = np.asarray([d["errors"][k] for k in names], dtype=np.float64)
        return ErrorMatrix(str(d.get("model", "")), names, grid.reshape(-1, 5))


def error_matrix(model, dataset, kinds=NOISE_CORRUPTIONS, seed: int = 0,
                 table=None, workers: int = 1, model_id: str = "") -> ErrorMatrix:
    """Measure a model's corrupted top-1 error over all kinds and severities."""
    from .network import evaluate

    grid = np.empty((len(kinds), 5))
    for i, kind in enumerate(kinds):
        for severity in range(1, 6):
            corrupted = corrupt_dataset(dataset, kind, severity, seed=seed,
                                        table=table, workers=workers)
            grid[i, severity - 1] = evaluate(model, corrupted)
    ident = model_id or getattr(model, "checksum", lambda: "model")()[:12]
    return ErrorMatrix(ident, tuple(kinds), grid)


# --- corruption-error metrics ---


def corruption_error(errors_f, errors_ref) -> float:
    """100 x (summed model error over severities) / (summed reference error)."""
    f = np.asarray(errors_f, dtype=np.float64).reshape(-1)
    r = np.asarray(errors_ref, dtype=np.float64).reshape(-1)
    if f.shape != (5,) or r.shape != (5,):
        raise ShapeMismatch("corruption_error expects 5 severity values per model")
    denom = float(r.sum())
    if denom <= 0.0:
        raise ZeroReference("reference error rates sum to zero")
    return 100.0 * float(f.sum()) / denom


def mean_ce(ces: dict, category: str) -> float:
    """Arithmetic mean of one category's CE values (3 noise members, else 4)."""
    if category not in CATEGORY_MEMBERS:
        raise InvalidConfig(f"unknown corruption category {category!r}")
    members = CATEGORY_MEMBERS[category]
    missing = [m for m in members if m not in ces]
    if missing:
        raise MissingCorruption(missing)
    return float(sum(float(ces[m]) for m in members) / len(members))


@dataclass(frozen=True)
class RobustnessReport:
    """CE per corruption plus whichever category means are fully covered."""

    measured: ErrorMatrix
    reference: ErrorMatrix
    ces: dict
    mces: dict

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# model: {self.measured.model_id}\n")
        out.write(f"# reference: {self.reference.model_id}\n")
        out.write("corruption,severity_1,severity_2,severity_3,severity_4,"
                  "severity_5,ce\n")
        for name, row in zip(self.measured.corruptions, self.measured.errors):
            ce = self.ces.get(name)
            tail = repr(float(ce)) if ce is not None else ""
            out.write(name + "," + ",".join(repr(float(v)) for v in row)
                      + "," + tail + "\n")
        for category, value in sorted(self.mces.items()):
            out.write(f"mce_{category},,,,,,{float(value)!r}\n")
        return out.getvalue()

    def to_json_dict(self) -> dict:
        return {
            "model": self.measured.model_id,
            "reference_model": self.reference.model_id,
            "errors": self.measured.to_json_dict()["errors"],
            "reference_errors": self.reference.to_json_dict()["errors"],
            "ce": {k: float(v) for k, v in self.ces.items()},
            "mce": {k: float(v) for k, v in self.mces.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"


def robustness_report(measured: ErrorMatrix,
                      reference: ErrorMatrix) -> RobustnessReport:
    """Normalize a measured matrix by a reference one.

    A CE appears only for corruptions present in both matrices; a category
    mean appears only when every member corruption has a CE.
    """
    ces = {}
    for name in measured.corruptions:
        if name in reference.corruptions:
            ces[name] = corruption_error(measured.row(name), reference.row(name))
    mces = {}
    for category, members in CATEGORY_MEMBERS.items():
        if all(m in ces for m in members):
            mces[category] = mean_ce(ces, category)
    return RobustnessReport(measured, reference, ces, mces)


# --- shift consistency ---


@dataclass(frozen=True)
class ShiftTrialConfig:
    """How translation pairs are sampled for consistency measurement.

    ``fixed_pairs`` (a sequence of ((h0, w0), (h1, w1)) tuples) replaces
    random sampling entirely; ``equal_shifts`` forces the second shift of
    each sampled pair to equal the first.  Both exist to pin corner cases
    under test.
    """

    max_shift: int = 8
    pairs: int = 64
    padding: str = "reflect"
    seed: int = 0
    equal_shifts: bool = False
    fixed_pairs: tuple = ()

    def __post_init__(self):
        if self.max_shift < 1:
            raise InvalidConfig("shift range must be >= 1 pixel")
        if self.pairs < 1:
            raise InvalidConfig("need at least one shift pair")
        if self.padding not in ("reflect", "edge", "constant"):
            raise InvalidConfig(f"unknown padding rule {self.padding!r}")


def shift_image(images: np.ndarray, dy: int, dx: int,
                padding: str = "reflect") -> np.ndarray:
    """Translate content of NCHW (or CHW/HW) images by whole pixels.

    Positive shifts move content down/right; vacated pixels follow the
    padding rule.
    """
    x = np.asarray(images)
    h, w = x.shape[-2], x.shape[-1]
    p = max(abs(dy), abs(dx))
    if p == 0:
        return x.copy()
    if padding == "reflect" and p > min(h, w) - 1:
        raise ShiftOutOfRange(
            f"shift {p} exceeds reflect-padding limit {min(h, w) - 1}")
    pad = [(0, 0)] * (x.ndim - 2) + [(p, p), (p, p)]
    padded = np.pad(x, pad, mode=padding)
    return padded[..., p - dy:p - dy + h, p - dx:p - dx + w]


def shift_consistency(model, dataset, cfg: ShiftTrialConfig = ShiftTrialConfig()) -> float:
    """Percentage of (image, shift-pair) trials with matching predictions."""
    images = np.asarray(dataset.images)
    h, w = images.shape[-2], images.shape[-1]
    limit = min(h, w) - 1 if cfg.padding == "reflect" else cfg.max_shift
    if cfg.max_shift > limit:
        raise ShiftOutOfRange(
            f"shift range {cfg.max_shift} too large for {h}x{w} images "
            f"under {cfg.padding} padding")

    if cfg.fixed_pairs:
        trials = [((int(a), int(b)), (int(c), int(d)))
                  for (a, b), (c, d) in cfg.fixed_pairs]
    else:
        rng = np.random.default_rng(cfg.seed)
        draws = rng.integers(-cfg.max_shift, cfg.max_shift + 1, size=(cfg.pairs, 4))
        trials = [((int(r[0]), int(r[1])), (int(r[2]), int(r[3]))) for r in draws]
    if cfg.equal_shifts:
        trials = [(a, a) for a, _ in trials]

    agree = 0
    total = 0
    for (h0, w0), (h1, w1) in trials:
        p0 = model.predict(shift_image(images, h0, w0, cfg.padding))
        p1 = model.predict(shift_image(images, h1, w1, cfg.padding))
        agree += int((p0 == p1).sum())
        total += len(p0)
    return 100.0 * agree / total
