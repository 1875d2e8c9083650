"""Reading inputs and persisting runs.

Draw files come in two flavours that carry the same content:

* ``.csv``: ``#``-prefixed header lines holding the JSON manifest, then one
  row per retained draw with columns ``zeta, tau, alpha, sigma, xi,
  omega_1..omega_m, log_post``;
* ``.npz``: the raw arrays plus the manifest as a JSON string.

Either way a ``<file>.json`` sidecar is written next to the draws. The
manifest holds the full :class:`RunConfig`, the seed, package versions
and the preprocessed data, so a fit can be summarized (or rerun) from
its output alone.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .model import Dataset
from .priors import PriorConfig, alpha_transform
from .sampler import PosteriorDraws, SamplerConfig


class InputError(ValueError):
    """Malformed input or inconsistent configuration (CLI exit code 2)."""


_PRIOR_KEYS = [f.name for f in fields(PriorConfig)]
_SAMPLER_KEYS = ["n_iter", "burn_in", "thin", "target_accept", "adapt_decay", "adapt_scale", "adapt_offset",
                 "init_sd", "regularization"]


@dataclass
class RunConfig:
    grid_size: int = 101
    n_knots: int = 11
    prior: PriorConfig = field(default_factory=PriorConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    truncate_below: float | None = None
    jitter_half_width: float = 0.0
    support_shift: float = 0.0
    seed: int = 0
    input: str | None = None
    output: str | None = None

    def __post_init__(self):
        if self.grid_size < 2 * self.n_knots:
            raise InputError(f"grid_size ({self.grid_size}) must be at least twice n_knots ({self.n_knots})")
        if self.n_knots < 2:
            raise InputError("n_knots must be at least 2")
        if self.jitter_half_width < 0:
            raise InputError("jitter_half_width must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prior"] = self.prior.to_dict()
        d["sampler"] = self.sampler.to_dict()
        return d

    def to_flat(self) -> dict:
        """Flat ``key -> value`` view matching the config-file keys."""
        d = self.to_dict()
        flat = {k: v for k, v in d.items() if k not in ("prior", "sampler")}
        flat.update(d["prior"])
        flat.update({k: d["sampler"][k] for k in _SAMPLER_KEYS})
        return flat

    @classmethod
    def from_flat(cls, values: dict) -> "RunConfig":
        values = dict(values)
        prior = PriorConfig(**{k: float(values.pop(k)) for k in _PRIOR_KEYS if k in values})
        sampler_kw = {k: values.pop(k) for k in _SAMPLER_KEYS if k in values}
        sampler_kw = {k: _coerce_sampler(k, v) for k, v in sampler_kw.items()}
        seed = int(values.get("seed", 0))
        try:
            sampler = SamplerConfig(seed=seed, **sampler_kw)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise InputError(f"unknown configuration keys: {sorted(unknown)}")
        kw = {}
        for key in ("grid_size", "n_knots"):
            if key in values:
                kw[key] = int(values[key])
        for key in ("jitter_half_width", "support_shift"):
            if key in values:
                kw[key] = float(values[key])
        if values.get("truncate_below") not in (None, "", "none", "None"):
            kw["truncate_below"] = float(values["truncate_below"])
        for key in ("input", "output"):
            if values.get(key) not in (None, ""):
                kw[key] = str(values[key])
        return cls(prior=prior, sampler=sampler, seed=seed, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        flat = {k: v for k, v in d.items() if k not in ("prior", "sampler")}
        flat.update(d.get("prior", {}))
        flat.update({k: v for k, v in d.get("sampler", {}).items() if k in _SAMPLER_KEYS})
        return cls.from_flat(flat)


def _coerce_sampler(key: str, value):
    if value is None or value == "None":
        return None
    if key in ("n_iter", "burn_in", "thin"):
        return int(float(value))
    return float(value)


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_config_file(config: RunConfig, path) -> None:
    lines = [f"{k} = {'' if v is None else v}" for k, v in config.to_flat().items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_values(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a one- or two-column CSV of nonnegative values (header optional).

    The first numeric column holds the values; a second column (e.g. a
    date) is returned as strings and otherwise ignored.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read input file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    rows = [r for r in csv.reader(lines) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data rows")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    values, extra = [], []
    for lineno, row in enumerate(rows, 1):
        try:
            values.append(float(row[0]))
        except ValueError as exc:
            raise InputError(f"{path}: row {lineno}: cannot parse {row[0]!r} as a number") from exc
        if len(row) > 1:
            extra.append(row[1].strip())
    if not values:
        raise InputError(f"{path}: no data rows")
    return np.array(values), (extra if len(extra) == len(values) else None)


def preprocess(raw, truncate_below: float | None = None, jitter_half_width: float = 0.0,
               support_shift: float = 0.0, seed: int | None = None) -> Dataset:
    """Truncate, jitter (seeded ``Uniform(-h, h)``) and shift raw measurements."""
    raw = np.asarray(raw, dtype=float).ravel()
    if not np.all(np.isfinite(raw)):
        raise InputError("input values must be finite")
    if np.any(raw < 0):
        i = int(np.flatnonzero(raw < 0)[0])
        raise InputError(f"input values must be nonnegative; value {i} is {raw[i]}")
    kept = raw if truncate_below is None else raw[raw >= truncate_below]
    if kept.size == 0:
        raise InputError("no observations left after truncation")
    if jitter_half_width > 0:
        rng = np.random.default_rng(seed)
        kept = kept + rng.uniform(-jitter_half_width, jitter_half_width, size=kept.size)
    y = kept - support_shift
    bad = np.flatnonzero(y <= 0)
    if bad.size:
        i = int(bad[0])
        raise InputError(f"value {kept[i]!r} is not above the support shift {support_shift} after preprocessing")
    return Dataset(y, truncate_below=truncate_below, jitter_half_width=jitter_half_width,
                   support_shift=support_shift, seed=seed, original_count=raw.size)


def environment() -> dict:
    import numba
    import scipy

    return {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def build_manifest(config: RunConfig, data: Dataset, draws: PosteriorDraws, extra: dict | None = None) -> dict:
    manifest = {
        "config": config.to_dict(),
        "seed": config.seed,
        "data": {**data.provenance(), "values": data.y.tolist()},
        "acceptance": draws.acceptance.tolist(),
        "acceptance_post_burn": draws.acceptance_post_burn.tolist(),
        "block_names": draws.block_names,
        "columns": draw_columns(draws.names),
        "environment": environment(),
    }
    if extra:
        manifest.update(extra)
    return manifest


def draw_columns(names) -> list[str]:
    return ["zeta", "tau", "alpha", "sigma", "xi"] + list(names[2:]) + ["log_post"]


def draw_table(draws: PosteriorDraws, alpha_min: float) -> np.ndarray:
    zeta, tau = draws.samples[:, 0], draws.samples[:, 1]
    alpha = alpha_transform(zeta, alpha_min)
    return np.column_stack([zeta, tau, alpha, np.exp(tau), 1.0 / alpha, draws.samples[:, 2:], draws.log_post])


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_draws(path, draws: PosteriorDraws, manifest: dict) -> Path:
    """Write draws as CSV or NPZ (by suffix) plus a JSON sidecar manifest."""
    path = Path(path)
    alpha_min = manifest["config"]["prior"]["alpha_min"]
    table = draw_table(draws, alpha_min)
    columns = manifest["columns"]
    text = json.dumps(manifest, sort_keys=True)
    if path.suffix == ".npz":
        np.savez(path, table=table, columns=np.array(columns), manifest=np.array(text))
    else:
        with open(path, "w", newline="") as fh:
            for line in json.dumps(manifest, sort_keys=True, indent=1).splitlines():
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in table:
                writer.writerow([repr(float(v)) for v in row])
    _sidecar(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


@dataclass
class LoadedDraws:
    table: np.ndarray
    columns: list[str]
    manifest: dict

    def column(self, name: str) -> np.ndarray:
        return self.table[:, self.columns.index(name)]

    @property
    def states(self) -> np.ndarray:
        """``(zeta, tau, omega...)`` rows, the model's state vectors."""
        idx = [self.columns.index("zeta"), self.columns.index("tau")]
        idx += [i for i, c in enumerate(self.columns) if c.startswith("omega_")]
        return self.table[:, idx]

    @property
    def config(self) -> RunConfig:
        return RunConfig.from_dict(self.manifest["config"])

    def dataset(self) -> Dataset:
        d = self.manifest["data"]
        return Dataset(np.array(d["values"]), truncate_below=d["truncate_below"],
                       jitter_half_width=d["jitter_half_width"], support_shift=d["support_shift"],
                       seed=d["seed"], original_count=d["original_count"])


def load_draws(path) -> LoadedDraws:
    path = Path(path)
    if not path.exists():
        raise InputError(f"draws file {path} does not exist")
    try:
        if path.suffix == ".npz":
            with np.load(path) as z:
                return LoadedDraws(z["table"], [str(c) for c in z["columns"]], json.loads(str(z["manifest"])))
        header, body = [], []
        for line in path.read_text().splitlines():
            (header if line.startswith("#") else body).append(line)
        manifest = json.loads("\n".join(h[2:] for h in header)) if header else None
        if manifest is None:
            side = _sidecar(path)
            if not side.exists():
                raise InputError(f"{path}: no embedded manifest and no sidecar {side.name}")
            manifest = json.loads(side.read_text())
        rows = list(csv.reader(body))
        columns = rows[0]
    except (json.JSONDecodeError, KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: malformed draws file ({exc})") from exc
    missing = [c for c in ("zeta", "tau") if c not in columns]
    if missing or not any(c.startswith("omega_") for c in columns):
        raise InputError(f"{path}: missing columns {missing or ['omega_*']}")
    try:
        table = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric draw value ({exc})") from exc
    if table.size == 0:
        raise InputError(f"{path}: no draws")
    return LoadedDraws(table, columns, manifest)


def write_records(records: list[dict], path) -> None:
    """CSV when the suffix is ``.csv``, JSON otherwise."""
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(records[0]))
            writer.writeheader()
            for rec in records:
                writer.writerow({k: _fmt(v) for k, v in rec.items()})
    else:
        path.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return "" if v is None else v
