"""Run configuration: a flat ``key = value`` format with ``[section]`` headers.

Top-level keys (before any header): experiment, workers, oracle_check.
Sections: chain, drive, noise, integrator, sweep, output.  Grids and rate
lists are comma-separated numbers, ``linspace(a, b, n)`` or ``logspace(a, b, n)``
(exponents, base 10), freely mixed.  Comments start with ``#``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import IntegratorConfig, Method
from .errors import ConfigError
from .hamiltonian import ChainConfig
from .lindblad import DephasingForm, NoiseConfig


class Experiment(enum.Enum):
    EVOLVE = "evolve"
    SWEEP_AMPLITUDE = "sweep-amplitude"
    SWEEP_FREQUENCY = "sweep-frequency"
    DISORDER_SCAN = "disorder-scan"
    DEPHASING_SCAN = "dephasing-scan"
    COHERENCE_VISIBILITY = "coherence-visibility"
    LONG_CHAIN = "long-chain"


TOP_KEYS = {"experiment", "workers", "oracle_check"}
SECTION_KEYS = {
    "chain": {"n_sites", "omega0", "omega", "j"},
    "drive": {"omega_drive", "e_ac", "eac_over_omega"},
    "noise": {"gamma_deph", "gamma_diss", "deph_form"},
    "integrator": {"method", "t_end", "dt_max", "rel_tol", "abs_tol", "sample_stride", "min_samples_per_period", "store_states"},
    "sweep": {"grid", "merge_comb", "include_h2", "resonant", "rates", "trace_rates", "z_values", "source", "target", "lock"},
    "output": {"name", "dir"},
}

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_SECTION = re.compile(r"^\[([A-Za-z_]+)\]$")
_CALL = re.compile(r"^(linspace|logspace)\((.*)\)$")


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run.  ``raw`` keeps the parsed key/value text for the metadata echo."""

    experiment: Experiment
    chain: ChainConfig
    noise: NoiseConfig
    integrator: IntegratorConfig
    sweep: dict
    name: str
    output_dir: Path
    workers: int = 1
    oracle_check: bool = False
    raw: dict = field(default_factory=dict)


def _tokenize(text: str) -> dict[str, dict[str, tuple[int, str]]]:
    sections: dict[str, dict[str, tuple[int, str]]] = {"": {}}
    current = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        head = _SECTION.match(stripped)
        if head:
            current = head.group(1)
            if current not in SECTION_KEYS:
                raise ConfigError(f"line {lineno}: unknown section [{current}]")
            if current in sections:
                raise ConfigError(f"line {lineno}: section [{current}] repeated")
            sections[current] = {}
            continue
        m = _LINE.match(stripped)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value' or '[section]', got {stripped!r}")
        key, value = m.group(1), m.group(2).strip()
        allowed = TOP_KEYS if current == "" else SECTION_KEYS[current]
        where = "top level" if current == "" else f"section [{current}]"
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in {where}")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: key {key!r} repeated in {where}")
        sections[current][key] = (lineno, value)
    return sections


def _split_top(value: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(value):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(value[start:i].strip())
            start = i + 1
    parts.append(value[start:].strip())
    return parts


class _Reader:
    """Typed access to one section, with errors naming the key."""

    def __init__(self, name: str, entries: dict[str, tuple[int, str]]):
        self.name = name
        self.entries = entries

    def _where(self, key: str) -> str:
        lineno = self.entries[key][0]
        prefix = f"[{self.name}] " if self.name else ""
        return f"line {lineno}: {prefix}{key}"

    def has(self, key: str) -> bool:
        return key in self.entries and self.entries[key][1] != ""

    def text(self, key: str, default: str | None = None) -> str:
        if not self.has(key):
            if default is None:
                prefix = f"[{self.name}] " if self.name else ""
                raise ConfigError(f"missing required key {prefix}{key}")
            return default
        return self.entries[key][1]

    def number(self, key: str, default: float | None = None) -> float:
        if not self.has(key):
            if default is None:
                return self.text(key)  # raises
            return default
        try:
            v = float(self.entries[key][1])
        except ValueError:
            raise ConfigError(f"{self._where(key)} must be a number, got {self.entries[key][1]!r}") from None
        if not math.isfinite(v):
            raise ConfigError(f"{self._where(key)} must be finite")
        return v

    def optional_number(self, key: str) -> float | None:
        return self.number(key) if self.has(key) else None

    def integer(self, key: str, default: int | None = None) -> int:
        v = self.number(key, None if default is None else float(default))
        if v != int(v):
            raise ConfigError(f"{self._where(key)} must be an integer")
        return int(v)

    def flag(self, key: str, default: bool) -> bool:
        if not self.has(key):
            return default
        v = self.entries[key][1].lower()
        if v in ("true", "yes", "1"):
            return True
        if v in ("false", "no", "0"):
            return False
        raise ConfigError(f"{self._where(key)} must be true or false, got {v!r}")

    def numbers(self, key: str) -> np.ndarray | None:
        if not self.has(key):
            return None
        out: list[float] = []
        try:
            for part in _split_top(self.entries[key][1]):
                call = _CALL.match(part.replace(" ", ""))
                if call:
                    a, b, n = (float(x) for x in call.group(2).split(","))
                    if n != int(n) or n < 1:
                        raise ValueError
                    fn = np.linspace if call.group(1) == "linspace" else np.logspace
                    out.extend(fn(a, b, int(n)).tolist())
                else:
                    out.append(float(part))
        except ValueError:
            raise ConfigError(f"{self._where(key)} is not a valid number list: {self.entries[key][1]!r}") from None
        if not out or not all(math.isfinite(x) for x in out):
            raise ConfigError(f"{self._where(key)} must hold finite numbers")
        return np.array(out)

    def nonnegative(self, key: str, default: float) -> float:
        v = self.number(key, default)
        if v < 0:
            raise ConfigError(f"{self._where(key)} must be non-negative, got {v:g}")
        return v


def _chain(r: _Reader, d: _Reader) -> ChainConfig:
    n = r.integer("n_sites")
    if r.has("omega") == r.has("omega0"):
        raise ConfigError("[chain] needs exactly one of omega0 or omega")
    if r.has("omega"):
        omega = tuple(r.numbers("omega"))
    else:
        omega = (r.number("omega0"),) * n
    j = r.numbers("j")
    if j is None:
        raise ConfigError("missing required key [chain] j")
    couplings = tuple(j) * (n - 1) if j.size == 1 else tuple(j)
    w = d.nonnegative("omega_drive", 0.0)
    if d.has("e_ac") and d.has("eac_over_omega"):
        raise ConfigError("[drive] e_ac and eac_over_omega are mutually exclusive")
    if d.has("eac_over_omega"):
        if w == 0:
            raise ConfigError("[drive] eac_over_omega needs omega_drive > 0")
        e_ac = d.number("eac_over_omega") * w
    else:
        e_ac = d.number("e_ac", 0.0)
    try:
        return ChainConfig(n, omega, couplings, e_ac, w)
    except ValueError as exc:
        raise ConfigError(f"[chain]/[drive]: {exc}") from None


def _noise(r: _Reader) -> NoiseConfig:
    form = r.text("deph_form", DephasingForm.SIGMA_Z.value)
    try:
        form = DephasingForm(form)
    except ValueError:
        raise ConfigError(f"[noise] deph_form must be 'sigma_z' or 'projector', got {form!r}") from None
    return NoiseConfig(r.nonnegative("gamma_deph", 0.0), r.nonnegative("gamma_diss", 0.0), form)


def _integrator(r: _Reader) -> IntegratorConfig:
    method = r.text("method", Method.RK4.value)
    if method not in {m.value for m in Method}:
        raise ConfigError(f"[integrator] method must be one of {[m.value for m in Method]}, got {method!r}")
    stride = r.integer("sample_stride") if r.has("sample_stride") else None
    return IntegratorConfig(
        method=Method(method),
        t_end=r.number("t_end", 1000.0),
        dt_max=r.optional_number("dt_max"),
        rel_tol=r.number("rel_tol", 1e-10),
        abs_tol=r.number("abs_tol", 1e-12),
        sample_stride=stride,
        min_samples_per_period=r.integer("min_samples_per_period", 16),
        store_states=r.flag("store_states", False),
    )


def _sweep(r: _Reader) -> dict:
    out: dict = {}
    for key in ("grid", "rates", "trace_rates", "z_values"):
        v = r.numbers(key)
        if v is not None:
            out[key] = v
    if out.get("grid") is not None and np.any(np.diff(out["grid"]) <= 0):
        raise ConfigError(f"{r._where('grid')} must be strictly increasing")
    for key in ("rates", "trace_rates"):
        if key in out and np.any(out[key] < 0):
            raise ConfigError(f"{r._where(key)} must be non-negative")
    out["merge_comb"] = r.flag("merge_comb", False)
    out["include_h2"] = r.flag("include_h2", True)
    out["resonant"] = r.flag("resonant", False) if r.has("resonant") else None
    out["source"] = r.integer("source", 1)
    if r.has("target"):
        out["target"] = r.integer("target")
    if r.has("lock"):
        out["lock"] = r.number("lock")
    return out


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse and validate a run configuration; every problem raises ConfigError."""
    sections = _tokenize(text)
    top = _Reader("", sections[""])
    experiment = top.text("experiment")
    try:
        experiment = Experiment(experiment)
    except ValueError:
        raise ConfigError(
            f"{top._where('experiment')} must be one of {[e.value for e in Experiment]}, got {experiment!r}"
        ) from None
    readers = {name: _Reader(name, sections.get(name, {})) for name in SECTION_KEYS}
    chain = _chain(readers["chain"], readers["drive"])
    try:
        noise = _noise(readers["noise"])
    except ValueError as exc:
        raise ConfigError(f"[noise]: {exc}") from None
    integrator = _integrator(readers["integrator"])
    integrator.step_for(chain)
    sweep = _sweep(readers["sweep"])
    out = readers["output"]
    name = out.text("name", experiment.value)
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        raise ConfigError(f"{out._where('name')} may only contain letters, digits, '_', '-' and '.'")
    out_dir = Path(out.text("dir", "."))
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    workers = top.integer("workers", 1)
    if workers < 1:
        raise ConfigError(f"{top._where('workers')} must be at least 1")
    raw = {sec or "top": {k: v for k, (_, v) in entries.items()} for sec, entries in sections.items()}
    return RunConfig(
        experiment,
        chain,
        noise,
        integrator,
        sweep,
        name,
        out_dir,
        workers,
        top.flag("oracle_check", False),
        raw,
    )


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("drivenchain.presets").iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    path = resources.files("drivenchain.presets") / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")
