"""Plain-text key=value configuration files.

Grammar (one entry per line):
    key = value          # trailing comments allowed
Blank lines and lines starting with '#' are ignored.  Keys are dotted
lowercase words.  Values are scalars, comma-separated lists, or
semicolon-separated tuples (potential terms: "amp,k1,...,kd; amp,k1,...").
Parse errors carry 1-based line numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .hamiltonian import CosinePotential, HamiltonianSpec, normalize


class ConfigError(ConfigurationError):
    """Malformed configuration file; message carries the line number."""


@dataclass
class Config:
    entries: dict = field(default_factory=dict)   # key -> (value str, line)
    path: str = "<memory>"

    def has(self, key: str) -> bool:
        return key in self.entries

    def _raw(self, key: str, default=None, required: bool = False) -> str | None:
        if key in self.entries:
            return self.entries[key][0]
        if required:
            raise ConfigError(f"{self.path}: missing required key {key!r}")
        return default

    def _line(self, key: str) -> int:
        return self.entries[key][1]

    def get_str(self, key: str, default=None, required=False):
        return self._raw(key, default, required)

    def get_float(self, key: str, default=None, required=False):
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(
                f"{self.path}:{self._line(key)}: {key} = {raw!r} is not a number")

    def get_int(self, key: str, default=None, required=False):
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(
                f"{self.path}:{self._line(key)}: {key} = {raw!r} is not an integer")

    def get_floats(self, key: str, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(
                f"{self.path}:{self._line(key)}: {key} = {raw!r} is not a comma list")

    def get_terms(self, key: str):
        """Semicolon-separated "amplitude,k1,...,kd" tuples."""
        raw = self._raw(key)
        if raw is None:
            return []
        out = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            toks = [t.strip() for t in chunk.split(",")]
            try:
                amp = float(toks[0])
                k = tuple(int(t) for t in toks[1:])
            except (ValueError, IndexError):
                raise ConfigError(
                    f"{self.path}:{self._line(key)}: bad potential term {chunk!r}")
            if not k:
                raise ConfigError(
                    f"{self.path}:{self._line(key)}: term {chunk!r} lacks a wave vector")
            out.append((amp, k))
        return out

    def get_vectors(self, key: str, default=None):
        """Semicolon-separated comma-vectors, e.g. "0,0; 0.5,0"."""
        raw = self._raw(key)
        if raw is None:
            return default
        out = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                out.append([float(t) for t in chunk.split(",")])
            except ValueError:
                raise ConfigError(
                    f"{self.path}:{self._line(key)}: bad vector {chunk!r}")
        return out


def parse_config_text(text: str, path: str = "<memory>") -> Config:
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "#" in stripped:
            stripped = stripped.split("#", 1)[0].strip()
            if not stripped:
                continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or any(ch.isspace() for ch in key):
            raise ConfigError(f"{path}:{lineno}: malformed key {key!r}")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r} "
                              f"(first at line {entries[key][1]})")
        entries[key] = (value, lineno)
    return Config(entries=entries, path=path)


def parse_config(path) -> Config:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config_text(text, str(path))


def spec_from_config(cfg: Config) -> tuple[HamiltonianSpec, float]:
    """Build and normalize the Hamiltonian spec; returns (spec, shift)."""
    d = cfg.get_int("dimension", required=True)
    family = cfg.get_str("family", "quadratic_minus_potential")
    a0 = cfg.get_float("potential.a0", 0.0)
    terms = cfg.get_terms("potential.terms")
    for _, k in terms:
        if len(k) != d:
            raise ConfigError(
                f"{cfg.path}:{cfg._line('potential.terms')}: wave vector {k} "
                f"has {len(k)} components, expected {d}")
    cap_raw = cfg.get_str("momentum_cap", "inf")
    cap = np.inf if cap_raw in ("inf", "") else float(cap_raw)
    spec = HamiltonianSpec(
        dimension=d,
        potential=CosinePotential(d, a0, tuple((a, k) for a, k in terms)),
        family=family,
        momentum_cap=cap,
    )
    return normalize(spec)
