"""Run configuration: INI-style ``key = value`` text with section headers.

Grammar (every key optional unless noted)::

    [domain]
    dimension = 2            # required, 1..3
    lengths = 1.0 1.0        # required, one positive length per axis
    nodes = 32 32            # required, interior nodes per axis, each >= 2

    [problem]
    p = 4                    # required, > 2
    q = 1.5                  # required, in (1, 2)

    [mu]
    relative = true          # values are multiples of mu_star
    value = 0.5              # single value ...
    start = 0.1              # ... or a sweep: start, stop, count, spacing
    stop = 0.9
    count = 8
    spacing = linear         # linear | log

    [solver]
    tol = 1e-10
    max_iter = 5000
    trial_count = 100
    verify_tol = 1e-8

    [multiplicity]
    enabled = false
    want = 3
    rho_levels = 20
    shift = 1.0
    power = 2.0
    random_starts = 20

    [run]
    seed = 0
    out = runs
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MuSpec:
    relative: bool = True
    value: Optional[float] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    count: Optional[int] = None
    spacing: str = "linear"

    @property
    def is_sweep(self) -> bool:
        return self.value is None

    def values(self) -> list[float]:
        if not self.is_sweep:
            return [self.value]
        if self.count == 1:
            return [self.start]
        if self.spacing == "log":
            return [float(x) for x in np.geomspace(self.start, self.stop, self.count)]
        return [float(x) for x in np.linspace(self.start, self.stop, self.count)]


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    lengths: tuple[float, ...]
    nodes: tuple[int, ...]
    p: float
    q: float
    mu: MuSpec = field(default_factory=MuSpec)
    tol: float = 1e-10
    max_iter: int = 5000
    trial_count: int = 100
    verify_tol: float = 1e-8
    multiplicity: bool = False
    want: int = 3
    rho_levels: int = 20
    shift: float = 1.0
    power: float = 2.0
    random_starts: int = 20
    seed: int = 0
    out: str = "runs"

    def to_text(self) -> str:
        m = self.mu
        mu_lines = [f"relative = {_fmt_bool(m.relative)}"]
        if m.is_sweep:
            mu_lines += [
                f"start = {m.start!r}",
                f"stop = {m.stop!r}",
                f"count = {m.count}",
                f"spacing = {m.spacing}",
            ]
        else:
            mu_lines.append(f"value = {m.value!r}")
        sections = [
            ("domain", [
                f"dimension = {self.dimension}",
                "lengths = " + " ".join(repr(x) for x in self.lengths),
                "nodes = " + " ".join(str(n) for n in self.nodes),
            ]),
            ("problem", [f"p = {self.p!r}", f"q = {self.q!r}"]),
            ("mu", mu_lines),
            ("solver", [
                f"tol = {self.tol!r}",
                f"max_iter = {self.max_iter}",
                f"trial_count = {self.trial_count}",
                f"verify_tol = {self.verify_tol!r}",
            ]),
            ("multiplicity", [
                f"enabled = {_fmt_bool(self.multiplicity)}",
                f"want = {self.want}",
                f"rho_levels = {self.rho_levels}",
                f"shift = {self.shift!r}",
                f"power = {self.power!r}",
                f"random_starts = {self.random_starts}",
            ]),
            ("run", [f"seed = {self.seed}", f"out = {self.out}"]),
        ]
        return "\n".join(f"[{name}]\n" + "\n".join(lines) + "\n" for name, lines in sections)

    def identity(self, *extra: str) -> str:
        """Short hash naming the run directory."""
        h = hashlib.sha256(self.to_text().encode())
        for e in extra:
            h.update(e.encode())
        return h.hexdigest()[:12]

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, seed=int(seed))


def _fmt_bool(b: bool) -> str:
    return "true" if b else "false"


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            self.cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}") from None
        known = {"domain", "problem", "mu", "solver", "multiplicity", "run"}
        for sec in self.cp.sections():
            if sec not in known:
                raise ConfigError(f"line {self._line(sec, None)}: unknown section [{sec}]")

    def _line(self, section: str, key: Optional[str]) -> int:
        current = None
        for no, raw in enumerate(self.text.splitlines(), 1):
            s = raw.strip()
            m = re.match(r"\[(.+)\]", s)
            if m:
                current = m.group(1).strip()
                if key is None and current == section:
                    return no
                continue
            if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
                return no
        return 0

    def fail(self, section: str, key: str, msg: str):
        line = self._line(section, key)
        where = f"line {line}: " if line else ""
        raise ConfigError(f"{where}[{section}] {key}: {msg}")

    def has(self, section: str, key: str) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section: str, key: str, default=None, required=False):
        if self.has(section, key):
            return self.cp.get(section, key).strip()
        if required:
            self.fail(section, key, "required field missing")
        return default

    def num(self, section, key, conv, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            return conv(v)
        except ValueError:
            self.fail(section, key, f"cannot parse {v!r} as {conv.__name__}")

    def flag(self, section, key, default):
        v = self.raw(section, key)
        if v is None:
            return default
        if v.lower() in ("true", "yes", "1", "on"):
            return True
        if v.lower() in ("false", "no", "0", "off"):
            return False
        self.fail(section, key, f"expected true/false, got {v!r}")

    def vector(self, section, key, conv):
        v = self.raw(section, key, required=True)
        try:
            return tuple(conv(x) for x in v.replace(",", " ").split())
        except ValueError:
            self.fail(section, key, f"cannot parse {v!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and range-check configuration text."""
    r = _Reader(text)
    dim = r.num("domain", "dimension", int, required=True)
    if dim not in (1, 2, 3):
        r.fail("domain", "dimension", f"must be 1, 2 or 3, got {dim}")
    lengths = r.vector("domain", "lengths", float)
    nodes = r.vector("domain", "nodes", int)
    if len(lengths) != dim:
        r.fail("domain", "lengths", f"need {dim} entries, got {len(lengths)}")
    if len(nodes) != dim:
        r.fail("domain", "nodes", f"need {dim} entries, got {len(nodes)}")
    if any(not L > 0 for L in lengths):
        r.fail("domain", "lengths", "must be positive")
    if any(n < 2 for n in nodes):
        r.fail("domain", "nodes", "need at least 2 interior nodes per axis")

    p = r.num("problem", "p", float, required=True)
    q = r.num("problem", "q", float, required=True)
    if not p > 2:
        r.fail("problem", "p", f"must satisfy p > 2, got {p}")
    if not 1 < q < 2:
        r.fail("problem", "q", f"must satisfy 1 < q < 2, got {q}")

    relative = r.flag("mu", "relative", True)
    value = r.num("mu", "value", float)
    sweep_keys = [k for k in ("start", "stop", "count") if r.has("mu", k)]
    if value is not None and sweep_keys:
        r.fail("mu", "value", "give either value or start/stop/count, not both")
    if value is None:
        if len(sweep_keys) != 3:
            r.fail("mu", "value", "need value or all of start, stop, count")
        start = r.num("mu", "start", float)
        stop = r.num("mu", "stop", float)
        count = r.num("mu", "count", int)
        spacing = r.raw("mu", "spacing", "linear").lower()
        if spacing not in ("linear", "log"):
            r.fail("mu", "spacing", f"must be linear or log, got {spacing!r}")
        if count < 1:
            r.fail("mu", "count", "must be >= 1")
        for key, v in (("start", start), ("stop", stop)):
            if not v >= 0:
                r.fail("mu", key, f"must satisfy mu >= 0, got {v}")
        if spacing == "log" and not (start > 0 and stop > 0):
            r.fail("mu", "start", "log spacing needs positive start and stop")
        mu = MuSpec(relative, None, start, stop, count, spacing)
    else:
        if not value >= 0:
            r.fail("mu", "value", f"must satisfy mu >= 0, got {value}")
        mu = MuSpec(relative, value)

    cfg = RunConfig(
        dimension=dim,
        lengths=lengths,
        nodes=nodes,
        p=p,
        q=q,
        mu=mu,
        tol=r.num("solver", "tol", float, 1e-10),
        max_iter=r.num("solver", "max_iter", int, 5000),
        trial_count=r.num("solver", "trial_count", int, 100),
        verify_tol=r.num("solver", "verify_tol", float, 1e-8),
        multiplicity=r.flag("multiplicity", "enabled", False),
        want=r.num("multiplicity", "want", int, 3),
        rho_levels=r.num("multiplicity", "rho_levels", int, 20),
        shift=r.num("multiplicity", "shift", float, 1.0),
        power=r.num("multiplicity", "power", float, 2.0),
        random_starts=r.num("multiplicity", "random_starts", int, 20),
        seed=r.num("run", "seed", int, 0),
        out=r.raw("run", "out", "runs"),
    )
    for sec, key, ok in (
        ("solver", "tol", cfg.tol > 0),
        ("solver", "max_iter", cfg.max_iter >= 1),
        ("solver", "trial_count", cfg.trial_count >= 1),
        ("solver", "verify_tol", cfg.verify_tol > 0),
        ("multiplicity", "want", cfg.want >= 0),
        ("multiplicity", "rho_levels", cfg.rho_levels >= 1),
        ("multiplicity", "shift", cfg.shift > 0),
        ("multiplicity", "power", cfg.power >= 1),
        ("multiplicity", "random_starts", cfg.random_starts >= 0),
    ):
        if not ok:
            r.fail(sec, key, "out of range")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def canonical_text(text: str) -> str:
    return parse_config(text).to_text()


__all__ = ["ConfigError", "MuSpec", "RunConfig", "canonical_text", "load_config", "parse_config"]
