"""Run configuration files: flat ``key = value`` pairs in bracketed sections.

Example::

    [problem]
    alpha = 2 + sin(x)
    beta = 1
    f = exp(x)

    [run]
    eps_list = 0.0625, 0.03125, 0.015625
    degrees = 4, 6, 8, 10
    checks = classical_bound, remainder

    [tolerances]
    r2_min = 0.98

``[problem]`` may instead name a corpus entry with ``corpus = variable``;
explicit expressions then override single fields.  Every error names the
offending line.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus
from .analytic import parse
from .errors import ConfigError, Sp4Error
from .problem import Problem
from .verify import CHECK_NAMES, TOLERANCE_KEYS

SECTIONS = {
    "problem": {"corpus", "alpha", "beta", "f"},
    "run": {"eps_list", "degrees", "m_override", "output_dir", "checks", "n_max", "m_cap"},
    "tolerances": set(TOLERANCE_KEYS) | {"oracle_tol"},
}
DEFAULT_DEGREES = (4, 6, 8, 10, 12)


@dataclass
class RunConfig:
    alpha: str
    beta: str
    f: str
    eps_list: list[float]
    degrees: list[int] = field(default_factory=lambda: list(DEFAULT_DEGREES))
    M_override: int | None = None
    output_dir: Path = Path("out")
    checks: list[str] = field(default_factory=lambda: list(CHECK_NAMES))
    tolerances: dict[str, float] = field(default_factory=dict)
    N: int = 10
    M_cap: int = 40
    source: str = "<config>"

    def problem(self) -> Problem:
        return Problem(self.alpha, self.beta, self.f)


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """1-based line of every ``key`` inside every ``[section]``."""
    where: dict[tuple[str, str], int] = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
            where[(section, "")] = i
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), i)
    return where


def _floats(value: str, what: str, line: int | None) -> list[float]:
    try:
        out = [float(v) for v in value.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {value!r}", line) from None
    if not out:
        raise ConfigError(f"{what} must not be empty", line)
    return out


def _ints(value: str, what: str, line: int | None) -> list[int]:
    try:
        return [int(v) for v in value.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected integers, got {value!r}", line) from None


def _single_int(value: str, what: str, line: int | None, minimum: int) -> int:
    vals = _ints(value, what, line)
    if len(vals) != 1 or vals[0] < minimum:
        raise ConfigError(f"{what} must be one integer >= {minimum}", line)
    return vals[0]


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text.

    Raises:
        ConfigError: syntax error, unknown key, bad value or an expression
            that fails to parse; the message carries the line number.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, raw = exc.errors[0]
        raise ConfigError(f"cannot parse {raw.strip()!r}", lineno) from None
    lines = _line_index(text)

    def at(section, key=""):
        return lines.get((section, key))

    for section in cp.sections():
        allowed = SECTIONS.get(section.lower())
        if allowed is None:
            raise ConfigError(f"unknown section [{section}]", at(section.lower()))
        for key in cp[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]", at(section.lower(), key))
    if not cp.has_section("problem"):
        raise ConfigError("missing [problem] section")
    prob = cp["problem"]
    fields = {"alpha": None, "beta": None, "f": None}
    if "corpus" in prob:
        try:
            entry = corpus.get(prob["corpus"].strip())
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), at("problem", "corpus")) from None
        fields = {"alpha": entry.alpha, "beta": entry.beta, "f": entry.f}
        default_eps = list(entry.eps_list)
    else:
        default_eps = None
    for key in fields:
        if key in prob:
            fields[key] = prob[key].strip()
        if not fields[key]:
            raise ConfigError(f"[problem] needs {key} (or a corpus name)", at("problem"))
    try:
        Problem(**fields)
    except Sp4Error as exc:
        bad_key = next((k for k in ("alpha", "beta", "f") if k in prob and _fails(prob[k])), None)
        if bad_key is None:
            bad_key = next((k for k in ("alpha", "beta") if str(exc).startswith(k) and k in prob), None)
        raise ConfigError(str(exc), at("problem", bad_key) if bad_key else at("problem")) from None
    run = cp["run"] if cp.has_section("run") else {}
    if "eps_list" in run:
        eps = _floats(run["eps_list"], "eps_list", at("run", "eps_list"))
    elif default_eps is not None:
        eps = default_eps
    else:
        raise ConfigError("[run] needs eps_list", at("run"))
    for e in eps:
        if not 0.0 < e <= 1.0:
            raise ConfigError(f"eps {e:g} outside (0, 1]", at("run", "eps_list"))
    cfg = RunConfig(eps_list=eps, source=source, **fields)
    if "degrees" in run:
        cfg.degrees = _ints(run["degrees"], "degrees", at("run", "degrees"))
        if not cfg.degrees or min(cfg.degrees) < 3:
            raise ConfigError("degrees must be integers >= 3", at("run", "degrees"))
    if run.get("m_override", "").strip():
        cfg.M_override = _single_int(run["m_override"], "M_override", at("run", "m_override"), 0)
    if "output_dir" in run:
        cfg.output_dir = Path(run["output_dir"].strip())
    if "checks" in run:
        names = [c.strip() for c in run["checks"].split(",") if c.strip()]
        bad = [c for c in names if c not in CHECK_NAMES]
        if bad or not names:
            raise ConfigError(f"unknown checks {bad}; known: {', '.join(CHECK_NAMES)}", at("run", "checks"))
        cfg.checks = names
    for key, attr in (("n_max", "N"), ("m_cap", "M_cap")):
        if key in run:
            setattr(cfg, attr, _single_int(run[key], key, at("run", key), 1))
    if cp.has_section("tolerances"):
        for key, value in cp["tolerances"].items():
            vals = _floats(value, key, at("tolerances", key))
            if len(vals) != 1:
                raise ConfigError(f"{key} takes one number", at("tolerances", key))
            cfg.tolerances[key] = vals[0]
    return cfg


def _fails(expr: str) -> bool:
    try:
        parse(expr)
    except Sp4Error:
        return True
    return False


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
