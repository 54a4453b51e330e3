"""Plain-text run configuration: parsing, validation, emission, builders.

Format: `[section]` headers, `key = value` lines, `#` comments.  Values
are numbers, double-quoted expression strings, or parenthesized tuples of
those.  The `history` key (problem section) and `segment` key (candidate
section) may repeat; each holds `(t_start, t_end, "expr1", ...)` with one
expression per component.  Everything else appears at most once.

Parsing and emission round-trip: `parse_config(cfg.emit()) == cfg`, with
analysis defaults filled in so a report always echoes the exact settings
it ran with.
"""

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .analysis import AnalysisSettings
from .exprs import ExprError, parse_expr, parse_lagrangian
from .problem import CandidateExtremal, DelayProblem
from .trajectory import HistorySpec, Trajectory


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>",
                 line: Optional[int] = None, column: Optional[int] = None):
        prefix = source
        if line is not None:
            prefix += f":{line}"
            if column is not None:
                prefix += f":{column}"
        super().__init__(f"{prefix}: {message}")
        self.source = source
        self.line = line
        self.column = column


Value = Union[float, str, Tuple["Value", ...]]


@dataclass(frozen=True)
class SegmentSpec:
    t_start: float
    t_end: float
    exprs: Tuple[str, ...]


@dataclass(frozen=True)
class ProblemConfig:
    t0: float
    t1: float
    h: float
    dim: int
    lagrangian: str
    x1: Tuple[float, ...]
    history: Tuple[SegmentSpec, ...]


@dataclass(frozen=True)
class CandidateConfig:
    segments: Tuple[SegmentSpec, ...]


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    candidate: CandidateConfig
    analysis: AnalysisSettings

    def emit(self) -> str:
        """Canonical text form; `parse_config(cfg.emit()) == cfg`."""
        out = ["[problem]"]
        pc = self.problem
        out.append(f"t0 = {_fmt(pc.t0)}")
        out.append(f"t1 = {_fmt(pc.t1)}")
        out.append(f"h = {_fmt(pc.h)}")
        out.append(f"dim = {pc.dim}")
        out.append(f"lagrangian = \"{pc.lagrangian}\"")
        out.append(f"x1 = {_fmt_tuple(pc.x1)}")
        for seg in pc.history:
            out.append(f"history = {_fmt_segment(seg)}")
        out.append("")
        out.append("[candidate]")
        for seg in self.candidate.segments:
            out.append(f"segment = {_fmt_segment(seg)}")
        out.append("")
        out.append("[analysis]")
        a = self.analysis
        out.append(f"euler_grid = {a.euler_grid}")
        out.append(f"scan_grid = {a.scan_grid}")
        out.append(f"degeneracy_grid = {a.degeneracy_grid}")
        out.append(f"interval_points = {a.interval_points}")
        out.append(f"radii = {_fmt_tuple(a.radii)}")
        out.append(f"lambdas = {_fmt_tuple(a.lambdas)}")
        out.append(f"scales = {_fmt_tuple(a.scales)}")
        if a.tol_w is not None:
            out.append(f"tol_w = {_fmt(a.tol_w)}")
        if a.tol_deg is not None:
            out.append(f"tol_deg = {_fmt(a.tol_deg)}")
        if a.tol_eq is not None:
            out.append(f"tol_eq = {_fmt(a.tol_eq)}")
        out.append(f"tol_euler = {_fmt(a.tol_euler)}")
        out.append(f"sweep_levels = {a.sweep_levels}")
        out.append(f"sweep_ratio = {_fmt(a.sweep_ratio)}")
        if a.quad_order is not None:
            out.append(f"quad_order = {a.quad_order}")
        out.append(f"seed = {a.seed}")
        out.append("")
        return "\n".join(out)


def _fmt(v: float) -> str:
    return repr(float(v))


def _fmt_tuple(vals: Sequence[float]) -> str:
    return "(" + ", ".join(_fmt(v) for v in vals) + ")"


def _fmt_segment(seg: SegmentSpec) -> str:
    parts = [_fmt(seg.t_start), _fmt(seg.t_end)]
    parts.extend(f"\"{e}\"" for e in seg.exprs)
    return "(" + ", ".join(parts) + ")"


# ---------------------------------------------------------------------------
# value parsing

_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


class _ValueParser:
    def __init__(self, text: str, source: str, line: int, col0: int):
        self.text = text
        self.i = 0
        self.source = source
        self.line = line
        self.col0 = col0

    def error(self, message: str) -> ConfigError:
        return ConfigError(message, self.source, self.line, self.col0 + self.i)

    def _skip_ws(self) -> None:
        while self.i < len(self.text) and self.text[self.i] in " \t":
            self.i += 1

    def _peek(self) -> str:
        return self.text[self.i] if self.i < len(self.text) else ""

    def parse(self) -> Value:
        self._skip_ws()
        v = self._value()
        self._skip_ws()
        if self.i != len(self.text):
            raise self.error(f"trailing characters after value: "
                             f"{self.text[self.i:]!r}")
        return v

    def _value(self) -> Value:
        self._skip_ws()
        c = self._peek()
        if c == "(":
            return self._tuple()
        if c == "\"":
            return self._string()
        if c == "":
            raise self.error("missing value")
        return self._number()

    def _tuple(self) -> Tuple[Value, ...]:
        self.i += 1
        items: List[Value] = []
        while True:
            self._skip_ws()
            if self._peek() == ")":
                self.i += 1
                return tuple(items)
            if self._peek() == "":
                raise self.error("unclosed '(' in value")
            items.append(self._value())
            self._skip_ws()
            if self._peek() == ",":
                self.i += 1
                continue
            if self._peek() == ")":
                self.i += 1
                return tuple(items)
            raise self.error("expected ',' or ')' in tuple")

    def _string(self) -> str:
        self.i += 1
        end = self.text.find("\"", self.i)
        if end < 0:
            raise self.error("unterminated string")
        s = self.text[self.i:end]
        self.i = end + 1
        return s

    def _number(self) -> float:
        m = _NUMBER_RE.match(self.text, self.i)
        if not m:
            raise self.error(f"expected a number, string or tuple, got "
                             f"{self.text[self.i:].split()[0]!r}")
        self.i = m.end()
        return float(m.group(0))


def _strip_comment(line: str) -> str:
    in_string = False
    for i, c in enumerate(line):
        if c == "\"":
            in_string = not in_string
        elif c == "#" and not in_string:
            return line[:i]
    return line


# ---------------------------------------------------------------------------
# key catalogs

_PROBLEM_KEYS = ("t0", "t1", "h", "dim", "lagrangian", "x1", "history")
_CANDIDATE_KEYS = ("segment",)
_ANALYSIS_INT_KEYS = ("euler_grid", "scan_grid", "degeneracy_grid",
                      "interval_points", "sweep_levels", "quad_order", "seed")
_ANALYSIS_FLOAT_KEYS = ("tol_w", "tol_deg", "tol_eq", "tol_euler",
                        "sweep_ratio")
_ANALYSIS_TUPLE_KEYS = ("radii", "lambdas", "scales")
_REPEATABLE = {("problem", "history"), ("candidate", "segment")}


def _as_int(value: Value, key: str, err) -> int:
    if not isinstance(value, float) or value != int(value):
        raise err(f"key '{key}' expects an integer")
    return int(value)


def _as_float(value: Value, key: str, err) -> float:
    if not isinstance(value, float):
        raise err(f"key '{key}' expects a number")
    return float(value)


def _as_string(value: Value, key: str, err) -> str:
    if not isinstance(value, str):
        raise err(f"key '{key}' expects a quoted string")
    return value


def _as_float_tuple(value: Value, key: str, err) -> Tuple[float, ...]:
    if isinstance(value, float):
        return (value,)
    if isinstance(value, tuple) and value \
            and all(isinstance(v, float) for v in value):
        return tuple(float(v) for v in value)
    raise err(f"key '{key}' expects a nonempty tuple of numbers")


def _as_segment(value: Value, key: str, err) -> SegmentSpec:
    if not isinstance(value, tuple) or len(value) < 3:
        raise err(f"key '{key}' expects (t_start, t_end, \"expr\", ...)")
    start, end = value[0], value[1]
    if not isinstance(start, float) or not isinstance(end, float):
        raise err(f"key '{key}': first two entries must be numbers")
    comps = value[2:]
    if not all(isinstance(c, str) for c in comps):
        raise err(f"key '{key}': components must be quoted expressions")
    return SegmentSpec(t_start=float(start), t_end=float(end),
                       exprs=tuple(comps))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate; errors carry source:line:column."""
    section = None
    seen: Dict[Tuple[str, str], int] = {}
    values: Dict[Tuple[str, str], Value] = {}
    repeated: Dict[Tuple[str, str], List[Tuple[Value, int]]] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("malformed section header", source, line_no,
                                  raw.index("[") + 1)
            name = stripped[1:-1].strip()
            if name not in ("problem", "candidate", "analysis"):
                raise ConfigError(f"unknown section [{name}]", source, line_no, 1)
            section = name
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", source, line_no, 1)
        if section is None:
            raise ConfigError("key outside any [section]", source, line_no, 1)
        key_part, _, value_part = line.partition("=")
        key = key_part.strip()
        col0 = len(key_part) + 2
        known = {"problem": _PROBLEM_KEYS, "candidate": _CANDIDATE_KEYS,
                 "analysis": _ANALYSIS_INT_KEYS + _ANALYSIS_FLOAT_KEYS
                 + _ANALYSIS_TUPLE_KEYS}[section]
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in [{section}]",
                              source, line_no, 1)
        value = _ValueParser(value_part, source, line_no, col0).parse()
        slot = (section, key)
        if slot in _REPEATABLE:
            repeated.setdefault(slot, []).append((value, line_no))
        else:
            if slot in seen:
                raise ConfigError(
                    f"duplicate key '{key}' in [{section}] "
                    f"(first at line {seen[slot]})", source, line_no, 1)
            seen[slot] = line_no
            values[slot] = value

    def missing(sec: str, key: str) -> ConfigError:
        return ConfigError(f"[{sec}] missing required key '{key}'", source)

    def key_err(sec: str, key: str):
        line = seen.get((sec, key))

        def make(msg: str) -> ConfigError:
            return ConfigError(msg, source, line)
        return make

    # problem section
    for key in ("t0", "t1", "h", "dim", "lagrangian", "x1"):
        if ("problem", key) not in values:
            raise missing("problem", key)
    if ("problem", "history") not in repeated:
        raise missing("problem", "history")
    perr = lambda key: key_err("problem", key)
    t0 = _as_float(values[("problem", "t0")], "t0", perr("t0"))
    t1 = _as_float(values[("problem", "t1")], "t1", perr("t1"))
    h = _as_float(values[("problem", "h")], "h", perr("h"))
    dim = _as_int(values[("problem", "dim")], "dim", perr("dim"))
    lagrangian = _as_string(values[("problem", "lagrangian")], "lagrangian",
                            perr("lagrangian"))
    x1 = _as_float_tuple(values[("problem", "x1")], "x1", perr("x1"))
    history = tuple(
        _as_segment(v, "history",
                    lambda m, ln=ln: ConfigError(m, source, ln))
        for v, ln in repeated[("problem", "history")])

    if h <= 0:
        raise ConfigError(f"h must be positive, got {h}", source,
                          seen[("problem", "h")])
    if not t1 - t0 > h:
        raise ConfigError(
            f"t1 - t0 must exceed h, got t1-t0={t1 - t0}, h={h}", source,
            seen[("problem", "h")])
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}", source,
                          seen[("problem", "dim")])
    if len(x1) != dim:
        raise ConfigError(
            f"x1 has {len(x1)} components, expected dim={dim}", source,
            seen[("problem", "x1")])
    try:
        parse_lagrangian(lagrangian, dim)
    except ExprError as exc:
        raise ConfigError(f"key 'lagrangian': {exc}", source,
                          seen[("problem", "lagrangian")]) from exc
    for spec, (_, ln) in zip(history, repeated[("problem", "history")]):
        _check_segment_spec(spec, dim, "history", source, ln)

    # candidate section
    if ("candidate", "segment") not in repeated:
        raise missing("candidate", "segment")
    segments = tuple(
        _as_segment(v, "segment",
                    lambda m, ln=ln: ConfigError(m, source, ln))
        for v, ln in repeated[("candidate", "segment")])
    for spec, (_, ln) in zip(segments, repeated[("candidate", "segment")]):
        _check_segment_spec(spec, dim, "segment", source, ln)

    # analysis section (defaults filled from AnalysisSettings)
    kwargs = {}
    for key in _ANALYSIS_INT_KEYS:
        if ("analysis", key) in values:
            kwargs[key] = _as_int(values[("analysis", key)], key,
                                  key_err("analysis", key))
    for key in _ANALYSIS_FLOAT_KEYS:
        if ("analysis", key) in values:
            kwargs[key] = _as_float(values[("analysis", key)], key,
                                    key_err("analysis", key))
    for key in _ANALYSIS_TUPLE_KEYS:
        if ("analysis", key) in values:
            kwargs[key] = _as_float_tuple(values[("analysis", key)], key,
                                          key_err("analysis", key))
    analysis = AnalysisSettings(**kwargs)
    _check_analysis(analysis, source, seen)

    return RunConfig(
        problem=ProblemConfig(t0=t0, t1=t1, h=h, dim=dim,
                              lagrangian=lagrangian, x1=x1, history=history),
        candidate=CandidateConfig(segments=segments),
        analysis=analysis)


def _check_segment_spec(spec: SegmentSpec, dim: int, key: str, source: str,
                        line: int) -> None:
    if spec.t_end <= spec.t_start:
        raise ConfigError(
            f"key '{key}': t_end must exceed t_start, got "
            f"({spec.t_start}, {spec.t_end})", source, line)
    if len(spec.exprs) != dim:
        raise ConfigError(
            f"key '{key}': {len(spec.exprs)} component expressions, "
            f"expected dim={dim}", source, line)
    for e in spec.exprs:
        try:
            parse_expr(e, ("t",))
        except ExprError as exc:
            raise ConfigError(f"key '{key}': {exc}", source, line) from exc


def _check_analysis(a: AnalysisSettings, source: str,
                    seen: Dict[Tuple[str, str], int]) -> None:
    def err(key: str, msg: str) -> ConfigError:
        return ConfigError(f"key '{key}': {msg}", source,
                           seen.get(("analysis", key)))

    for key in ("euler_grid", "scan_grid", "degeneracy_grid"):
        if getattr(a, key) < 1:
            raise err(key, "grid size must be >= 1")
    if a.interval_points < 3:
        raise err("interval_points", "must be >= 3")
    for key in ("tol_w", "tol_deg", "tol_eq"):
        v = getattr(a, key)
        if v is not None and v <= 0:
            raise err(key, "tolerance must be positive")
    if a.tol_euler <= 0:
        raise err("tol_euler", "tolerance must be positive")
    if a.sweep_levels < 4:
        raise err("sweep_levels", "must be >= 4")
    if not 0.0 < a.sweep_ratio < 1.0:
        raise err("sweep_ratio", "must be inside (0, 1)")
    if a.quad_order is not None and a.quad_order < 1:
        raise err("quad_order", "must be >= 1")
    if not all(r > 0 for r in a.radii):
        raise err("radii", "must all be positive")
    if not all(0.0 < l < 1.0 for l in a.lambdas):
        raise err("lambdas", "must all be inside (0, 1)")
    if not all(s > 0 for s in a.scales):
        raise err("scales", "must all be positive")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config(text, source=str(path))


# ---------------------------------------------------------------------------
# builders

def build_problem(cfg: RunConfig) -> DelayProblem:
    pc = cfg.problem
    lag = parse_lagrangian(pc.lagrangian, pc.dim)
    phi = Trajectory.from_segments(
        [(s.t_start, s.t_end, list(s.exprs)) for s in pc.history])
    hist = HistorySpec(phi=phi, x1=np.asarray(pc.x1, dtype=float))
    return DelayProblem(t0=pc.t0, t1=pc.t1, h=pc.h, dim=pc.dim,
                        lagrangian=lag, hist=hist)


def build_candidate(cfg: RunConfig, p: DelayProblem) -> CandidateExtremal:
    interior = Trajectory.from_segments(
        [(s.t_start, s.t_end, list(s.exprs)) for s in cfg.candidate.segments])
    return CandidateExtremal.from_interior(p, interior)
