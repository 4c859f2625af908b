"""Reader for the plain-text network description format.

Layout (``#`` starts a comment, SI units throughout)::

    [nodes]
    in sw out                      # names; ground is 0 or gnd

    [sources]
    vin  V  in 0  dc 50            rs=1e-3
    va   V  a  0  sine amp=326.6 freq=50 phase=0  rs=0.01
    i1   I  0  n1 dc 2

    [branches]
    L1  L  sw  out  1e-3
    C1  C  out 0    100e-6
    R1  R  out 0    10

    [switches]
    gate pwm  duty freq=1000 duty=0.8
    gate ga   sine-triangle carrier=2500 ref=50 m=0.9 phase=0
    S1  in sw pwm
    S2  sw 0  pwm complement
    y_sw = lc L1 C1                # or a number in siemens
    alpha_on = -2.414213562373095  # optional overrides

    [simulation]
    dt = 25e-6
    t_end = 0.01
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

from .emtp import (
    DEFAULT_SOURCE_RESISTANCE, Branch, BranchKind, DutyCyclePwm, FasmParams, NetworkModel,
    SineTrianglePwm, SourceFunction,
)
from .errors import ConfigError, InvalidParameterError

__all__ = ["parse_network", "load_network", "bundled_config", "BUNDLED"]

SECTIONS = ("nodes", "sources", "branches", "switches", "simulation")
GROUND_NAMES = ("0", "gnd", "ground")
BUNDLED = ("buck.cfg", "bridge3ph.cfg")


def _number(text: str, line: int, path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line, path) from None
    if not math.isfinite(value):
        raise ConfigError(f"non-finite number {text!r}", line, path)
    return value


def _options(tokens: list[str], line: int, path) -> tuple[list[str], dict[str, str]]:
    plain, opts = [], {}
    for tok in tokens:
        if "=" in tok:
            key, _, val = tok.partition("=")
            if not key or not val:
                raise ConfigError(f"malformed option {tok!r}", line, path)
            opts[key] = val
        else:
            plain.append(tok)
    return plain, opts


class _Parser:
    def __init__(self, text: str, path):
        self.path = str(path) if path is not None else None
        self.nodes: list[str] = []
        self.index: dict[str, int] = {g: 0 for g in GROUND_NAMES}
        self.branches: list[Branch] = []
        self.gates = {}
        self.switch_lines: list[tuple[int, list[str]]] = []
        self.fasm_opts: dict[str, tuple[int, str]] = {}
        self.settings: dict[str, object] = {}
        self.text = text

    def error(self, msg, line):
        return ConfigError(msg, line, self.path)

    def node(self, name: str, line: int) -> int:
        if name not in self.index:
            raise self.error(f"unknown node {name!r}", line)
        return self.index[name]

    def parse(self) -> NetworkModel:
        section = None
        seen = set()
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            body = raw.split("#", 1)[0].strip()
            if not body:
                continue
            if body.startswith("["):
                if not body.endswith("]"):
                    raise self.error(f"malformed section header {body!r}", lineno)
                section = body[1:-1].strip().lower()
                if section not in SECTIONS:
                    raise self.error(f"unknown section [{section}]", lineno)
                if section in seen:
                    raise self.error(f"duplicate section [{section}]", lineno)
                seen.add(section)
                continue
            if section is None:
                raise self.error("content before the first section header", lineno)
            getattr(self, f"_{section}")(body, lineno)
        if not self.nodes:
            raise self.error("no [nodes] declared", None)
        self._finish_switches()
        try:
            return NetworkModel(tuple(self.nodes), tuple(self.branches), self.gates,
                                self._fasm(), self.settings)
        except InvalidParameterError as exc:
            raise self.error(str(exc), None) from None

    def _nodes(self, body, lineno):
        for name in body.split():
            if name in self.index:
                raise self.error(f"node {name!r} declared twice or reserved", lineno)
            self.nodes.append(name)
            self.index[name] = len(self.nodes)

    def _sources(self, body, lineno):
        plain, opts = _options(body.split(), lineno, self.path)
        if len(plain) < 5:
            raise self.error("source line needs: id type from to waveform [value]", lineno)
        bid, kind, a, b, shape = plain[:5]
        kind = kind.upper()
        if kind not in ("V", "I"):
            raise self.error(f"source type must be V or I, got {kind!r}", lineno)
        shape = shape.lower()
        if shape == "dc":
            if len(plain) != 6:
                raise self.error("dc source needs exactly one value", lineno)
            fn = SourceFunction("dc", _number(plain[5], lineno, self.path))
        elif shape == "sine":
            need = {"amp", "freq"}
            if not need <= opts.keys():
                raise self.error("sine source needs amp= and freq=", lineno)
            fn = SourceFunction("sine", _number(opts["amp"], lineno, self.path),
                                _number(opts["freq"], lineno, self.path),
                                _number(opts.get("phase", "0"), lineno, self.path))
        else:
            raise self.error(f"unknown waveform {shape!r}", lineno)
        rs = _number(opts.get("rs", repr(DEFAULT_SOURCE_RESISTANCE)), lineno, self.path)
        value = rs if kind == "V" else 0.0
        self._add(bid, kind, a, b, value, lineno, source=fn)

    def _branches(self, body, lineno):
        parts = body.split()
        if len(parts) != 5:
            raise self.error("branch line needs: id kind from to value", lineno)
        bid, kind, a, b, value = parts
        kind = kind.upper()
        if kind not in ("R", "L", "C"):
            raise self.error(f"branch kind must be R, L or C, got {kind!r}", lineno)
        self._add(bid, kind, a, b, _number(value, lineno, self.path), lineno)

    def _add(self, bid, kind, a, b, value, lineno, **extra):
        if any(br.id == bid for br in self.branches):
            raise self.error(f"duplicate branch id {bid!r}", lineno)
        try:
            self.branches.append(Branch(bid, BranchKind(kind), self.node(a, lineno),
                                        self.node(b, lineno), value, **extra))
        except InvalidParameterError as exc:
            raise self.error(str(exc), lineno) from None

    def _switches(self, body, lineno):
        if "=" in body and not body.startswith("gate"):
            key, _, val = (s.strip() for s in body.partition("="))
            if key not in ("y_sw", "alpha_on", "beta_off"):
                raise self.error(f"unknown switch setting {key!r}", lineno)
            self.fasm_opts[key] = (lineno, val)
            return
        parts = body.split()
        if parts[0] == "gate":
            self._gate(parts[1:], lineno)
        else:
            self.switch_lines.append((lineno, parts))

    def _gate(self, parts, lineno):
        plain, opts = _options(parts, lineno, self.path)
        if len(plain) != 2:
            raise self.error("gate line needs: gate name scheme key=value...", lineno)
        name, scheme = plain
        num = {k: _number(v, lineno, self.path) for k, v in opts.items()}
        try:
            if scheme == "duty":
                self.gates[name] = DutyCyclePwm(num["freq"], num["duty"], num.get("phase", 0.0))
            elif scheme == "sine-triangle":
                self.gates[name] = SineTrianglePwm(num["carrier"], num["ref"], num["m"], num.get("phase", 0.0))
            else:
                raise self.error(f"unknown gate scheme {scheme!r}", lineno)
        except KeyError as exc:
            raise self.error(f"gate {name} is missing {exc.args[0]}=", lineno) from None
        except InvalidParameterError as exc:
            raise self.error(str(exc), lineno) from None

    def _finish_switches(self):
        for lineno, parts in self.switch_lines:
            if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] != "complement"):
                raise self.error("switch line needs: id from to gate [complement]", lineno)
            bid, a, b, gate = parts[:4]
            if gate not in self.gates:
                raise self.error(f"undefined gate {gate!r}", lineno)
            self._add(bid, "SW", a, b, 0.0, lineno, control=gate, complement=len(parts) == 5)

    def _fasm(self) -> FasmParams | None:
        if not self.switch_lines:
            return None
        y_sw = 1.0
        if "y_sw" in self.fasm_opts:
            lineno, text = self.fasm_opts["y_sw"]
            parts = text.split()
            if parts[0] == "lc":
                if len(parts) != 3:
                    raise self.error("y_sw = lc <inductor id> <capacitor id>", lineno)
                try:
                    ind = next(b for b in self.branches if b.id == parts[1] and b.kind is BranchKind.INDUCTOR)
                    cap = next(b for b in self.branches if b.id == parts[2] and b.kind is BranchKind.CAPACITOR)
                except StopIteration:
                    raise self.error("y_sw = lc needs an inductor id then a capacitor id", lineno) from None
                y_sw = math.sqrt(cap.value / ind.value)
            else:
                y_sw = _number(text, lineno, self.path)
        base = FasmParams.damped(1.0)
        alpha_on, beta_off = base.alpha_on, base.beta_off
        if "alpha_on" in self.fasm_opts:
            alpha_on = _number(self.fasm_opts["alpha_on"][1], self.fasm_opts["alpha_on"][0], self.path)
        if "beta_off" in self.fasm_opts:
            beta_off = _number(self.fasm_opts["beta_off"][1], self.fasm_opts["beta_off"][0], self.path)
        try:
            return FasmParams(alpha_on, -1.0, 1.0, beta_off, y_sw)
        except InvalidParameterError as exc:
            raise self.error(str(exc), self.fasm_opts.get("y_sw", (None,))[0]) from None

    def _simulation(self, body, lineno):
        key, sep, val = (s.strip() for s in body.partition("="))
        if not sep or not key or not val:
            raise self.error("simulation lines are key = value", lineno)
        if key in ("layers", "seed", "max_rounds", "max_iterations"):
            try:
                self.settings[key] = int(val)
            except ValueError:
                raise self.error(f"{key} must be an integer", lineno) from None
        else:
            self.settings[key] = _number(val, lineno, self.path)
        positive = ("dt", "t_end", "eps", "layers")
        if key in positive and not self.settings[key] > 0:
            raise self.error(f"{key} must be positive", lineno)


def parse_network(text: str, path=None) -> NetworkModel:
    return _Parser(text, path).parse()


def load_network(path) -> NetworkModel:
    """Parse a config file; bare bundled names such as ``buck.cfg`` also resolve."""
    p = Path(path)
    if not p.exists() and p.name == str(path) and p.name in BUNDLED:
        return parse_network(bundled_config(p.name), p.name)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_network(text, str(path))


def bundled_config(name: str) -> str:
    return resources.files("qemtp").joinpath("data", name).read_text()
