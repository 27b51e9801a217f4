import math
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import structlog

from .errors import ChainFormatError, GrowthSpecError, UnmappedPointError
from .spaces import BallIndex, PointCode, Space, parse_space

log = structlog.get_logger()

Simplex = tuple[PointCode, ...]

MAX_DIMENSION = 2


class GrowthKind(str, Enum):
    CONST = "const"
    LINEAR = "linear"
    POWER = "power"
    LOG = "log"
    TABLE = "table"


@dataclass(frozen=True)
class GrowthFunction:
    """Control f with f(0) = 1, non-decreasing.

    const -> 1, linear -> t+1, power -> (t+1)^alpha, log -> 1 + ln(1+t),
    table -> user values held constant past the last entry.
    """

    kind: GrowthKind
    alpha: Fraction | None = None
    values: tuple[Fraction, ...] = ()

    def __post_init__(self):
        if self.kind == GrowthKind.POWER and (self.alpha is None or not 0 < self.alpha < 1):
            raise GrowthSpecError(f"power exponent must lie in (0, 1), got {self.alpha}")
        if self.kind == GrowthKind.TABLE:
            if not self.values or self.values[0] != 1:
                raise GrowthSpecError("table growth must start with f(0) = 1")
            if any(b < a for a, b in zip(self.values, self.values[1:])):
                raise GrowthSpecError("table growth must be non-decreasing")

    @property
    def exact(self) -> bool:
        """True when value() is the exact rational f(t)."""
        return self.kind in (GrowthKind.CONST, GrowthKind.LINEAR, GrowthKind.TABLE)

    @property
    def spec(self) -> str:
        if self.kind == GrowthKind.POWER:
            return f"power:{self.alpha}"
        if self.kind == GrowthKind.TABLE:
            return "table:" + ",".join(str(v) for v in self.values)
        return self.kind.value

    def value(self, t: int) -> Fraction:
        match self.kind:
            case GrowthKind.CONST:
                return Fraction(1)
            case GrowthKind.LINEAR:
                return Fraction(t + 1)
            case GrowthKind.TABLE:
                return self.values[min(t, len(self.values) - 1)]
            case GrowthKind.POWER:
                return Fraction((t + 1) ** float(self.alpha))
            case GrowthKind.LOG:
                return Fraction(1 + math.log1p(t))

    def __call__(self, t: float) -> float:
        match self.kind:
            case GrowthKind.CONST:
                return 1.0
            case GrowthKind.LINEAR:
                return t + 1.0
            case GrowthKind.TABLE:
                return float(self.values[min(int(t), len(self.values) - 1)])
            case GrowthKind.POWER:
                return (t + 1.0) ** float(self.alpha)
            case GrowthKind.LOG:
                return 1.0 + math.log1p(t)


CONST = GrowthFunction(GrowthKind.CONST)
LINEAR = GrowthFunction(GrowthKind.LINEAR)


def parse_growth(text: str) -> GrowthFunction:
    kind, _, arg = text.strip().partition(":")
    try:
        match kind:
            case "const" if not arg:
                return CONST
            case "linear" if not arg:
                return LINEAR
            case "log" if not arg:
                return GrowthFunction(GrowthKind.LOG)
            case "power" if arg:
                return GrowthFunction(GrowthKind.POWER, alpha=Fraction(arg))
            case "table" if arg:
                return GrowthFunction(GrowthKind.TABLE, values=tuple(Fraction(v) for v in arg.split(",")))
    except (ValueError, ZeroDivisionError) as e:
        raise GrowthSpecError(f"bad growth function {text!r}: {e}") from e
    raise GrowthSpecError(
        f"unknown growth function {text!r}; supported: const, linear, power:<alpha>, log, table:<v0>,<v1>,..."
    )


@dataclass
class GrowthDiagnostics:
    spec: str
    t_max: int
    shift_constants: dict[int, float] = field(default_factory=dict)
    dilation_constants: dict[int, float] = field(default_factory=dict)
    slow_growth_epsilon: float = 0.0


def growth_diagnostics(f: GrowthFunction, t_max: int, t0: int | None = None) -> GrowthDiagnostics:
    """Empirical L for f(t+K) <= L f(t) and f(Kt) <= L f(t), and eps(t0) = max f(t+1) - f(t)."""
    t0 = t_max // 2 if t0 is None else t0
    diag = GrowthDiagnostics(f.spec, t_max)
    ts = range(1, t_max + 1)
    for K in (1, 2):
        diag.shift_constants[K] = max(f(t + K) / f(t) for t in ts)
    for K in (2, 3):
        diag.dilation_constants[K] = max(f(K * t) / f(t) for t in ts)
    diag.slow_growth_epsilon = max((f(t + 1) - f(t) for t in range(t0, t_max + 1)), default=0.0)
    return diag


def orient(simplex: Iterable[PointCode]) -> tuple[Simplex, int] | None:
    """Sorted vertices and the permutation sign, or None for a degenerate simplex."""
    verts = tuple(simplex)
    if len(set(verts)) != len(verts):
        return None
    inversions = sum(1 for i in range(len(verts)) for j in range(i + 1, len(verts)) if verts[i] > verts[j])
    return tuple(sorted(verts)), -1 if inversions % 2 else 1


class Chain:
    """Sparse chain with exact rational coefficients on sorted simplices."""

    __slots__ = ("dimension", "_coefficients")

    def __init__(self, dimension: int, coefficients: Mapping[Simplex, Fraction] | None = None):
        if not 0 <= dimension <= MAX_DIMENSION:
            raise ValueError(f"chain dimension must be in 0..{MAX_DIMENSION}, got {dimension}")
        self.dimension = dimension
        self._coefficients: dict[Simplex, Fraction] = {}
        for simplex, value in (coefficients or {}).items():
            self._accumulate(simplex, Fraction(value))
        self._coefficients = {s: v for s, v in self._coefficients.items() if v}

    def _accumulate(self, simplex: Simplex, value: Fraction) -> bool:
        if len(simplex) != self.dimension + 1:
            raise ValueError(f"simplex with {len(simplex)} vertices in a {self.dimension}-chain")
        oriented = orient(simplex)
        if oriented is None:
            return False
        key, sign = oriented
        self._coefficients[key] = self._coefficients.get(key, Fraction(0)) + sign * value
        return True

    @classmethod
    def from_terms(cls, dimension: int, terms: Iterable[tuple[Simplex, Fraction]]) -> "Chain":
        chain = cls(dimension)
        for simplex, value in terms:
            chain._accumulate(tuple(simplex), Fraction(value))
        chain._coefficients = {s: v for s, v in chain._coefficients.items() if v}
        return chain

    @classmethod
    def zero_chain(cls, values: Mapping[PointCode, Fraction]) -> "Chain":
        return cls.from_terms(0, (((p,), v) for p, v in values.items()))

    def items(self):
        return self._coefficients.items()

    def simplices(self):
        return self._coefficients.keys()

    def __len__(self) -> int:
        return len(self._coefficients)

    def __bool__(self) -> bool:
        return bool(self._coefficients)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Chain):
            return NotImplemented
        return self.dimension == other.dimension and self._coefficients == other._coefficients

    def __hash__(self):
        return hash((self.dimension, frozenset(self._coefficients.items())))

    def __repr__(self) -> str:
        return f"Chain(dim={self.dimension}, terms={len(self)})"

    def coefficient(self, simplex: Simplex) -> Fraction:
        """Coefficient on an oriented simplex, sign-adjusted."""
        oriented = orient(simplex)
        if oriented is None:
            return Fraction(0)
        key, sign = oriented
        return sign * self._coefficients.get(key, Fraction(0))

    def value(self, p: PointCode) -> Fraction:
        if self.dimension != 0:
            raise ValueError("value() is defined on 0-chains")
        return self._coefficients.get((p,), Fraction(0))

    def support(self) -> set[PointCode]:
        return {p for s in self._coefficients for p in s}

    def _combine(self, other: "Chain", sign: int) -> "Chain":
        if self.dimension != other.dimension:
            raise ValueError(f"cannot combine {self.dimension}-chain with {other.dimension}-chain")
        out = dict(self._coefficients)
        for s, v in other._coefficients.items():
            out[s] = out.get(s, Fraction(0)) + sign * v
        return Chain._normalized(self.dimension, out)

    def __add__(self, other: "Chain") -> "Chain":
        return self._combine(other, 1)

    def __sub__(self, other: "Chain") -> "Chain":
        return self._combine(other, -1)

    def __neg__(self) -> "Chain":
        return self.scale(-1)

    def scale(self, factor) -> "Chain":
        factor = Fraction(factor)
        return Chain._normalized(self.dimension, {s: factor * v for s, v in self._coefficients.items()})

    def map_coefficients(self, fn: Callable[[Simplex, Fraction], Fraction]) -> "Chain":
        return Chain._normalized(self.dimension, {s: Fraction(fn(s, v)) for s, v in self._coefficients.items()})

    @classmethod
    def _normalized(cls, dimension: int, coefficients: dict[Simplex, Fraction]) -> "Chain":
        # keys already sorted and non-degenerate
        chain = cls(dimension)
        chain._coefficients = {s: v for s, v in coefficients.items() if v}
        return chain


def boundary(c: Chain, ball: BallIndex) -> Chain:
    """Alternating-face boundary, d[x0,...,xn] = sum (-1)^i [x0,..,^xi,..,xn]."""
    if c.dimension < 1:
        raise ValueError("boundary needs a chain of dimension >= 1")
    out: dict[Simplex, Fraction] = {}
    for simplex, v in c.items():
        for p in simplex:
            ball.idx(p)
        for i in range(len(simplex)):
            face = simplex[:i] + simplex[i + 1:]
            out[face] = out.get(face, Fraction(0)) + (v if i % 2 == 0 else -v)
    return Chain._normalized(c.dimension - 1, out)


def propagation(c: Chain, ball: BallIndex) -> int:
    if c.dimension < 1:
        raise ValueError("propagation is defined for chains of dimension >= 1")
    return max(
        (ball.distance(s[i], s[j]) for s in c.simplices() for i in range(len(s)) for j in range(i + 1, len(s))),
        default=0,
    )


def growth_constant(c: Chain, f: GrowthFunction, ball: BallIndex) -> Fraction:
    """K_c = max |c_x| / f(|x|)."""
    best = Fraction(0)
    for simplex, v in c.items():
        ratio = abs(v) / f.value(max(ball.length(p) for p in simplex))
        if ratio > best:
            best = ratio
    return best


@dataclass
class PushforwardResult:
    chain: Chain
    degenerate_dropped: int = 0


def pushforward(
    c: Chain,
    point_map: Mapping[PointCode, PointCode] | Callable[[PointCode], PointCode],
    target_ball: BallIndex,
) -> PushforwardResult:
    lookup = point_map.get if isinstance(point_map, Mapping) else point_map
    out = Chain(c.dimension)
    dropped = 0
    for simplex, v in c.items():
        image = []
        for p in simplex:
            q = lookup(p)
            if q is None:
                raise UnmappedPointError(f"point {p.hex()} has no image under the map")
            target_ball.idx(q)
            image.append(q)
        if not out._accumulate(tuple(image), v):
            dropped += 1
    out._coefficients = {s: v for s, v in out._coefficients.items() if v}
    if dropped:
        log.debug("pushforward_degenerate", dropped=dropped)
    return PushforwardResult(out, dropped)


@dataclass
class ChainDump:
    space: Space
    chain: Chain
    radius: int | None = None


def format_chain(c: Chain, space: Space, radius: int | None = None) -> str:
    header = f"#space={space.spec} dim={c.dimension}"
    if radius is not None:
        header += f" radius={radius}"
    lines = [header]
    for simplex in sorted(c.simplices()):
        v = c.coefficient(simplex)
        pts = " ".join(space.format_point(p) for p in simplex)
        lines.append(f"{pts} {v.numerator}/{v.denominator}")
    return "\n".join(lines) + "\n"


def parse_chain(text: str, space: Space | None = None) -> ChainDump:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ChainFormatError("chain dump must start with a '#space=... dim=...' header")
    header = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    try:
        dimension = int(header["dim"])
        radius = int(header["radius"]) if "radius" in header else None
    except (KeyError, ValueError) as e:
        raise ChainFormatError(f"bad chain header {lines[0]!r}") from e
    space = space or parse_space(header.get("space", ""))
    terms = []
    for lineno, ln in enumerate(lines[1:], start=2):
        tokens = ln.split()
        if len(tokens) != dimension + 2:
            raise ChainFormatError(f"line {lineno}: expected {dimension + 1} points and a coefficient")
        try:
            value = Fraction(tokens[-1])
        except (ValueError, ZeroDivisionError) as e:
            raise ChainFormatError(f"line {lineno}: bad coefficient {tokens[-1]!r}") from e
        terms.append((tuple(space.parse_point(t) for t in tokens[:-1]), value))
    return ChainDump(space, Chain.from_terms(dimension, terms), radius)
