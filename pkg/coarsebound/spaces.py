import math
import struct
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import structlog

from . import metrics
from .config import get_settings
from .errors import (
    BallSizeError,
    CapabilityError,
    NotOnLineError,
    PointOutsideBallError,
    SpaceSpecError,
)

log = structlog.get_logger()

PointCode = bytes

SUPPORTED_SPECS = ("zd:<d>", "free:<k>", "heis", "lamp:<d>", "bs:1:<n>", "lumberjack[:slope=<s>]")

_Q = struct.Struct(">q")


def _pack_ints(values) -> bytes:
    return struct.pack(f">{len(values)}q", *values)


def _unpack_ints(code: bytes) -> tuple[int, ...]:
    if len(code) % _Q.size:
        raise SpaceSpecError(f"malformed point code of {len(code)} bytes")
    return struct.unpack(f">{len(code) // _Q.size}q", code)


def _parse_int_list(text: str, sep: str = ",") -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(sep))
    except ValueError as e:
        raise SpaceSpecError(f"cannot parse point {text!r}: {e}") from e


@dataclass(frozen=True)
class Capabilities:
    has_geodesic_oracle: bool
    is_group: bool


class Space(ABC):
    """A bounded-geometry graph with integer unit steps and a basepoint."""

    spec: str
    generator_count: int
    basepoint: PointCode
    capabilities: Capabilities

    @abstractmethod
    def neighbors(self, p: PointCode) -> list[PointCode]: ...

    @abstractmethod
    def format_point(self, p: PointCode) -> str: ...

    @abstractmethod
    def parse_point(self, text: str) -> PointCode: ...

    @abstractmethod
    def box_norm(self, p: PointCode) -> int:
        """Coordinate sup-norm used to build sublevel candidate sets."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec!r})"


class GroupSpace(Space):
    """Cayley graph of a group with right multiplication by generators.

    Generator index 0 is the designated axis generator `a`, index 1 its inverse.
    """

    generator_names: tuple[str, ...]

    @abstractmethod
    def _decode(self, code: PointCode) -> tuple: ...

    @abstractmethod
    def _encode(self, t: tuple) -> PointCode: ...

    @abstractmethod
    def _step(self, t: tuple, g: int) -> tuple: ...

    @abstractmethod
    def _multiply(self, s: tuple, t: tuple) -> tuple: ...

    @abstractmethod
    def _inverse(self, t: tuple) -> tuple: ...

    @abstractmethod
    def _axis_candidate(self, t: tuple) -> int | None:
        """The only n for which t could equal a^n."""

    def neighbors(self, p: PointCode) -> list[PointCode]:
        t = self._decode(p)
        return [self._encode(self._step(t, g)) for g in range(self.generator_count)]

    def step(self, p: PointCode, g: int) -> PointCode:
        return self._encode(self._step(self._decode(p), g))

    def multiply(self, p: PointCode, q: PointCode) -> PointCode:
        return self._encode(self._multiply(self._decode(p), self._decode(q)))

    def inverse(self, p: PointCode) -> PointCode:
        return self._encode(self._inverse(self._decode(p)))

    def generator_index(self, name: str) -> int:
        try:
            return self.generator_names.index(name)
        except ValueError:
            raise SpaceSpecError(
                f"unknown generator {name!r} for {self.spec}; expected one of {', '.join(self.generator_names)}"
            ) from None

    def axis_point(self, base: PointCode, n: int) -> PointCode:
        t = self._decode(base)
        g = 0 if n >= 0 else 1
        for _ in range(abs(n)):
            t = self._step(t, g)
        return self._encode(t)

    def axis_offset(self, p: PointCode, q: PointCode) -> int | None:
        """m with q = p·a^m, or None when q is not on the axis coset of p."""
        t = self._multiply(self._inverse(self._decode(p)), self._decode(q))
        n = self._axis_candidate(t)
        if n is None:
            return None
        return n if self.axis_point(self.basepoint, n) == self._encode(t) else None


class IntegerLattice(GroupSpace):
    def __init__(self, d: int):
        if d < 1:
            raise SpaceSpecError(f"zd:{d}: dimension must be >= 1; supported: {', '.join(SUPPORTED_SPECS)}")
        self.d = d
        self.spec = f"zd:{d}"
        self.generator_count = 2 * d
        self.generator_names = tuple(n for i in range(1, d + 1) for n in (f"e{i}", f"E{i}"))
        self.basepoint = _pack_ints((0,) * d)
        self.capabilities = Capabilities(has_geodesic_oracle=True, is_group=True)

    def _decode(self, code):
        t = _unpack_ints(code)
        if len(t) != self.d:
            raise SpaceSpecError(f"malformed point code for {self.spec}")
        return t

    def _encode(self, t):
        return _pack_ints(t)

    def _step(self, t, g):
        i, sign = divmod(g, 2)
        out = list(t)
        out[i] += -1 if sign else 1
        return tuple(out)

    def _multiply(self, s, t):
        return tuple(a + b for a, b in zip(s, t))

    def _inverse(self, t):
        return tuple(-a for a in t)

    def _axis_candidate(self, t):
        return t[0]

    def format_point(self, p):
        return ",".join(str(c) for c in self._decode(p))

    def parse_point(self, text):
        t = _parse_int_list(text)
        if len(t) != self.d:
            raise SpaceSpecError(f"{self.spec} point needs {self.d} coordinates, got {text!r}")
        return self._encode(t)

    def box_norm(self, p):
        return max(abs(c) for c in self._decode(p))


class FreeGroup(GroupSpace):
    """Reduced words; letter i > 0 is the i-th generator, -i its inverse."""

    def __init__(self, k: int):
        if not 1 <= k <= 26:
            raise SpaceSpecError(f"free:{k}: rank must be in 1..26; supported: {', '.join(SUPPORTED_SPECS)}")
        self.k = k
        self.spec = f"free:{k}"
        self.generator_count = 2 * k
        letters = "abcdefghijklmnopqrstuvwxyz"[:k]
        self.generator_names = tuple(n for c in letters for n in (c, c.upper()))
        self.basepoint = b""
        self.capabilities = Capabilities(has_geodesic_oracle=True, is_group=True)

    def _decode(self, code):
        w = struct.unpack(f">{len(code)}b", code)
        if any(not (1 <= abs(x) <= self.k) for x in w) or any(a == -b for a, b in zip(w, w[1:])):
            raise SpaceSpecError(f"malformed point code for {self.spec}")
        return w

    def _encode(self, t):
        return struct.pack(f">{len(t)}b", *t)

    def _letter(self, g: int) -> int:
        i, sign = divmod(g, 2)
        return -(i + 1) if sign else i + 1

    def _append(self, w: tuple, x: int) -> tuple:
        if w and w[-1] == -x:
            return w[:-1]
        return w + (x,)

    def _step(self, t, g):
        return self._append(t, self._letter(g))

    def _multiply(self, s, t):
        for x in t:
            s = self._append(s, x)
        return s

    def _inverse(self, t):
        return tuple(-x for x in reversed(t))

    def _axis_candidate(self, t):
        if all(x == 1 for x in t):
            return len(t)
        if all(x == -1 for x in t):
            return -len(t)
        return None

    def format_point(self, p):
        w = self._decode(p)
        if not w:
            return "e"
        return "".join(self.generator_names[2 * (abs(x) - 1) + (x < 0)] for x in w)

    def parse_point(self, text):
        text = text.strip()
        t: tuple = ()
        if text == "e":
            return self._encode(t)
        for c in text:
            if c not in self.generator_names:
                raise SpaceSpecError(f"{self.spec} word {text!r} uses unknown letter {c!r}")
            t = self._append(t, self._letter(self.generator_names.index(c)))
        return self._encode(t)

    def box_norm(self, p):
        return len(p)


class Heisenberg(GroupSpace):
    """Integer Heisenberg group in unitriangular coordinates (x, y, z)."""

    def __init__(self):
        self.spec = "heis"
        self.generator_count = 4
        self.generator_names = ("x", "X", "y", "Y")
        self.basepoint = _pack_ints((0, 0, 0))
        self.capabilities = Capabilities(has_geodesic_oracle=True, is_group=True)

    def _decode(self, code):
        t = _unpack_ints(code)
        if len(t) != 3:
            raise SpaceSpecError("malformed point code for heis")
        return t

    def _encode(self, t):
        return _pack_ints(t)

    def _step(self, t, g):
        x, y, z = t
        if g == 0:
            return (x + 1, y, z)
        if g == 1:
            return (x - 1, y, z)
        if g == 2:
            return (x, y + 1, z + x)
        return (x, y - 1, z - x)

    def _multiply(self, s, t):
        return (s[0] + t[0], s[1] + t[1], s[2] + t[2] + s[0] * t[1])

    def _inverse(self, t):
        x, y, z = t
        return (-x, -y, -z + x * y)

    def _axis_candidate(self, t):
        return t[0]

    def format_point(self, p):
        return ",".join(str(c) for c in self._decode(p))

    def parse_point(self, text):
        t = _parse_int_list(text)
        if len(t) != 3:
            raise SpaceSpecError(f"heis point needs x,y,z, got {text!r}")
        return self._encode(t)

    def box_norm(self, p):
        x, y, z = self._decode(p)
        return max(abs(x), abs(y), math.isqrt(abs(z) - 1) + 1 if z else 0)


class Lamplighter(GroupSpace):
    """Z/2 lamps over Z^d: (cursor position, sorted lit lamp positions)."""

    def __init__(self, d: int):
        if d < 1:
            raise SpaceSpecError(f"lamp:{d}: dimension must be >= 1; supported: {', '.join(SUPPORTED_SPECS)}")
        self.d = d
        self.spec = f"lamp:{d}"
        self.generator_count = 2 * d + 1
        self.generator_names = tuple(n for i in range(1, d + 1) for n in (f"t{i}", f"T{i}")) + ("flip",)
        self.basepoint = _pack_ints((0,) * d)
        self.capabilities = Capabilities(has_geodesic_oracle=True, is_group=True)

    def _decode(self, code):
        ints = _unpack_ints(code)
        d = self.d
        if len(ints) % d or not ints:
            raise SpaceSpecError(f"malformed point code for {self.spec}")
        lamps = tuple(ints[i:i + d] for i in range(d, len(ints), d))
        return (ints[:d], lamps)

    def _encode(self, t):
        pos, lamps = t
        return _pack_ints(pos + tuple(c for lamp in lamps for c in lamp))

    def _step(self, t, g):
        pos, lamps = t
        if g == 2 * self.d:
            return (pos, tuple(sorted(set(lamps) ^ {pos})))
        i, sign = divmod(g, 2)
        out = list(pos)
        out[i] += -1 if sign else 1
        return (tuple(out), lamps)

    def _shift(self, lamps, offset, sign=1):
        return {tuple(a + sign * b for a, b in zip(lamp, offset)) for lamp in lamps}

    def _multiply(self, s, t):
        pos = tuple(a + b for a, b in zip(s[0], t[0]))
        return (pos, tuple(sorted(set(s[1]) ^ self._shift(t[1], s[0]))))

    def _inverse(self, t):
        pos, lamps = t
        return (tuple(-a for a in pos), tuple(sorted(self._shift(lamps, pos, -1))))

    def _axis_candidate(self, t):
        return t[0][0]

    def format_point(self, p):
        pos, lamps = self._decode(p)
        if self.d == 1:
            return f"{pos[0]}|" + ",".join(str(lamp[0]) for lamp in lamps)
        return ",".join(map(str, pos)) + "|" + ";".join(",".join(map(str, lamp)) for lamp in lamps)

    def parse_point(self, text):
        head, sep, tail = text.strip().partition("|")
        if not sep:
            raise SpaceSpecError(f"{self.spec} point needs 'pos|lamps', got {text!r}")
        pos = _parse_int_list(head)
        if self.d == 1:
            lamps = {(c,) for c in _parse_int_list(tail)}
        else:
            lamps = {_parse_int_list(part) for part in tail.split(";") if part.strip()}
        if len(pos) != self.d or any(len(lamp) != self.d for lamp in lamps):
            raise SpaceSpecError(f"{self.spec} point {text!r} has wrong coordinate count")
        return self._encode((pos, tuple(sorted(lamps))))

    def box_norm(self, p):
        pos, lamps = self._decode(p)
        return max(abs(c) for c in pos + tuple(c for lamp in lamps for c in lamp))


class BaumslagSolitar(GroupSpace):
    """BS(1,n) as the affine group {(k, q) : q in Z[1/n]}, (k,q)(k',q') = (k+k', q + n^k q').

    Codes are (k, num, e) with q = num/n^e and e minimal.
    """

    def __init__(self, n: int):
        if n < 1:
            raise SpaceSpecError(f"bs:1:{n}: n must be >= 1; supported: {', '.join(SUPPORTED_SPECS)}")
        self.n = n
        self.spec = f"bs:1:{n}"
        self.generator_count = 4
        self.generator_names = ("a", "A", "b", "B")
        self.basepoint = _pack_ints((0, 0, 0))
        self.capabilities = Capabilities(has_geodesic_oracle=True, is_group=True)

    def _decode(self, code):
        t = _unpack_ints(code)
        if len(t) != 3 or t[2] < 0:
            raise SpaceSpecError(f"malformed point code for {self.spec}")
        return (t[0], Fraction(t[1], self.n ** t[2]))

    def _encode(self, t):
        k, q = t
        e = 0
        while (q * self.n**e).denominator != 1:
            e += 1
        return _pack_ints((k, int(q * self.n**e), e))

    def _step(self, t, g):
        k, q = t
        if g == 0:
            return (k + 1, q)
        if g == 1:
            return (k - 1, q)
        unit = Fraction(self.n) ** k
        return (k, q + unit) if g == 2 else (k, q - unit)

    def _multiply(self, s, t):
        return (s[0] + t[0], s[1] + Fraction(self.n) ** s[0] * t[1])

    def _inverse(self, t):
        k, q = t
        return (-k, -q * Fraction(self.n) ** -k)

    def _axis_candidate(self, t):
        return t[0]

    def format_point(self, p):
        k, num, e = _unpack_ints(p)
        return f"{k}|{num}/{self.n ** e}"

    def parse_point(self, text):
        head, sep, tail = text.strip().partition("|")
        try:
            return self._encode((int(head), Fraction(tail) if sep else Fraction(0)))
        except (ValueError, ZeroDivisionError) as e:
            raise SpaceSpecError(f"{self.spec} point needs 'k|num/den', got {text!r}") from e

    def box_norm(self, p):
        k, num, e = _unpack_ints(p)
        return max(abs(k), e, abs(num).bit_length())


class Lumberjack(Space):
    """Trunk N×{0} with a branch {x}×{0..a_x} above every x; a_x = ceil(slope·x)."""

    def __init__(self, slope: Fraction = Fraction(1)):
        if slope <= 0:
            raise SpaceSpecError(f"lumberjack slope must be positive, got {slope}")
        self.slope = slope
        self.spec = "lumberjack" if slope == 1 else f"lumberjack:slope={slope}"
        self.generator_count = 3
        self.basepoint = _pack_ints((0, 0))
        self.capabilities = Capabilities(has_geodesic_oracle=False, is_group=False)

    def height(self, x: int) -> int:
        return math.ceil(self.slope * x)

    def _decode(self, code):
        t = _unpack_ints(code)
        if len(t) != 2 or t[0] < 0 or not 0 <= t[1] <= self.height(t[0]):
            raise SpaceSpecError(f"malformed point code for {self.spec}")
        return t

    def distance(self, p: PointCode, q: PointCode) -> int:
        (x, y), (u, v) = self._decode(p), self._decode(q)
        return abs(y - v) if x == u else y + abs(x - u) + v

    def neighbors(self, p):
        x, y = self._decode(p)
        out = []
        if y == 0:
            out.append((x + 1, 0))
            if x > 0:
                out.append((x - 1, 0))
        if y < self.height(x):
            out.append((x, y + 1))
        if y > 0:
            out.append((x, y - 1))
        return [_pack_ints(t) for t in out]

    def format_point(self, p):
        return ",".join(str(c) for c in self._decode(p))

    def parse_point(self, text):
        t = _parse_int_list(text)
        if len(t) != 2:
            raise SpaceSpecError(f"lumberjack point needs x,y, got {text!r}")
        code = _pack_ints(t)
        self._decode(code)
        return code

    def box_norm(self, p):
        return max(self._decode(p))


def parse_space(spec: str) -> Space:
    parts = spec.strip().split(":")
    family, args = parts[0], parts[1:]
    try:
        if family == "zd" and len(args) == 1:
            return IntegerLattice(int(args[0]))
        if family == "free" and len(args) == 1:
            return FreeGroup(int(args[0]))
        if family == "heis" and not args:
            return Heisenberg()
        if family == "lamp" and len(args) == 1:
            return Lamplighter(int(args[0]))
        if family == "bs" and len(args) == 2:
            if int(args[0]) != 1:
                raise SpaceSpecError(f"{spec}: only BS(1,n) is supported; supported: {', '.join(SUPPORTED_SPECS)}")
            return BaumslagSolitar(int(args[1]))
        if family == "lumberjack" and not args:
            return Lumberjack()
        if family == "lumberjack" and len(args) == 1 and args[0].startswith("slope="):
            return Lumberjack(Fraction(args[0].removeprefix("slope=")))
    except (ValueError, ZeroDivisionError) as e:
        if isinstance(e, SpaceSpecError):
            raise
        raise SpaceSpecError(f"bad parameters in {spec!r}: {e}; supported: {', '.join(SUPPORTED_SPECS)}") from e
    raise SpaceSpecError(f"unknown space {spec!r}; supported: {', '.join(SUPPORTED_SPECS)}")


@dataclass
class BallIndex:
    space: Space
    radius: int
    points: list[PointCode]
    lengths: list[int]
    adjacency: list[tuple[int, ...]]
    interior: list[bool]
    index: dict[PointCode, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {p: i for i, p in enumerate(self.points)}

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, p: PointCode) -> bool:
        return p in self.index

    def idx(self, p: PointCode) -> int:
        try:
            return self.index[p]
        except KeyError:
            raise PointOutsideBallError(
                f"point {self.space.format_point(p)} is outside the ball of radius {self.radius}"
            ) from None

    def length(self, p: PointCode) -> int:
        return self.lengths[self.idx(p)]

    def is_interior(self, p: PointCode) -> bool:
        return self.interior[self.idx(p)]

    def interior_indices(self) -> list[int]:
        return [i for i, flag in enumerate(self.interior) if flag]

    def edges(self) -> list[tuple[int, int]]:
        """Unordered ball edges as (i, j), i < j, in point order."""
        return [(i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j]

    def edge_length(self, i: int, j: int) -> int:
        return max(self.lengths[i], self.lengths[j])

    def max_degree(self) -> int:
        return max((len(n) for n in self.adjacency), default=0)

    def distance(self, p: PointCode, q: PointCode) -> int:
        """Graph distance inside the ball."""
        i, j = self.idx(p), self.idx(q)
        if i == j:
            return 0
        if j in self.adjacency[i]:
            return 1
        seen = {i: 0}
        queue = deque([i])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen[v] = seen[u] + 1
                    if v == j:
                        return seen[v]
                    queue.append(v)
        raise PointOutsideBallError(f"{self.space.format_point(q)} unreachable inside the ball")


def ball(space: Space, R: int) -> BallIndex:
    if R < 0:
        raise ValueError(f"radius must be non-negative, got {R}")
    cap = get_settings().ball_cap
    lengths = {space.basepoint: 0}
    neighbor_cache: dict[PointCode, list[PointCode]] = {}
    frontier = [space.basepoint]
    for r in range(R):
        nxt = []
        for p in frontier:
            nbrs = neighbor_cache[p] = space.neighbors(p)
            for q in nbrs:
                if q not in lengths:
                    lengths[q] = r + 1
                    nxt.append(q)
        if len(lengths) > cap:
            raise BallSizeError(r + 1, len(lengths), cap)
        frontier = nxt
    points = sorted(lengths, key=lambda p: (lengths[p], p))
    index = {p: i for i, p in enumerate(points)}
    adjacency = []
    interior = []
    for p in points:
        nbrs = neighbor_cache.get(p) or space.neighbors(p)
        inside = tuple(dict.fromkeys(index[q] for q in nbrs if q in index))
        adjacency.append(inside)
        interior.append(len(inside) == len(set(nbrs)))
    log.debug("ball_built", space=space.spec, radius=R, size=len(points))
    metrics.record_ball(space.spec, len(points))
    return BallIndex(space, R, points, [lengths[p] for p in points], adjacency, interior, index)


def ball_containing(space: Space, p: PointCode) -> BallIndex:
    """Smallest ball that contains p."""
    R = 0
    while True:
        b = ball(space, R)
        if p in b:
            return b
        R += 1


def simplex_length(ball: BallIndex, simplex) -> int:
    return max(ball.length(p) for p in simplex)


@dataclass(frozen=True)
class GeodesicLine:
    line_id: PointCode
    base: PointCode
    weight: Fraction


def _require_oracle(space: Space) -> GroupSpace:
    if not space.capabilities.has_geodesic_oracle or not isinstance(space, GroupSpace):
        raise CapabilityError(f"{space.spec} has no geodesic oracle")
    return space


def scan_line(space: GroupSpace, delta: PointCode, ball: BallIndex) -> tuple[PointCode, int]:
    """Base of the axis coset through delta and m with delta = base·a^m.

    The base is the coset point nearest the basepoint, ties by encoding. A
    geodesic line has |delta·a^m| >= |m| - |delta|, so |m| <= 2|delta| suffices.
    """
    n = ball.length(delta)
    best = (n, delta)
    offset = 0
    for g, sign in ((0, -1), (1, 1)):
        t = space._decode(delta)
        for j in range(1, 2 * n + 1):
            t = space._step(t, g)
            q = space._encode(t)
            i = ball.index.get(q)
            if i is not None and (ball.lengths[i], q) < best:
                best = (ball.lengths[i], q)
                offset = sign * j
    return best[1], offset


def line_base(space: GroupSpace, delta: PointCode, ball: BallIndex) -> PointCode:
    return scan_line(space, delta, ball)[0]


def lines_through(space: Space, delta: PointCode, ball: BallIndex | None = None) -> list[GeodesicLine]:
    group = _require_oracle(space)
    if ball is None or delta not in ball:
        ball = ball_containing(space, delta)
    base = line_base(group, delta, ball)
    # one translate of the axis through every point, so the counting weight is 1
    return [GeodesicLine(line_id=base, base=base, weight=Fraction(1))]


def ray_direction(space: GroupSpace, line: GeodesicLine, delta: PointCode) -> int:
    """Generator index (0 or 1) of the subray from delta that avoids the base."""
    m = space.axis_offset(line.base, delta)
    if m is None:
        raise NotOnLineError(f"{space.format_point(delta)} is not on the line through {space.format_point(line.base)}")
    return direction_from_offset(space, delta, m)


def direction_from_offset(space: GroupSpace, delta: PointCode, m: int) -> int:
    if m > 0:
        return 0
    if m < 0:
        return 1
    # delta is the base: the first step with the smaller encoding wins
    return 0 if space.step(delta, 0) < space.step(delta, 1) else 1


def ray_from(space: Space, line: GeodesicLine, delta: PointCode, k: int) -> PointCode:
    group = _require_oracle(space)
    if k < 0:
        raise ValueError(f"ray index must be non-negative, got {k}")
    g = ray_direction(group, line, delta)
    t = group._decode(delta)
    for _ in range(k):
        t = group._step(t, g)
    return group._encode(t)


def axis_distortion(space: Space, generator: str, R: int) -> list[tuple[int, int]]:
    """(n, |g^n|) for n = 0, 1, ... while g^n stays in B_R."""
    if not isinstance(space, GroupSpace):
        raise CapabilityError(f"{space.spec} is not a group")
    g = space.generator_index(generator)
    b = ball(space, R)
    table = []
    t = space._decode(space.basepoint)
    n = 0
    while (code := space._encode(t)) in b:
        table.append((n, b.length(code)))
        t = space._step(t, g)
        n += 1
        if n > len(b):
            break
    return table
