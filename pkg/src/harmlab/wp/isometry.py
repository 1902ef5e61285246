"""Isometry words: model Dehn twists and auxiliary translations.

Text form of a word, used by graph gains and config files::

    id                      identity
    tau1  tau2^-1           twist about curve i (theta_i -> theta_i + power)
    shift(1.5)  shift(1,0)  Euclidean translation by a vector
    hyp(1.0)  hyp(1.0,1.57) hyperbolic translation (length, axis angle)

Letters are joined with ``*`` and act like composed maps: the rightmost
letter is applied first.  ``@k`` after a translation letter picks product
factor ``k`` (0-based); by default the first factor of the matching kind.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from harmlab.npc.spaces import (
    CuspFactor,
    Euclidean,
    GeometryInputError,
    HyperbolicPlane,
    NpcSpace,
    Product,
)


@dataclass(frozen=True)
class Twist:
    curve: int

    def __post_init__(self):
        if self.curve < 1:
            raise GeometryInputError("twist curve indices start at 1")


@dataclass(frozen=True)
class Shift:
    vector: tuple
    factor: int | None = None


@dataclass(frozen=True)
class HyperbolicShift:
    length: float
    axis_angle: float = 0.0
    factor: int | None = None


@dataclass(frozen=True)
class IsometryWord:
    """Finite product of generator powers; ``letters`` is a tuple of ``(gen, power)``."""

    letters: tuple = ()

    def __post_init__(self):
        clean = []
        for gen, power in self.letters:
            if int(power) != power:
                raise GeometryInputError("generator powers must be integers")
            if power != 0:
                clean.append((gen, int(power)))
        object.__setattr__(self, "letters", tuple(clean))

    @classmethod
    def identity(cls) -> "IsometryWord":
        return cls(())

    @classmethod
    def of(cls, gen, power: int = 1) -> "IsometryWord":
        return cls(((gen, power),))

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def inverse(self) -> "IsometryWord":
        return IsometryWord(tuple((g, -p) for g, p in reversed(self.letters)))

    def __mul__(self, other: "IsometryWord") -> "IsometryWord":
        return IsometryWord(self.letters + other.letters)

    def __str__(self) -> str:
        return format_word(self)


def twist(curve: int, power: int = 1) -> IsometryWord:
    return IsometryWord.of(Twist(curve), power)


def hyperbolic_translation(length: float, axis_angle: float = 0.0, factor=None) -> IsometryWord:
    return IsometryWord.of(HyperbolicShift(float(length), float(axis_angle), factor))


def euclidean_translation(vector, factor=None) -> IsometryWord:
    return IsometryWord.of(Shift(tuple(float(x) for x in np.atleast_1d(vector)), factor))


def _factor_slices(space: NpcSpace):
    if isinstance(space, Product):
        offs = space.offsets
        return [(f, slice(offs[i], offs[i + 1])) for i, f in enumerate(space.factors)]
    return [(space, slice(0, space.dim))]


def _locate(space: NpcSpace, gen):
    parts = _factor_slices(space)
    if isinstance(gen, Twist):
        cusps = [(f, s) for f, s in parts if isinstance(f, CuspFactor)]
        if gen.curve > len(cusps):
            raise GeometryInputError(f"twist about curve {gen.curve} but target has {len(cusps)} cusp factors")
        return cusps[gen.curve - 1]
    wanted = Euclidean if isinstance(gen, Shift) else HyperbolicPlane
    if gen.factor is not None:
        if gen.factor >= len(parts) or not isinstance(parts[gen.factor][0], wanted):
            raise GeometryInputError(f"factor {gen.factor} is not a {wanted.__name__}")
        return parts[gen.factor]
    for f, s in parts:
        if isinstance(f, wanted):
            return f, s
    raise GeometryInputError(f"target has no {wanted.__name__} factor for {gen}")


def _apply_letter(space: NpcSpace, gen, power: int, point: np.ndarray) -> np.ndarray:
    factor, sl = _locate(space, gen)
    out = point.copy()
    block = point[..., sl]
    if isinstance(gen, Twist):
        # pinched factors carry nan twists, so the action is the identity there
        block = block.copy()
        block[..., 1] = block[..., 1] + power
    elif isinstance(gen, Shift):
        vec = np.asarray(gen.vector, dtype=float)
        if vec.shape != (factor.dim,):
            raise GeometryInputError("shift vector does not match the Euclidean dimension")
        block = block + power * vec
    else:
        mat = factor.translation(power * gen.length, gen.axis_angle)
        block = HyperbolicPlane.project(block @ mat.T)
    out[..., sl] = block
    return out


def apply_isometry(word: IsometryWord, point, space: NpcSpace) -> np.ndarray:
    """Image of ``point`` (or a batch of points) under ``word``."""
    out = np.array(point, dtype=float)
    for gen, power in reversed(word.letters):
        out = _apply_letter(space, gen, power, out)
    return out


def check_word(word: IsometryWord, space: NpcSpace) -> None:
    """Raise unless every letter of ``word`` acts on ``space``."""
    for gen, _ in word.letters:
        factor, _sl = _locate(space, gen)
        if isinstance(gen, Shift) and len(gen.vector) != factor.dim:
            raise GeometryInputError("shift vector does not match the Euclidean dimension")


_LETTER = re.compile(
    r"^(?:(?P<tau>tau(?P<curve>\d+))|(?P<kind>shift|hyp)\((?P<args>[^)]*)\))"
    r"(?:@(?P<factor>\d+))?(?:\^(?P<power>[+-]?\d+))?$"
)


def parse_word(text: str) -> IsometryWord:
    text = text.strip().replace(" ", "")
    if text in ("", "id", "1"):
        return IsometryWord.identity()
    letters = []
    for chunk in text.split("*"):
        if chunk == "id":
            continue
        m = _LETTER.match(chunk)
        if not m:
            raise GeometryInputError(f"cannot parse isometry letter {chunk!r}")
        power = int(m.group("power") or 1)
        factor = int(m.group("factor")) if m.group("factor") is not None else None
        if m.group("tau"):
            if factor is not None:
                raise GeometryInputError("twists select their factor by curve index")
            gen = Twist(int(m.group("curve")))
        else:
            try:
                args = [float(x) for x in m.group("args").split(",") if x]
            except ValueError as exc:
                raise GeometryInputError(f"bad numbers in {chunk!r}") from exc
            if not args:
                raise GeometryInputError(f"{chunk!r} needs arguments")
            if m.group("kind") == "shift":
                gen = Shift(tuple(args), factor)
            else:
                if len(args) > 2:
                    raise GeometryInputError("hyp takes (length[, axis_angle])")
                gen = HyperbolicShift(args[0], args[1] if len(args) > 1 else 0.0, factor)
        letters.append((gen, power))
    return IsometryWord(tuple(letters))


def _num(x: float) -> str:
    return repr(float(x))


def format_word(word: IsometryWord) -> str:
    if word.is_identity:
        return "id"
    out = []
    for gen, power in word.letters:
        if isinstance(gen, Twist):
            s = f"tau{gen.curve}"
        elif isinstance(gen, Shift):
            s = "shift(" + ",".join(_num(v) for v in gen.vector) + ")"
        else:
            s = f"hyp({_num(gen.length)},{_num(gen.axis_angle)})"
        if not isinstance(gen, Twist) and gen.factor is not None:
            s += f"@{gen.factor}"
        if power != 1:
            s += f"^{power}"
        out.append(s)
    return "*".join(out)


def translation_tube_radius(level: float, length: float) -> float:
    """Distance from the axis inside which a hyperbolic translation of the
    given length displaces points by less than ``level``.

    Uses ``sinh(disp / 2) = cosh(r) sinh(length / 2)``; returns ``-1`` when
    even points on the axis are displaced at least ``level``.
    """
    ratio = math.sinh(level / 2) / math.sinh(length / 2)
    if ratio < 1:
        return -1.0
    return math.acosh(ratio)
