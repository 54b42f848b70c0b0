"""Mining parameters: the knobs a user may edit at breakpoints."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction


class InvalidValue(ValueError):
    """A parameter value outside its legal range."""


def as_fraction(value) -> Fraction:
    """Exact rational from int, Fraction, or a decimal/fraction string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    try:
        if isinstance(value, float):
            # floats only ever arrive from CLI conveniences; go through the
            # printed decimal so 0.3 means 3/10, not the binary float.
            return Fraction(str(value))
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidValue(f"not a rational: {value!r} ({e})") from None
    raise InvalidValue(f"not a rational: {value!r}")


@dataclass(frozen=True)
class MiningParams:
    """minsup/minconf thresholds, transaction count n, and threshold strictness.

    ``n`` is bound at data-load time from the distinct-tid count of the source
    relation (before any data-preparation filter removes transactions).
    """

    minsup: Fraction
    minconf: Fraction
    n: int | None = None
    threshold_mode: str = "strict"  # strict: count > n*minsup; inclusive: >=

    def __post_init__(self):
        object.__setattr__(self, "minsup", as_fraction(self.minsup))
        object.__setattr__(self, "minconf", as_fraction(self.minconf))
        if not 0 < self.minsup <= 1:
            raise InvalidValue(f"minsup must be in (0,1], got {self.minsup}")
        if not 0 < self.minconf <= 1:
            raise InvalidValue(f"minconf must be in (0,1], got {self.minconf}")
        if self.n is not None and self.n < 1:
            raise InvalidValue(f"n must be >= 1, got {self.n}")
        if self.threshold_mode not in ("strict", "inclusive"):
            raise InvalidValue(f"unknown threshold_mode {self.threshold_mode!r}")

    def with_(self, **changes) -> "MiningParams":
        return replace(self, **changes)

    def bindings(self) -> dict:
        """Values for ParamRef resolution during expression evaluation."""
        out = {"minsup": self.minsup, "minconf": self.minconf}
        if self.n is not None:
            out["n"] = self.n
        return out

    def passes_threshold(self, count: int, of: int | None = None) -> bool:
        """Support test: count vs n*minsup under the configured strictness."""
        n = self.n if of is None else of
        bar = n * self.minsup
        return count > bar if self.threshold_mode == "strict" else count >= bar

    def passes_confidence(self, conf: Fraction) -> bool:
        if self.threshold_mode == "strict":
            return conf > self.minconf
        return conf >= self.minconf
