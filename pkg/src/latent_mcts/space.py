"""Search spaces, candidate encodings, uniform sampling and mutation.

An encoding is a plain 1-D float ``numpy`` array with one entry per dimension.
Categorical dimensions expose their raw numeric codes (no one-hot), so linear
models fitted on encodings see ordered inputs.

ConvNet-style spaces use a *prefix padding* convention: every slot is a layer
code or the empty-layer code, and once a slot is empty every later slot must
be empty too.  Counting, sampling and mutation all respect it.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np

KEY_DECIMALS = 6


class InvalidEncodingError(ValueError):
    """Raised when a vector does not belong to a search space."""


@dataclass(frozen=True)
class Dimension:
    kind: str
    codes: tuple[float, ...] = ()
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind == "categorical":
            codes = tuple(float(c) for c in self.codes)
            if len(codes) < 1 or len(set(codes)) != len(codes):
                raise ValueError(f"categorical codes must be distinct and non-empty: {codes}")
            if not all(math.isfinite(c) for c in codes):
                raise ValueError("categorical codes must be finite")
            object.__setattr__(self, "codes", codes)
        elif self.kind == "continuous":
            if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
                raise ValueError(f"degenerate interval [{self.lo}, {self.hi}]")
        else:
            raise ValueError(f"unknown dimension kind {self.kind!r}")

    @classmethod
    def categorical(cls, codes: Sequence[float]) -> "Dimension":
        return cls("categorical", codes=tuple(codes))

    @classmethod
    def continuous(cls, lo: float, hi: float) -> "Dimension":
        return cls("continuous", lo=float(lo), hi=float(hi))

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def contains(self, value: float) -> bool:
        if self.is_categorical:
            return any(abs(value - c) <= 10 ** -KEY_DECIMALS for c in self.codes)
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        if self.is_categorical:
            return {"kind": "categorical", "codes": list(self.codes)}
        return {"kind": "continuous", "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> "Dimension":
        if d["kind"] == "categorical":
            return cls.categorical(d["codes"])
        if "lo" in d:
            return cls.continuous(d["lo"], d["hi"])
        lo, hi = d["bounds"]
        return cls.continuous(lo, hi)


@dataclass(frozen=True)
class ConvLayout:
    """Maps layer codes of a ConvNet space to (kernel, filters) pairs."""

    kernels: tuple[int, ...]
    filters: tuple[int, ...]
    layer_codes: tuple[float, ...]

    def decode(self, code: float) -> tuple[int, int]:
        i = int(np.argmin([abs(code - c) for c in self.layer_codes]))
        return self.kernels[i // len(self.filters)], self.filters[i % len(self.filters)]

    def code_of(self, kernel: int, filters: int) -> float:
        i = self.kernels.index(kernel) * len(self.filters) + self.filters.index(filters)
        return self.layer_codes[i]

    def to_dict(self) -> dict:
        return {"kernels": list(self.kernels), "filters": list(self.filters),
                "layer_codes": list(self.layer_codes)}

    @classmethod
    def from_dict(cls, d: dict) -> "ConvLayout":
        return cls(tuple(d["kernels"]), tuple(d["filters"]), tuple(float(c) for c in d["layer_codes"]))


@dataclass(frozen=True)
class SearchSpace:
    """An ordered list of dimensions, optionally with a prefix-padding code.

    :param name: identifier used in traces and manifests.
    :param dims: per-dimension domains.
    :param metric_range_hint: ``(lo, hi)`` of the objective; scales the UCB
        exploration constant and histogram bins.
    :param pad_code: empty-layer code for prefix-padded spaces.
    :param layout: optional ConvNet layer table used by the synthetic metric
        and the action-space adapters.
    """

    name: str
    dims: tuple[Dimension, ...]
    metric_range_hint: Optional[tuple[float, float]] = None
    pad_code: Optional[float] = None
    layout: Optional[ConvLayout] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise ValueError("a search space needs at least one dimension")
        if self.pad_code is not None:
            for d in self.dims:
                if not d.is_categorical or self.pad_code not in d.codes:
                    raise ValueError("every padded dimension must be categorical and contain pad_code")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def is_finite(self) -> bool:
        return all(d.is_categorical for d in self.dims)

    @property
    def is_padded(self) -> bool:
        return self.pad_code is not None

    @cached_property
    def _real_codes(self) -> tuple[np.ndarray, ...]:
        out = []
        for d in self.dims:
            codes = [c for c in d.codes if c != self.pad_code] if d.is_categorical else []
            out.append(np.asarray(codes, dtype=float))
        return tuple(out)

    def real_codes(self, i: int) -> np.ndarray:
        """Codes of dimension ``i`` excluding the padding code."""
        return self._real_codes[i]

    # -- validity ---------------------------------------------------------

    def depth(self, e: np.ndarray) -> int:
        """Number of leading non-empty slots of a padded encoding."""
        empty = np.isclose(e, self.pad_code, atol=10 ** -KEY_DECIMALS)
        return int(np.argmax(empty)) if empty.any() else len(e)

    def is_valid(self, e, allow_empty: bool = False) -> bool:
        e = np.asarray(e, dtype=float)
        if e.shape != (self.ndim,):
            return False
        if not all(d.contains(v) for d, v in zip(self.dims, e)):
            return False
        if self.pad_code is not None:
            empty = np.isclose(e, self.pad_code, atol=10 ** -KEY_DECIMALS)
            L = self.depth(e)
            if empty[L:].sum() != self.ndim - L:
                return False
            if L == 0 and not allow_empty:
                return False
        return True

    def make_encoding(self, values, allow_empty: bool = False) -> np.ndarray:
        """Validate ``values`` and return them as a read-only encoding."""
        e = np.array(values, dtype=float)
        if not self.is_valid(e, allow_empty=allow_empty):
            raise InvalidEncodingError(f"{e.tolist()} is not a valid encoding of {self.name}")
        e.setflags(write=False)
        return e

    # -- counting and enumeration ----------------------------------------

    def size(self) -> float | int:
        """Number of valid encodings, or ``math.inf`` for continuous spaces."""
        if not self.is_finite:
            return math.inf
        if self.pad_code is None:
            return math.prod(len(d.codes) for d in self.dims)
        total, prefix = 0, 1
        for i in range(self.ndim):
            prefix *= len(self.real_codes(i))
            total += prefix
        return total

    def enumerate(self) -> Iterator[np.ndarray]:
        """Yield every valid encoding of a finite space."""
        if not self.is_finite:
            raise ValueError(f"{self.name} is not finite")
        if self.pad_code is None:
            for combo in itertools.product(*(d.codes for d in self.dims)):
                yield np.array(combo)
            return
        for L in range(1, self.ndim + 1):
            for combo in itertools.product(*(self.real_codes(i) for i in range(L))):
                yield np.array(list(combo) + [self.pad_code] * (self.ndim - L))

    def enumerate_array(self) -> np.ndarray:
        return np.array(list(self.enumerate()), dtype=float)

    # -- sampling ---------------------------------------------------------

    def sample_uniform(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw encodings with each dimension sampled independently and uniformly.

        Padded spaces draw the depth uniformly first, then each real layer.
        Returns shape ``(ndim,)`` when ``size`` is None, else ``(size, ndim)``.
        """
        k = 1 if size is None else size
        out = np.empty((k, self.ndim))
        for i, d in enumerate(self.dims):
            if d.is_categorical:
                codes = self.real_codes(i)
                out[:, i] = codes[rng.integers(0, len(codes), size=k)]
            else:
                out[:, i] = rng.uniform(d.lo, d.hi, size=k)
        if self.pad_code is not None:
            depth = rng.integers(1, self.ndim + 1, size=k)
            out[np.arange(self.ndim)[None, :] >= depth[:, None]] = self.pad_code
        return out[0] if size is None else out

    def mutate(self, e, rng: np.random.Generator) -> np.ndarray:
        """Copy of ``e`` with one uniformly chosen dimension resampled.

        Categorical dimensions move to a different code; continuous ones are
        redrawn uniformly over their interval.  Padded encodings are repaired
        afterwards so the result is valid.
        """
        e = np.array(e, dtype=float)
        i = int(rng.integers(self.ndim))
        d = self.dims[i]
        if d.is_categorical:
            choices = [c for c in d.codes if abs(c - e[i]) > 10 ** -KEY_DECIMALS]
            if self.pad_code is not None and i == 0:
                choices = [c for c in choices if c != self.pad_code]
            if choices:
                e[i] = choices[int(rng.integers(len(choices)))]
        else:
            e[i] = rng.uniform(d.lo, d.hi)
        if self.pad_code is not None:
            e = self._repair(e, i, rng)
        return e

    def _repair(self, e: np.ndarray, changed: int, rng: np.random.Generator) -> np.ndarray:
        empty = np.isclose(e, self.pad_code)
        if empty[changed]:
            e[changed:] = self.pad_code
            return e
        # a real layer after a gap: fill the gap with random real layers
        for j in range(changed):
            if empty[j]:
                codes = self.real_codes(j)
                e[j] = codes[int(rng.integers(len(codes)))]
        return e

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "dims": [dim.to_dict() for dim in self.dims],
            "metric_range_hint": list(self.metric_range_hint) if self.metric_range_hint else None,
        }
        if self.pad_code is not None:
            d["pad_code"] = self.pad_code
        if self.layout is not None:
            d["layout"] = self.layout.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        hint = d.get("metric_range_hint")
        layout = d.get("layout")
        return cls(
            name=d["name"],
            dims=tuple(Dimension.from_dict(x) for x in d["dims"]),
            metric_range_hint=tuple(hint) if hint else None,
            pad_code=d.get("pad_code"),
            layout=ConvLayout.from_dict(layout) if layout else None,
        )

    @classmethod
    def from_json(cls, text: str) -> "SearchSpace":
        return cls.from_dict(json.loads(text))


def encoding_key(e) -> tuple:
    """Hashable key for an encoding, rounded so categorical codes compare exactly."""
    return tuple((np.round(np.asarray(e, dtype=float), KEY_DECIMALS) + 0.0).tolist())


def encoding_keys(X: np.ndarray) -> list[tuple]:
    R = np.round(np.asarray(X, dtype=float), KEY_DECIMALS) + 0.0
    return [tuple(row) for row in R.tolist()]


# -- built-in spaces ---------------------------------------------------------

def _convnet(name: str, kernels, filters, codes, slots: int, pad: Optional[float]) -> SearchSpace:
    layout = ConvLayout(tuple(kernels), tuple(filters), tuple(codes))
    all_codes = tuple(sorted(codes)) + ((pad,) if pad is not None else ())
    dims = tuple(Dimension.categorical(all_codes) for _ in range(slots))
    return SearchSpace(name, dims, metric_range_hint=(0.0, 1.0), pad_code=pad, layout=layout)


def _convnet_toy() -> SearchSpace:
    # codes ordered by layer quality: (3,64)=0.2, (5,64)=0.4, (3,32)=0.6, (5,32)=0.8
    return _convnet("convnet_toy", (3, 5), (32, 64), (0.6, 0.2, 0.8, 0.4), 5, 1.0)


def _convnet_appendix() -> SearchSpace:
    codes = tuple(round(0.1 * i, 1) for i in range(1, 10))
    return _convnet("convnet_appendix", (3, 5, 7), (32, 64, 96), codes, 5, 1.0)


def _convnet_60k() -> SearchSpace:
    # fixed depth 10, 3x3 kernels, 3 filter widths: 3**10 = 59049 nets
    return _convnet("convnet_60k", (3,), (32, 64, 96), (0.1, 0.2, 0.3), 10, None)


def _nasbench_like() -> SearchSpace:
    dims = [Dimension.categorical((0.0, 1.0)) for _ in range(21)]
    dims += [Dimension.categorical((0.0, 1.0, 2.0)) for _ in range(5)]
    return SearchSpace("nasbench_like", tuple(dims), metric_range_hint=(0.0, 1.0))


def _eggholder2d() -> SearchSpace:
    dims = (Dimension.continuous(-512.0, 512.0), Dimension.continuous(-512.0, 512.0))
    # range of the negated eggholder surface over the box
    return SearchSpace("eggholder2d", dims, metric_range_hint=(-1050.0, 960.0))


BUILTIN_SPACES = {
    "convnet_toy": _convnet_toy,
    "convnet_appendix": _convnet_appendix,
    "convnet_60k": _convnet_60k,
    "nasbench_like": _nasbench_like,
    "eggholder2d": _eggholder2d,
}


def make_builtin_space(name: str) -> SearchSpace:
    try:
        return BUILTIN_SPACES[name]()
    except KeyError:
        raise ValueError(f"unknown built-in space {name!r}; choose from {sorted(BUILTIN_SPACES)}") from None


def space_size(space: SearchSpace) -> float | int:
    return space.size()


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    return space.sample_uniform(rng)


def mutate(space: SearchSpace, e, rng: np.random.Generator) -> np.ndarray:
    return space.mutate(e, rng)
