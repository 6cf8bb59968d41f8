"""Problem instances: TSPLIB ingestion, processing-time variants, fleet rules.

Location 0 of the travel-time matrix is the depot; customers are locations
1..dimension-1.  Processing times are drawn once per (matrix, seed) and shared
by every variant kind, so variants of the same instance are matched pairs.

All randomness goes through numpy's PCG64 generator seeded with a
``SeedSequence`` over (seed, stream tag[, replicate]), which makes instance
generation reproducible from the recorded label alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VARIANT_KINDS = ("base", "2x", "5x", "1R10", "1R20")

# SeedSequence stream tags: base processing-time draws vs. variant multipliers.
_BASE_STREAM = 17
_MULT_STREAM = 29


class TsplibParseError(ValueError):
    """Malformed or unsupported TSPLIB input."""


@dataclass(frozen=True)
class RawTsplib:
    """A parsed TSPLIB file: name, node count and full travel-time matrix."""

    name: str
    dimension: int
    edge_weights: np.ndarray  # (dimension, dimension), symmetric, zero diagonal

    def __post_init__(self):
        w = self.edge_weights
        if w.shape != (self.dimension, self.dimension):
            raise TsplibParseError(
                f"matrix shape {w.shape} does not match dimension {self.dimension}"
            )
        if np.any(np.abs(np.diag(w)) > 0):
            raise TsplibParseError("travel-time matrix has nonzero diagonal entries")
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.max(np.abs(w - w.T)) > 1e-9 * scale:
            raise TsplibParseError("travel-time matrix is not symmetric")
        if np.any(w < 0):
            raise TsplibParseError("negative travel times")


@dataclass(frozen=True)
class VariantSpec:
    """Processing-time configuration: kind, RNG seed and replicate index.

    The replicate index only matters for the stochastic kinds (1R10, 1R20),
    where it is folded into the multiplier stream's seed derivation.
    """

    kind: str
    seed: int
    replicate: int = 0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")


@dataclass(frozen=True)
class FleetConfig:
    m: int  # vehicle count
    k: int  # per-vehicle resource capacity

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ValueError("fleet requires m >= 1 and k >= 1")


@dataclass(frozen=True)
class Instance:
    """A VRP-RPD instance.

    ``d`` is the (n+1)x(n+1) travel-time matrix as nested tuples (location 0
    is the depot), ``p`` holds per-location processing times with p[0] == 0.
    Tuples keep the instance hashable/immutable and are cheap to index from
    the schedule simulator's inner loops.
    """

    n: int
    d: tuple
    p: tuple
    fleet: FleetConfig
    label: str
    variant: str = "base"
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("instance needs at least one customer")
        if len(self.d) != self.n + 1 or any(len(row) != self.n + 1 for row in self.d):
            raise ValueError("travel-time matrix must be (n+1)x(n+1)")
        if len(self.p) != self.n + 1 or any(x < 0 for x in self.p):
            raise ValueError("processing times must cover locations 0..n and be >= 0")

    @property
    def m(self) -> int:
        return self.fleet.m

    @property
    def k(self) -> int:
        return self.fleet.k

    @property
    def customers(self) -> range:
        return range(1, self.n + 1)

    def matrix(self) -> np.ndarray:
        return np.array(self.d, dtype=float)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "m": self.fleet.m,
            "k": self.fleet.k,
            "matrix": [list(row) for row in self.d],
            "processing_times": list(self.p[1:]),
            "variant": self.variant,
            "seed": self.seed,
            "replicate": self.replicate,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        n = int(doc["n"])
        return cls(
            n=n,
            d=tuple(tuple(float(x) for x in row) for row in doc["matrix"]),
            p=(0.0,) + tuple(float(x) for x in doc["processing_times"]),
            fleet=FleetConfig(int(doc["m"]), int(doc["k"])),
            label=str(doc["label"]),
            variant=str(doc.get("variant", "base")),
            seed=int(doc.get("seed", 0)),
            replicate=int(doc.get("replicate", 0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# TSPLIB parsing
# ---------------------------------------------------------------------------

_SUPPORTED_EXPLICIT = ("LOWER_DIAG_ROW", "UPPER_ROW", "FULL_MATRIX")
_SUPPORTED_COORD = ("EUC_2D", "CEIL_2D", "GEO", "ATT")


def _nint(x: float) -> int:
    return int(x + 0.5)


def _geo_radians(x: float) -> float:
    # TSPLIB DDD.MM coordinate convention.
    pi = 3.141592
    deg = _nint(x)
    minutes = x - deg
    return pi * (deg + 5.0 * minutes / 3.0) / 180.0


def _coord_distance(kind: str, a: tuple, b: tuple) -> float:
    dx, dy = a[0] - b[0], a[1] - b[1]
    if kind == "EUC_2D":
        return float(_nint(math.sqrt(dx * dx + dy * dy)))
    if kind == "CEIL_2D":
        return float(math.ceil(math.sqrt(dx * dx + dy * dy)))
    if kind == "ATT":
        r = math.sqrt((dx * dx + dy * dy) / 10.0)
        t = _nint(r)
        return float(t + 1 if t < r else t)
    if kind == "GEO":
        rrr = 6378.388
        lat_a, lon_a = _geo_radians(a[0]), _geo_radians(a[1])
        lat_b, lon_b = _geo_radians(b[0]), _geo_radians(b[1])
        q1 = math.cos(lon_a - lon_b)
        q2 = math.cos(lat_a - lat_b)
        q3 = math.cos(lat_a + lat_b)
        return float(int(rrr * math.acos(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)) + 1.0))
    raise TsplibParseError(f"unsupported coordinate distance type {kind}")


def parse_tsplib(text: str) -> RawTsplib:
    """Parse a TSPLIB95 document into a full symmetric travel-time matrix.

    Supports EXPLICIT matrices in LOWER_DIAG_ROW / UPPER_ROW / FULL_MATRIX
    format plus the coordinate types EUC_2D, CEIL_2D, GEO and ATT (expanded
    using the standard TSPLIB rounding rules for each type).
    """
    name = ""
    dimension = None
    ewt = None
    ewf = None
    weights: list[float] = []
    coords: dict[int, tuple] = {}

    lines = text.splitlines()
    i = 0
    section = None
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        upper = line.upper()
        if upper.startswith("EOF"):
            break
        if ":" in line and section is None:
            key, _, value = line.partition(":")
            key = key.strip().upper()
            value = value.strip()
            if key == "NAME":
                name = value
            elif key == "DIMENSION":
                dimension = int(value)
            elif key == "EDGE_WEIGHT_TYPE":
                ewt = value.upper()
            elif key == "EDGE_WEIGHT_FORMAT":
                ewf = value.upper()
            # TYPE, COMMENT, DISPLAY_DATA_TYPE etc. are ignored
            continue
        if upper.startswith("EDGE_WEIGHT_SECTION"):
            section = "weights"
            continue
        if upper.startswith("NODE_COORD_SECTION"):
            section = "coords"
            continue
        if upper.startswith("DISPLAY_DATA_SECTION"):
            section = "display"
            continue
        if section == "weights":
            try:
                weights.extend(float(tok) for tok in line.split())
            except ValueError as exc:
                raise TsplibParseError(f"bad token in EDGE_WEIGHT_SECTION: {line!r}") from exc
        elif section == "coords":
            parts = line.split()
            if len(parts) < 3:
                raise TsplibParseError(f"bad node-coordinate line: {line!r}")
            coords[int(float(parts[0]))] = (float(parts[1]), float(parts[2]))
        # display data is skipped

    if dimension is None or dimension < 1:
        raise TsplibParseError("missing or invalid DIMENSION")
    if ewt is None:
        raise TsplibParseError("missing EDGE_WEIGHT_TYPE")

    n = dimension
    if ewt == "EXPLICIT":
        if ewf not in _SUPPORTED_EXPLICIT:
            raise TsplibParseError(f"unsupported EDGE_WEIGHT_FORMAT {ewf}")
        mat = np.zeros((n, n), dtype=float)
        if ewf == "FULL_MATRIX":
            expected = n * n
            if len(weights) != expected:
                raise TsplibParseError(
                    f"FULL_MATRIX expects {expected} entries, found {len(weights)}"
                )
            mat = np.array(weights, dtype=float).reshape(n, n)
        elif ewf == "LOWER_DIAG_ROW":
            expected = n * (n + 1) // 2
            if len(weights) != expected:
                raise TsplibParseError(
                    f"LOWER_DIAG_ROW expects {expected} entries, found {len(weights)}"
                )
            it = iter(weights)
            for r in range(n):
                for c in range(r + 1):
                    v = next(it)
                    mat[r, c] = v
                    mat[c, r] = v
        else:  # UPPER_ROW, no diagonal
            expected = n * (n - 1) // 2
            if len(weights) != expected:
                raise TsplibParseError(
                    f"UPPER_ROW expects {expected} entries, found {len(weights)}"
                )
            it = iter(weights)
            for r in range(n):
                for c in range(r + 1, n):
                    v = next(it)
                    mat[r, c] = v
                    mat[c, r] = v
    elif ewt in _SUPPORTED_COORD:
        if len(coords) != n:
            raise TsplibParseError(
                f"expected {n} node coordinates, found {len(coords)}"
            )
        pts = [coords[idx] for idx in sorted(coords)]
        mat = np.zeros((n, n), dtype=float)
        for r in range(n):
            for c in range(r + 1, n):
                v = _coord_distance(ewt, pts[r], pts[c])
                mat[r, c] = v
                mat[c, r] = v
    else:
        raise TsplibParseError(f"unsupported EDGE_WEIGHT_TYPE {ewt}")

    return RawTsplib(name=name or "unnamed", dimension=n, edge_weights=mat)


def dump_tsplib(raw: RawTsplib) -> str:
    """Serialize a parsed matrix back to EXPLICIT FULL_MATRIX TSPLIB text."""
    out = [
        f"NAME: {raw.name}",
        "TYPE: TSP",
        f"DIMENSION: {raw.dimension}",
        "EDGE_WEIGHT_TYPE: EXPLICIT",
        "EDGE_WEIGHT_FORMAT: FULL_MATRIX",
        "EDGE_WEIGHT_SECTION",
    ]
    for row in raw.edge_weights:
        out.append(" " + " ".join(repr(float(x)) for x in row))
    out.append("EOF")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Instance construction
# ---------------------------------------------------------------------------


def fleet_for(n: int) -> FleetConfig:
    """Benchmark fleet rule: 3 vehicles of capacity 5 below 24 customers,
    6 vehicles of capacity 4 from 24 customers up."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return FleetConfig(3, 5) if n < 24 else FleetConfig(6, 4)


def _base_processing_times(raw: RawTsplib, seed: int) -> np.ndarray:
    """Per-customer base draws, uniform integers over the off-diagonal
    edge-weight range.  Depends only on (matrix, seed), never on the kind
    or replicate, so all variant kinds share the same base draws."""
    w = raw.edge_weights
    off = w[~np.eye(raw.dimension, dtype=bool)]
    d_min = int(round(float(off.min())))
    d_max = int(round(float(off.max())))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _BASE_STREAM])))
    return rng.integers(d_min, d_max + 1, size=raw.dimension - 1).astype(float)


def build_instance(raw: RawTsplib, variant: VariantSpec) -> Instance:
    """Build a VRP-RPD instance from a parsed matrix and a variant spec.

    Node 0 becomes the depot and the remaining dimension-1 nodes the
    customers.  Base times are multiplied by the kind's factor: 1, 2, 5, or a
    per-customer random integer in [1,10] / [1,20] drawn from a stream keyed
    by (seed, kind, replicate).
    """
    if raw.dimension < 2:
        raise ValueError("need at least 2 nodes (depot + 1 customer)")
    n = raw.dimension - 1
    base = _base_processing_times(raw, variant.seed)

    kind = variant.kind
    if kind == "base":
        p = base
    elif kind == "2x":
        p = base * 2.0
    elif kind == "5x":
        p = base * 5.0
    else:
        hi = 10 if kind == "1R10" else 20
        mstream = np.random.SeedSequence(
            [variant.seed, _MULT_STREAM, VARIANT_KINDS.index(kind), variant.replicate]
        )
        mrng = np.random.Generator(np.random.PCG64(mstream))
        p = base * mrng.integers(1, hi + 1, size=n)

    label = f"{raw.name}-{kind}-s{variant.seed}"
    if kind in ("1R10", "1R20"):
        label += f"-r{variant.replicate}"

    return Instance(
        n=n,
        d=tuple(tuple(float(x) for x in row) for row in raw.edge_weights),
        p=(0.0,) + tuple(float(x) for x in p),
        fleet=fleet_for(n),
        label=label,
        variant=kind,
        seed=variant.seed,
        replicate=variant.replicate,
    )


def load_tsplib_file(path) -> RawTsplib:
    return parse_tsplib(Path(path).read_text(encoding="utf-8"))
