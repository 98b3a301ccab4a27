"""Monte Carlo sampling of the composite channel and empirical estimators.

Samples follow the phase-aligned model directly::

    h = sum_k a_k b_k + (g_r + j g_i),
    a_k = sqrt(Gamma(m1, omega1/m1)),  b_k = sqrt(Gamma(m2, omega2/m2)),
    g_r, g_i ~ N(0, sigma_h^2 / 2).

Generation is split into ``workers`` shares, each driven by its own PCG64
stream spawned from ``SeedSequence(seed)``.  A batch is bit-reproducible for a
fixed ``(seed, params, count, workers)``; the number of threads actually used
does not affect the result.
"""
from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from . import __version__
from .channel import ChannelParams, ComplexChannelValue, validate, wrap_phase

Projection = Literal["real", "imag", "magnitude", "phase"]
PROJECTIONS: tuple[str, ...] = ("real", "imag", "magnitude", "phase")

RNG_NAME = "numpy.random.PCG64"
RAW_MAGIC = b"RISMC1\0\0"
BYTES_PER_SAMPLE = 16
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
CHUNK = 1 << 18


class ResourceError(MemoryError):
    """The requested batch does not fit the configured memory budget."""


def default_workers() -> int:
    env = os.environ.get("RIS_STATS_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("RIS_STATS_THREADS must be ≥ 1")
        return n
    return os.cpu_count() or 1


def sample_nakagami_envelope(m: int, omega: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Nakagami-``m`` envelopes as the square root of Gamma variates."""
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise ValueError("m must be a positive integer")
    if not omega > 0:
        raise ValueError("omega must be positive")
    return np.sqrt(rng.gamma(m, omega / m, size=count))


def _draw(params: ChannelParams, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = params.n_elements
    a = rng.gamma(params.m1, params.omega1 / params.m1, size=(count, n))
    b = rng.gamma(params.m2, params.omega2 / params.m2, size=(count, n))
    cascade = np.sqrt(a * b).sum(axis=1)
    g = rng.normal(0.0, math.sqrt(params.sigma_h_sq / 2.0), size=(count, 2))
    return cascade + g[:, 0], g[:, 1]


def _shares(count: int, workers: int) -> list[int]:
    base, extra = divmod(count, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def _worker_chunks(params: ChannelParams, share: int, seq: np.random.SeedSequence) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.Generator(np.random.PCG64(seq))
    done = 0
    while done < share:
        k = min(CHUNK, share - done)
        yield _draw(params, k, rng)
        done += k


@dataclass(frozen=True)
class SampleBatch:
    """Complex channel draws with seed provenance.

    Samples are held as two read-only float arrays; ``samples`` yields
    :class:`ComplexChannelValue` views on demand.
    """

    re: np.ndarray
    im: np.ndarray
    params: ChannelParams
    seed: int
    workers: int
    rng: str = RNG_NAME

    @property
    def count(self) -> int:
        return int(self.re.size)

    def __len__(self) -> int:
        return self.count

    @property
    def samples(self) -> Iterator[ComplexChannelValue]:
        for r, i in zip(self.re.tolist(), self.im.tolist()):
            yield ComplexChannelValue(r, i)

    def __getitem__(self, k: int) -> ComplexChannelValue:
        return ComplexChannelValue(float(self.re[k]), float(self.im[k]))

    def project(self, projection: str) -> np.ndarray:
        if projection == "real":
            return self.re
        if projection == "imag":
            return self.im
        if projection == "magnitude":
            return np.hypot(self.re, self.im)
        if projection == "phase":
            return wrap_phase(np.arctan2(self.im, self.re))
        raise ValueError(f"projection must be one of {PROJECTIONS}, got {projection!r}")

    def provenance(self) -> dict:
        return {
            "version": __version__,
            "params": self.params.to_dict(),
            "seed": self.seed,
            "count": self.count,
            "workers": self.workers,
            "rng": self.rng,
        }

    def summary(self) -> dict:
        """Provenance plus mean/variance of each projection."""
        moments = {}
        for p in PROJECTIONS:
            x = self.project(p)
            moments[p] = {"mean": float(np.mean(x)), "variance": float(np.var(x))}
        return {**self.provenance(), "projection_moments": moments}

    def to_json(self) -> str:
        return json.dumps(self.summary())

    def write_raw(self, path) -> None:
        with RawSampleWriter(path, self.count) as w:
            w.write(self.re, self.im)


def sample_composite(
    params: ChannelParams,
    count: int,
    seed: int,
    *,
    workers: int | None = None,
    threads: int | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> SampleBatch:
    """Draw ``count`` composite-channel samples.

    ``workers`` fixes how the batch is split into independent substreams (and
    hence the exact values); ``threads`` only caps concurrency.
    """
    validate(params)
    if not (isinstance(count, (int, np.integer)) and count >= 1):
        raise ValueError("count must be a positive integer")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    need = count * BYTES_PER_SAMPLE
    if need > memory_budget:
        raise ResourceError(
            f"{count} samples need {need} bytes, over the {memory_budget}-byte budget; use streaming"
        )
    workers = default_workers() if workers is None else workers
    workers = max(1, min(workers, count))
    threads = workers if threads is None else max(1, threads)
    seqs = np.random.SeedSequence(seed).spawn(workers)
    shares = _shares(count, workers)
    offsets = np.concatenate([[0], np.cumsum(shares)])
    re = np.empty(count)
    im = np.empty(count)

    def run(i: int) -> None:
        pos = offsets[i]
        for r, j in _worker_chunks(params, shares[i], seqs[i]):
            re[pos : pos + r.size] = r
            im[pos : pos + r.size] = j
            pos += r.size

    with ThreadPoolExecutor(max_workers=min(threads, workers)) as pool:
        list(pool.map(run, range(workers)))
    re.flags.writeable = False
    im.flags.writeable = False
    return SampleBatch(re, im, params, int(seed), workers)


# -- raw binary stream -----------------------------------------------------------


class RawSampleWriter:
    """Writes ``RISMC1\\0\\0``, a little-endian uint64 count, then (re, im) float64 pairs."""

    def __init__(self, path, count: int):
        self._fh = open(path, "wb")
        self._fh.write(RAW_MAGIC)
        self._fh.write(struct.pack("<Q", count))
        self._expected = count
        self._written = 0

    def write(self, re: np.ndarray, im: np.ndarray) -> None:
        pairs = np.empty((re.size, 2), dtype="<f8")
        pairs[:, 0] = re
        pairs[:, 1] = im
        self._fh.write(pairs.tobytes())
        self._written += re.size

    def close(self) -> None:
        self._fh.close()
        if self._written != self._expected:
            raise IOError(f"raw stream holds {self._written} samples, header says {self._expected}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_raw(path) -> tuple[np.ndarray, np.ndarray]:
    """Memory-map a raw sample file and return ``(re, im)`` views."""
    with open(path, "rb") as fh:
        head = fh.read(16)
    if head[:8] != RAW_MAGIC:
        raise ValueError("not a RISMC1 sample file")
    (count,) = struct.unpack("<Q", head[8:])
    data = np.memmap(path, dtype="<f8", mode="r", offset=16, shape=(count, 2))
    return data[:, 0], data[:, 1]


def stream_composite(
    params: ChannelParams, count: int, seed: int, path, *, workers: int | None = None
) -> int:
    """Write ``count`` samples to ``path`` without holding them in memory.

    Uses the same substreams as :func:`sample_composite`, so the file content
    equals ``sample_composite(...).write_raw(path)`` for equal ``workers``.
    """
    validate(params)
    workers = default_workers() if workers is None else workers
    workers = max(1, min(workers, count))
    seqs = np.random.SeedSequence(seed).spawn(workers)
    with RawSampleWriter(path, count) as w:
        for share, seq in zip(_shares(count, workers), seqs):
            for r, j in _worker_chunks(params, share, seq):
                w.write(r, j)
    return count


# -- empirical estimators --------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalDensity:
    """Density-normalised histogram with per-bin binomial standard errors."""

    bin_edges: np.ndarray
    densities: np.ndarray
    std_errors: np.ndarray
    count: int
    projection: str = ""
    provenance: dict = field(default_factory=dict)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def mass(self) -> float:
        return math.fsum(self.densities * self.widths)

    def to_csv(self) -> str:
        lines = [f"# {k}: {json.dumps(v)}" for k, v in self.provenance.items()]
        lines.append("bin_left,bin_right,density,std_error")
        for lo, hi, d, s in zip(self.bin_edges[:-1], self.bin_edges[1:], self.densities, self.std_errors):
            lines.append(f"{float(lo)!r},{float(hi)!r},{float(d)!r},{float(s)!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                **self.provenance,
                "projection": self.projection,
                "count": self.count,
                "bin_edges": self.bin_edges.tolist(),
                "densities": self.densities.tolist(),
                "std_errors": self.std_errors.tolist(),
            }
        )


def density_from_counts(counts: np.ndarray, edges: np.ndarray, projection: str = "", provenance=None) -> EmpiricalDensity:
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if n == 0:
        raise ValueError("histogram holds no samples")
    w = np.diff(edges)
    p = counts / n
    dens = p / w
    se = np.sqrt(p * (1.0 - p) / n) / w
    return EmpiricalDensity(np.asarray(edges, dtype=float), dens, se, n, projection, dict(provenance or {}))


def bin_edges_for(x: np.ndarray, bins) -> np.ndarray:
    """Freedman-Diaconis edges by default; an int gives uniform bins."""
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise ValueError("degenerate sample range: all samples equal")
    if isinstance(bins, str):
        edges = np.histogram_bin_edges(x, bins=bins)
        if edges.size - 1 < 10:
            edges = np.linspace(lo, hi, 11)
        return edges
    if isinstance(bins, (int, np.integer)):
        if bins < 10:
            raise ValueError("bins must be ≥ 10")
        return np.linspace(lo, hi, int(bins) + 1)
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 11 or np.any(np.diff(edges) <= 0):
        raise ValueError("explicit bin edges must be strictly increasing with ≥ 10 bins")
    return edges


def histogram(batch: SampleBatch, projection: str, bins="fd") -> EmpiricalDensity:
    """Density histogram of one projection of ``batch``.

    Explicit edges must cover every sample, so that the mass is exactly one.
    """
    x = batch.project(projection)
    edges = bin_edges_for(x, bins)
    if x.min() < edges[0] or x.max() > edges[-1]:
        raise ValueError("explicit bin edges do not cover the sample range")
    counts, _ = np.histogram(x, bins=edges)
    return density_from_counts(counts, edges, projection, {**batch.provenance(), "projection": projection})


@dataclass(frozen=True)
class ECDF:
    """Right-continuous empirical CDF."""

    x: np.ndarray

    def __call__(self, t):
        return np.searchsorted(self.x, t, side="right") / self.x.size


def ecdf(batch: SampleBatch, projection: str) -> ECDF:
    x = np.sort(batch.project(projection))
    if x.size < 1:
        raise ValueError("ecdf needs at least one sample")
    return ECDF(x)


def _project_arrays(re: np.ndarray, im: np.ndarray, projection: str) -> np.ndarray:
    if projection == "real":
        return np.asarray(re)
    if projection == "imag":
        return np.asarray(im)
    if projection == "magnitude":
        return np.hypot(re, im)
    if projection == "phase":
        return wrap_phase(np.arctan2(im, re))
    raise ValueError(f"projection must be one of {PROJECTIONS}, got {projection!r}")


def histogram_from_raw(path, projection: str, bins="fd", provenance=None) -> EmpiricalDensity:
    """Histogram of a raw sample file in two chunked passes.

    Freedman-Diaconis widths come from the first ``CHUNK * 4`` samples; the
    edges then span the full sample range, so every sample is counted.
    """
    re, im = read_raw(path)
    n = re.size
    step = CHUNK * 4
    lo, hi = math.inf, -math.inf
    for k in range(0, n, step):
        x = _project_arrays(re[k : k + step], im[k : k + step], projection)
        lo, hi = min(lo, float(x.min())), max(hi, float(x.max()))
    if not hi > lo:
        raise ValueError("degenerate sample range: all samples equal")
    if isinstance(bins, str):
        pilot = _project_arrays(re[:step], im[:step], projection)
        width = np.diff(np.histogram_bin_edges(pilot, bins=bins)[:2])[0]
        n_bins = max(10, int(math.ceil((hi - lo) / width)))
        edges = np.linspace(lo, hi, n_bins + 1)
    else:
        edges = bin_edges_for(np.array([lo, hi]), bins)
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    for k in range(0, n, step):
        x = _project_arrays(re[k : k + step], im[k : k + step], projection)
        counts += np.histogram(x, bins=edges)[0]
    return density_from_counts(counts, edges, projection, provenance)
