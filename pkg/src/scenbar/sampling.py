"""Scenario dataset construction: uniform state samples and their successors.

A dataset holds N states drawn uniformly from the state box and, for each,
N_hat one-step successors produced with counter-derived noise seeds, so any
entry can be regenerated independently: successors[i][j] uses the seed
``noise_seed(run_seed, i, j)``. In compact mode the per-sample successor
cloud is reduced on the fly to the mean monomial feature vector (Q numbers
instead of N_hat * n), which is what the constraint assembly consumes; raw
mode keeps the successors themselves.

On-disk format ("BCDS1"): a fixed little-endian header

    magic "BCDS1" | flags u8 (bit0 compact, bit1 complete) | n u32 | k u32 |
    N u64 | N_hat u64 | run_seed u64 | config digest 32 bytes |
    completed_samples u64

followed by N fixed-length records of float64s: the state (n values) and the
payload (Q mean features, or N_hat * n raw successor coordinates). Files are
written in sample order and are byte-identical for identical
(run_seed, counts, system) regardless of chunking or worker count.
"""

from __future__ import annotations

import hashlib
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import InputError, MonomialBasis, Region
from .rng import noise_seed, state_seed, uniform01
from .systems import BlackBoxSystem, PluginProtocolError

MAGIC = b"BCDS1"
_HEADER = struct.Struct("<5sBII3Q32sQ")
FLAG_COMPACT = 1
FLAG_COMPLETE = 2
DEFAULT_CHUNK = 1 << 16
_BLOCK_ELEMENTS = 8_000_000  # per-worker successor buffer cap, in float64s


class DatasetError(RuntimeError):
    pass


class DatasetIncompleteError(DatasetError):
    """Raised after partial progress has been persisted to disk."""

    def __init__(self, message: str, path: str | None, completed: int):
        super().__init__(message)
        self.path = path
        self.completed = completed


def draw_states(x_region: Region, n: int, run_seed: int) -> np.ndarray:
    """n i.i.d. uniform samples over the box, deterministic in run_seed."""
    if n < 1:
        raise InputError("sample count must be >= 1")
    dim = x_region.dimension
    seeds = state_seed(run_seed, np.arange(n, dtype=np.uint64))
    lo = np.asarray(x_region.lower)
    hi = np.asarray(x_region.upper)
    out = np.empty((n, dim))
    for j in range(dim):
        u = np.asarray(uniform01(seeds, j))
        out[:, j] = lo[j] + (hi[j] - lo[j]) * u
    return out


def mean_successor_features(basis: MonomialBasis, successors: np.ndarray) -> np.ndarray:
    """(m, Q) mean feature rows for an (m, n_hat, n) successor block."""
    m, n_hat, _ = successors.shape
    out = np.empty((m, basis.count))
    for q, exps in enumerate(basis.exponents):
        col = np.ones((m, n_hat))
        for j, e in enumerate(exps):
            if e:
                col = col * successors[:, :, j] ** e
        out[:, q] = col.mean(axis=1)
    return out


def _successor_block(system, states, n_hat, run_seed, first_index):
    """(m, n_hat, n) successors for states[first_index : first_index + m]."""
    m, dim = states.shape
    i_idx = (first_index + np.arange(m, dtype=np.uint64))[:, None]
    j_idx = np.arange(n_hat, dtype=np.uint64)[None, :]
    seeds = noise_seed(run_seed, i_idx, j_idx).reshape(-1)
    rep = np.repeat(states, n_hat, axis=0)
    succ = system.step_batch(rep, seeds)
    return succ.reshape(m, n_hat, dim)


def _compute_range(system, states, n_hat, run_seed, start, basis, compact):
    """Payload rows for one contiguous index range (worker entry point)."""
    m, dim = states.shape
    block = max(1, int(_BLOCK_ELEMENTS // max(n_hat * dim, 1)))
    if compact:
        payload = np.empty((m, basis.count))
    else:
        payload = np.empty((m, n_hat * dim))
    for off in range(0, m, block):
        sub = states[off : off + block]
        succ = _successor_block(system, sub, n_hat, run_seed, start + off)
        if compact:
            payload[off : off + len(sub)] = mean_successor_features(basis, succ)
        else:
            payload[off : off + len(sub)] = succ.reshape(len(sub), -1)
    return payload


def _range_job(args):
    return _compute_range(*args)


def default_digest(
    system: BlackBoxSystem,
    x_region: Region,
    n: int,
    n_hat: int,
    run_seed: int,
    degree: int,
    compact: bool,
) -> bytes:
    """Digest binding a dataset to the run that produced it."""
    items = list(system.config_items()) + [
        ("x_lower", ",".join(repr(v) for v in x_region.lower)),
        ("x_upper", ",".join(repr(v) for v in x_region.upper)),
        ("n", n),
        ("n_hat", n_hat),
        ("run_seed", run_seed),
        ("degree", degree),
        ("compact", int(compact)),
    ]
    text = "\n".join(f"{k}={v}" for k, v in items)
    return hashlib.sha256(text.encode()).digest()


@dataclass
class ScenarioDataset:
    """In-memory dataset view; ``payload`` is mean features or raw successors."""

    samples: np.ndarray
    n_hat: int
    run_seed: int
    compact: bool
    degree: int
    payload: np.ndarray
    digest: bytes
    complete: bool = True

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def counts(self) -> tuple[int, int]:
        return (self.n, self.n_hat)

    def successors(self, i: int) -> np.ndarray:
        if self.compact:
            raise DatasetError("raw successors were not stored (compact dataset)")
        self._check_index(i)
        return self.payload[i].reshape(self.n_hat, self.dimension)

    def _check_index(self, i: int):
        if not 0 <= i < self.n:
            raise InputError(f"sample index {i} out of range [0, {self.n})")

    def _check_basis(self, basis: MonomialBasis):
        if basis.dimension != self.dimension or basis.degree != self.degree:
            raise InputError(
                f"basis (n={basis.dimension}, k={basis.degree}) does not match "
                f"dataset (n={self.dimension}, k={self.degree})"
            )

    def mean_features(self, basis: MonomialBasis, i: int) -> np.ndarray:
        self._check_index(i)
        self._check_basis(basis)
        if self.compact:
            return self.payload[i].copy()
        return mean_successor_features(
            basis, self.payload[i].reshape(1, self.n_hat, self.dimension)
        )[0]

    def mean_features_matrix(self, basis: MonomialBasis) -> np.ndarray:
        self._check_basis(basis)
        if self.compact:
            return self.payload
        return mean_successor_features(
            basis, self.payload.reshape(self.n, self.n_hat, self.dimension)
        )

    def save(self, path: str | os.PathLike):
        writer = DatasetWriter(
            path,
            dimension=self.dimension,
            degree=self.degree,
            n_total=self.n,
            n_hat=self.n_hat,
            run_seed=self.run_seed,
            digest=self.digest,
            compact=self.compact,
        )
        writer.append(self.samples, self.payload)
        writer.finalize(complete=self.complete)


def empirical_successor_features(
    ds: ScenarioDataset, basis: MonomialBasis, i: int
) -> np.ndarray:
    return ds.mean_features(basis, i)


class DatasetWriter:
    """Sequential record writer with a rewritable progress header."""

    def __init__(
        self,
        path,
        *,
        dimension: int,
        degree: int,
        n_total: int,
        n_hat: int,
        run_seed: int,
        digest: bytes,
        compact: bool,
        resume: bool = False,
    ):
        self.path = os.fspath(path)
        self.dimension = dimension
        self.degree = degree
        self.n_total = n_total
        self.n_hat = n_hat
        self.run_seed = run_seed
        self.digest = digest
        self.compact = compact
        q = MonomialBasis(dimension, degree).count
        self.record_len = dimension + (q if compact else n_hat * dimension)
        self.completed = 0
        if resume and os.path.exists(self.path):
            header = read_header(self.path)
            mine = self._header_tuple()
            theirs = (
                header["dimension"],
                header["degree"],
                header["n_total"],
                header["n_hat"],
                header["run_seed"],
                header["digest"],
                header["compact"],
            )
            if mine != theirs:
                raise DatasetError("existing dataset header does not match this run")
            if header["complete"]:
                self.completed = self.n_total
                self._file = None
                return
            self.completed = header["completed"]
            self._file = open(self.path, "r+b")
            self._file.truncate(_HEADER.size + 8 * self.record_len * self.completed)
            self._file.seek(0, os.SEEK_END)
        else:
            self._file = open(self.path, "w+b")
            self._write_header(complete=False)

    def _header_tuple(self):
        return (
            self.dimension,
            self.degree,
            self.n_total,
            self.n_hat,
            self.run_seed,
            self.digest,
            self.compact,
        )

    def _write_header(self, complete: bool):
        flags = (FLAG_COMPACT if self.compact else 0) | (FLAG_COMPLETE if complete else 0)
        self._file.seek(0)
        self._file.write(
            _HEADER.pack(
                MAGIC,
                flags,
                self.dimension,
                self.degree,
                self.n_total,
                self.n_hat,
                self.run_seed,
                self.digest,
                self.completed,
            )
        )

    def append(self, states: np.ndarray, payload: np.ndarray):
        if self._file is None:
            raise DatasetError("dataset already complete")
        rows = np.hstack([np.asarray(states, dtype="<f8"), np.asarray(payload, dtype="<f8")])
        if rows.shape[1] != self.record_len:
            raise DatasetError(f"record length {rows.shape[1]}, expected {self.record_len}")
        self._file.seek(0, os.SEEK_END)
        self._file.write(rows.tobytes())
        self.completed += len(rows)

    def finalize(self, complete: bool):
        if self._file is None:
            return
        self._write_header(complete=complete)
        self._file.flush()
        self._file.close()
        self._file = None


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise DatasetError("file too short for a dataset header")
    magic, flags, dim, degree, n_total, n_hat, run_seed, digest, completed = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise DatasetError(f"bad magic {magic!r}, expected {MAGIC!r}")
    return {
        "dimension": dim,
        "degree": degree,
        "n_total": n_total,
        "n_hat": n_hat,
        "run_seed": run_seed,
        "digest": digest,
        "compact": bool(flags & FLAG_COMPACT),
        "complete": bool(flags & FLAG_COMPLETE),
        "completed": completed,
    }


def load_dataset(path, *, allow_incomplete: bool = False) -> ScenarioDataset:
    header = read_header(path)
    dim = header["dimension"]
    q = MonomialBasis(dim, header["degree"]).count
    record_len = dim + (q if header["compact"] else header["n_hat"] * dim)
    rows = header["completed"] if not header["complete"] else header["n_total"]
    if not header["complete"] and not allow_incomplete:
        raise DatasetIncompleteError(
            f"dataset {path} is incomplete ({rows}/{header['n_total']} samples)",
            os.fspath(path),
            rows,
        )
    body = np.fromfile(path, dtype="<f8", count=rows * record_len, offset=_HEADER.size)
    body = body.reshape(rows, record_len)
    return ScenarioDataset(
        samples=body[:, :dim].copy(),
        n_hat=header["n_hat"],
        run_seed=header["run_seed"],
        compact=header["compact"],
        degree=header["degree"],
        payload=body[:, dim:].copy(),
        digest=header["digest"],
        complete=header["complete"],
    )


def collect_successors(
    system: BlackBoxSystem,
    samples: np.ndarray,
    n_hat: int,
    run_seed: int,
    *,
    basis: MonomialBasis | None = None,
    compact: bool = True,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    path: str | os.PathLike | None = None,
    digest: bytes = b"\0" * 32,
    resume: bool = False,
    progress=None,
) -> ScenarioDataset:
    """Generate n_hat successors per sample, chunk by chunk.

    With ``path`` set, records stream to disk and the build is resumable; a
    plugin failure persists the finished prefix and raises
    ``DatasetIncompleteError``. ``workers > 1`` farms chunk ranges out to
    processes (the per-entry seeds make the result order-independent).
    """
    if n_hat < 1:
        raise InputError("n_hat must be >= 1")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n_total, dim = samples.shape
    if dim != system.state_dimension:
        raise InputError(
            f"samples have dimension {dim}, system expects {system.state_dimension}"
        )
    if compact and basis is None:
        raise InputError("compact mode needs a monomial basis")
    degree = basis.degree if basis is not None else 0
    if basis is not None and basis.dimension != dim:
        raise InputError("basis dimension does not match samples")

    writer = None
    start_at = 0
    if path is not None:
        writer = DatasetWriter(
            path,
            dimension=dim,
            degree=degree,
            n_total=n_total,
            n_hat=n_hat,
            run_seed=run_seed,
            digest=digest,
            compact=compact,
            resume=resume,
        )
        start_at = writer.completed

    q = basis.count if basis is not None else 0
    payload_width = q if compact else n_hat * dim
    chunks = [
        (start, min(start + chunk_size, n_total))
        for start in range(start_at, n_total, chunk_size)
    ]
    payload_parts: list[np.ndarray] = []
    done = start_at
    try:
        if workers > 1 and len(chunks) > 1:
            jobs = [
                (system, samples[a:b], n_hat, run_seed, a, basis, compact)
                for a, b in chunks
            ]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for (a, b), part in zip(chunks, pool.map(_range_job, jobs)):
                    payload_parts.append(part)
                    if writer is not None:
                        writer.append(samples[a:b], part)
                    done = b
                    if progress is not None:
                        progress(done, n_total)
        else:
            for a, b in chunks:
                part = _compute_range(system, samples[a:b], n_hat, run_seed, a, basis, compact)
                payload_parts.append(part)
                if writer is not None:
                    writer.append(samples[a:b], part)
                done = b
                if progress is not None:
                    progress(done, n_total)
    except PluginProtocolError as exc:
        if writer is not None:
            writer.finalize(complete=False)
        raise DatasetIncompleteError(
            f"system failed after {done} of {n_total} samples: {exc}",
            os.fspath(path) if path is not None else None,
            done,
        ) from exc

    if writer is not None:
        writer.finalize(complete=True)
        return load_dataset(path)

    payload = (
        np.vstack(payload_parts) if payload_parts else np.empty((0, payload_width))
    )
    return ScenarioDataset(
        samples=samples,
        n_hat=n_hat,
        run_seed=run_seed,
        compact=compact,
        degree=degree,
        payload=payload,
        digest=digest,
        complete=True,
    )


def build_dataset(
    system: BlackBoxSystem,
    x_region: Region,
    n: int,
    n_hat: int,
    run_seed: int,
    basis: MonomialBasis,
    *,
    compact: bool = True,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    path=None,
    digest: bytes | None = None,
    resume: bool = False,
    progress=None,
) -> ScenarioDataset:
    """draw_states + collect_successors with a binding digest."""
    states = draw_states(x_region, n, run_seed)
    if digest is None:
        digest = default_digest(system, x_region, n, n_hat, run_seed, basis.degree, compact)
    return collect_successors(
        system,
        states,
        n_hat,
        run_seed,
        basis=basis,
        compact=compact,
        workers=workers,
        chunk_size=chunk_size,
        path=path,
        digest=digest,
        resume=resume,
        progress=progress,
    )
