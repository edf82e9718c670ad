"""Trajectory sets and memory-window training datasets.

A trajectory set holds observed-variable samples at a constant step; a
memory-window dataset regroups them into (history stack, next state)
pairs.  Each window covers ``n_mem + 2`` consecutive samples: the first
``n_mem + 1`` form the network input, the last is the regression target.

The canonical in-memory layout of an input row is NEWEST FIRST:
``(z_k, z_{k-1}, ..., z_{k-n_mem})`` flattened, so the current state
occupies the leading ``d`` entries and the residual projection in the
network can read it off directly.  Windows are extracted oldest-first
from trajectories and reversed by the builder.

Both container types serialize to plain UTF-8 text with full round-trip
precision; see :func:`save_dataset` / :func:`save_trajectories` for the
formats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from memflow.dynamics import integrate_batch

__all__ = [
    "TrajectorySet",
    "MemoryWindowDataset",
    "SelectionStrategy",
    "sample_initial_conditions",
    "generate_trajectories",
    "build_dataset",
    "save_dataset",
    "load_dataset",
    "save_trajectories",
    "load_trajectories",
]


@dataclass(frozen=True)
class TrajectorySet:
    """Observed-variable trajectories sharing dimension and sample step.

    ``trajectories`` is a list of arrays of shape ``(K_i, d)``; lengths
    may differ between trajectories.
    """

    d: int
    delta: float
    trajectories: list

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("observed dimension must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        cleaned = []
        for i, traj in enumerate(self.trajectories):
            arr = np.asarray(traj, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != self.d:
                raise ValueError(
                    f"trajectory {i} has shape {arr.shape}, expected (K, {self.d})"
                )
            if arr.shape[0] < 1:
                raise ValueError(f"trajectory {i} is empty")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"trajectory {i} contains non-finite entries")
            cleaned.append(arr)
        object.__setattr__(self, "trajectories", cleaned)

    @property
    def n_traj(self):
        return len(self.trajectories)

    def lengths(self):
        return [t.shape[0] for t in self.trajectories]


@dataclass(frozen=True)
class MemoryWindowDataset:
    """Input/target pairs for the memory network.

    ``inputs`` has shape ``(J, d*(n_mem+1))`` with newest-first d-blocks;
    ``targets`` has shape ``(J, d)``.
    """

    d: int
    n_mem: int
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        if self.d < 1 or self.n_mem < 0:
            raise ValueError("require d >= 1 and n_mem >= 0")
        width = self.d * (self.n_mem + 1)
        if inputs.ndim != 2 or inputs.shape[1] != width:
            raise ValueError(
                f"inputs have shape {inputs.shape}, expected (J, {width})"
            )
        if targets.ndim != 2 or targets.shape != (inputs.shape[0], self.d):
            raise ValueError(
                f"targets have shape {targets.shape}, expected "
                f"({inputs.shape[0]}, {self.d})"
            )
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def size(self):
        return self.inputs.shape[0]

    @property
    def input_width(self):
        return self.d * (self.n_mem + 1)


@dataclass(frozen=True)
class SelectionStrategy:
    """How window start positions are chosen within each trajectory.

    ``deterministic`` takes every admissible start position sequentially;
    ``random`` draws ``per_trajectory`` distinct start positions uniformly
    without replacement, using ``seed``.
    """

    kind: str = "deterministic"
    per_trajectory: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("deterministic", "random"):
            raise ValueError(f"kind must be deterministic|random, got {self.kind!r}")
        if self.kind == "random":
            if self.per_trajectory is None or self.per_trajectory < 1:
                raise ValueError("random selection requires per_trajectory >= 1")


def sample_initial_conditions(domain, count, seed):
    """Uniform initial conditions on the domain box, deterministic in seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    return rng.uniform(domain.lower, domain.upper, size=(count, domain.n))


def generate_trajectories(spec, config, domain, n_traj, traj_len, seed):
    """Integrate ``n_traj`` random initial conditions and keep the observed part.

    Each trajectory holds the first ``d`` state components at times
    0, delta, ..., (traj_len - 1) * delta; the unobserved components are
    discarded.  Integration failures abort loudly with the offending
    trajectory index.
    """
    if traj_len < 1:
        raise ValueError(f"traj_len must be >= 1, got {traj_len}")
    if domain.n != spec.n:
        raise ValueError(
            f"domain dimension {domain.n} does not match system n={spec.n}"
        )
    x0s = sample_initial_conditions(domain, n_traj, seed)
    if traj_len == 1:
        observed = spec.observe(x0s)[:, None, :]
    else:
        full = integrate_batch(spec, config, x0s, traj_len - 1)
        observed = spec.observe(full)
    return TrajectorySet(
        d=spec.d, delta=config.delta, trajectories=list(observed)
    )


def _window_rows(traj, starts, n_mem):
    """Turn start positions into (newest-first input, target) rows."""
    inputs = []
    targets = []
    for k in sorted(int(s) for s in starts):
        window = traj[k : k + n_mem + 2]
        inputs.append(window[n_mem::-1].reshape(-1))
        targets.append(window[n_mem + 1])
    return inputs, targets


def build_dataset(trajs, n_mem, strategy):
    """Assemble a memory-window dataset from a trajectory set.

    Deterministic selection uses every start position, giving
    ``K_i - n_mem - 1`` windows per trajectory (trajectories shorter than
    ``n_mem + 2`` are skipped).  Random selection draws
    ``strategy.per_trajectory`` distinct start positions per trajectory
    and fails loudly when a trajectory cannot supply that many.
    """
    if n_mem < 0:
        raise ValueError(f"n_mem must be >= 0, got {n_mem}")
    d = trajs.d
    inputs: list = []
    targets: list = []
    rng = np.random.default_rng(strategy.seed) if strategy.kind == "random" else None
    for i, traj in enumerate(trajs.trajectories):
        available = traj.shape[0] - n_mem - 1  # number of admissible starts
        if strategy.kind == "deterministic":
            if available < 1:
                continue
            starts = range(available)
        else:
            j0 = strategy.per_trajectory
            if j0 > available:
                raise ValueError(
                    f"trajectory {i}: requested {j0} windows but only "
                    f"{max(available, 0)} start positions exist "
                    f"(length {traj.shape[0]}, n_mem {n_mem})"
                )
            starts = rng.choice(available, size=j0, replace=False)
        rows_in, rows_tgt = _window_rows(traj, starts, n_mem)
        inputs.extend(rows_in)
        targets.extend(rows_tgt)
    width = d * (n_mem + 1)
    inputs_arr = (
        np.array(inputs) if inputs else np.empty((0, width))
    )
    targets_arr = np.array(targets) if targets else np.empty((0, d))
    return MemoryWindowDataset(d=d, n_mem=n_mem, inputs=inputs_arr, targets=targets_arr)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def _parse_header(line, path, expected_keys):
    fields = line.split()
    if len(fields) != len(expected_keys):
        raise ValueError(
            f"{path}: header {line!r} must have fields {expected_keys}"
        )
    values = {}
    for field, key in zip(fields, expected_keys):
        if not field.startswith(key + "="):
            raise ValueError(f"{path}: expected '{key}=...', got {field!r}")
        values[key] = field[len(key) + 1 :]
    return values


def save_dataset(ds, path):
    """Write a dataset as text: header ``d=.. n_mem=.. J=..`` then one
    ``input ; target`` line per row, full round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d={ds.d} n_mem={ds.n_mem} J={ds.size}\n")
        for row_in, row_tgt in zip(ds.inputs, ds.targets):
            left = " ".join(_fmt(v) for v in row_in)
            right = " ".join(_fmt(v) for v in row_tgt)
            fh.write(f"{left} ; {right}\n")


def load_dataset(path):
    """Inverse of :func:`save_dataset`; malformed files are rejected with
    line context."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        meta = _parse_header(header, path, ["d", "n_mem", "J"])
        try:
            d, n_mem, j_total = int(meta["d"]), int(meta["n_mem"]), int(meta["J"])
        except ValueError as exc:
            raise ValueError(f"{path}: bad header values: {exc}") from None
        width = d * (n_mem + 1)
        inputs = np.empty((j_total, width))
        targets = np.empty((j_total, d))
        row = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if row >= j_total:
                raise ValueError(f"{path}:{lineno}: more rows than header J={j_total}")
            halves = line.split(";")
            if len(halves) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected 'input ; target', got {line!r}"
                )
            try:
                left = [float(v) for v in halves[0].split()]
                right = [float(v) for v in halves[1].split()]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if len(left) != width or len(right) != d:
                raise ValueError(
                    f"{path}:{lineno}: row widths ({len(left)}, {len(right)}) do "
                    f"not match header (d={d}, n_mem={n_mem})"
                )
            inputs[row] = left
            targets[row] = right
            row += 1
        if row != j_total:
            raise ValueError(f"{path}: header J={j_total} but found {row} rows")
    return MemoryWindowDataset(d=d, n_mem=n_mem, inputs=inputs, targets=targets)


def save_trajectories(trajs, path):
    """Write a trajectory set as text: header ``d=.. delta=.. n_traj=..``,
    then per trajectory a ``K=..`` line followed by K rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d={trajs.d} delta={_fmt(trajs.delta)} n_traj={trajs.n_traj}\n")
        for traj in trajs.trajectories:
            fh.write(f"K={traj.shape[0]}\n")
            for row in traj:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")


def load_trajectories(path):
    """Inverse of :func:`save_trajectories`."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    meta = _parse_header(lines[0], path, ["d", "delta", "n_traj"])
    try:
        d = int(meta["d"])
        delta = float(meta["delta"])
        n_traj = int(meta["n_traj"])
    except ValueError as exc:
        raise ValueError(f"{path}: bad header values: {exc}") from None
    trajectories = []
    pos = 1
    for t in range(n_traj):
        if pos >= len(lines):
            raise ValueError(f"{path}: expected {n_traj} trajectories, found {t}")
        if not lines[pos].startswith("K="):
            raise ValueError(f"{path}:{pos + 1}: expected 'K=...', got {lines[pos]!r}")
        try:
            k = int(lines[pos][2:])
        except ValueError as exc:
            raise ValueError(f"{path}:{pos + 1}: {exc}") from None
        pos += 1
        if pos + k > len(lines):
            raise ValueError(f"{path}: trajectory {t} truncated (K={k})")
        block = np.empty((k, d))
        for r in range(k):
            vals = lines[pos + r].split()
            if len(vals) != d:
                raise ValueError(
                    f"{path}:{pos + r + 1}: expected {d} values, got {len(vals)}"
                )
            block[r] = [float(v) for v in vals]
        trajectories.append(block)
        pos += k
    if any(lines[pos:]):
        raise ValueError(f"{path}:{pos + 1}: trailing content after last trajectory")
    return TrajectorySet(d=d, delta=delta, trajectories=trajectories)
