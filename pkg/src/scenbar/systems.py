"""Black-box system interface and the built-in reference models.

Nothing outside this module ever sees the dynamics symbolically: a system is
an opaque ``step(x, noise_seed) -> successor`` map that is bit-deterministic
in its arguments. External simulators plug in as subprocesses speaking a
line protocol (see ``PluginSystem``).
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass

import numpy as np

from .core import InputError
from .rng import standard_normal


class PluginProtocolError(RuntimeError):
    """The external system executable violated the line protocol or died."""


class BlackBoxSystem:
    """Base class: deterministic one-step simulator.

    ``step`` must return bit-identical successors for identical
    ``(x, noise_seed)`` pairs; that contract is what makes datasets
    replayable.
    """

    state_dimension: int = 1

    def step(self, x, noise_seed: int) -> np.ndarray:
        raise NotImplementedError

    def step_batch(self, xs: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        """Vectorized hook; the default just loops over ``step``."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs[:, None]
        return np.stack([self.step(x, int(s)) for x, s in zip(xs, seeds)])

    def _check_state(self, x) -> np.ndarray:
        v = np.asarray(x, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1)
        if v.shape != (self.state_dimension,):
            raise InputError(
                f"state has dimension {v.shape}, expected ({self.state_dimension},)"
            )
        if not np.all(np.isfinite(v)):
            raise InputError("state must be finite")
        return v

    def config_items(self) -> list[tuple[str, object]]:
        """Key-value description used in dataset/report digests."""
        return [("system", type(self).__name__)]


_CONTROLLER = (-1.018e-6, 7.563e-5, -0.001872, 0.02022, 0.3944)


def controller_output(x):
    """Heater-valve command for the room model: a fixed quartic in the temperature."""
    c4, c3, c2, c1, c0 = _CONTROLLER
    x = np.asarray(x, dtype=np.float64)
    u = (((c4 * x + c3) * x + c2) * x + c1) * x + c0
    return float(u) if u.ndim == 0 else u


@dataclass
class RoomTemperatureSystem(BlackBoxSystem):
    """Closed-loop room temperature model with additive Gaussian noise.

    x+ = x + tau_s * (alpha_e (T_e - x) + alpha_h (T_heater - x) u(x)) + sigma_w w,
    w standard normal. ``sigma_w = 0`` turns the model deterministic.
    """

    tau_s: float = 5.0
    alpha_e: float = 8e-3
    alpha_h: float = 3.6e-3
    t_ambient: float = 15.0
    t_heater: float = 55.0
    sigma_w: float = 0.0125

    state_dimension = 1

    def deterministic_step(self, x):
        x = np.asarray(x, dtype=np.float64)
        u = controller_output(x)
        return x + self.tau_s * (
            self.alpha_e * (self.t_ambient - x)
            + self.alpha_h * (self.t_heater - x) * u
        )

    def step(self, x, noise_seed: int) -> np.ndarray:
        v = self._check_state(x)
        w = standard_normal(np.uint64(noise_seed))
        return self.deterministic_step(v) + self.sigma_w * w

    def step_batch(self, xs: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64).reshape(-1, 1)
        if not np.all(np.isfinite(xs)):
            raise InputError("state must be finite")
        w = np.asarray(standard_normal(np.asarray(seeds, dtype=np.uint64)))
        return self.deterministic_step(xs) + self.sigma_w * w[:, None]

    def config_items(self):
        return [
            ("system", "room"),
            ("tau_s", self.tau_s),
            ("alpha_e", self.alpha_e),
            ("alpha_h", self.alpha_h),
            ("t_ambient", self.t_ambient),
            ("t_heater", self.t_heater),
            ("sigma_w", self.sigma_w),
        ]


@dataclass
class LinearSystem(BlackBoxSystem):
    """Scalar linear map x+ = a x + sigma_w w, for oracle tests and smoke runs."""

    a: float = 0.5
    sigma_w: float = 0.0

    state_dimension = 1

    def deterministic_step(self, x):
        return self.a * np.asarray(x, dtype=np.float64)

    def step(self, x, noise_seed: int) -> np.ndarray:
        v = self._check_state(x)
        w = standard_normal(np.uint64(noise_seed))
        return self.a * v + self.sigma_w * w

    def step_batch(self, xs: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64).reshape(-1, 1)
        if not np.all(np.isfinite(xs)):
            raise InputError("state must be finite")
        w = np.asarray(standard_normal(np.asarray(seeds, dtype=np.uint64)))
        return self.a * xs + self.sigma_w * w[:, None]

    def config_items(self):
        return [("system", "linear"), ("a", self.a), ("sigma_w", self.sigma_w)]


class PluginSystem(BlackBoxSystem):
    """External simulator spoken to over stdin/stdout.

    Request lines are ``STEP x1 ... xn SEED s``, responses ``OK y1 ... yn``,
    one request per line with responses in request order. Any deviation
    (process exit, malformed line, wrong arity) raises
    ``PluginProtocolError``.
    """

    def __init__(self, command: str | list[str], state_dimension: int = 1):
        self.command = command
        self.state_dimension = state_dimension
        self._proc: subprocess.Popen | None = None

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            cmd = self.command if isinstance(self.command, list) else [self.command]
            self._proc = subprocess.Popen(
                cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def _parse_response(self, line: str) -> np.ndarray:
        if not line:
            raise PluginProtocolError("plugin closed its output stream")
        parts = line.split()
        if not parts or parts[0] != "OK":
            raise PluginProtocolError(f"malformed plugin response: {line!r}")
        if len(parts) != 1 + self.state_dimension:
            raise PluginProtocolError(
                f"plugin returned {len(parts) - 1} components, expected {self.state_dimension}"
            )
        try:
            return np.array([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise PluginProtocolError(f"non-numeric plugin response: {line!r}") from exc

    def step(self, x, noise_seed: int) -> np.ndarray:
        v = self._check_state(x)
        proc = self._ensure_proc()
        request = "STEP " + " ".join(repr(float(c)) for c in v) + f" SEED {int(noise_seed)}\n"
        try:
            proc.stdin.write(request)
            proc.stdin.flush()
            line = proc.stdout.readline().strip()
        except (BrokenPipeError, OSError) as exc:
            raise PluginProtocolError("plugin process is gone") from exc
        return self._parse_response(line)

    def step_batch(self, xs: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs[:, None]
        proc = self._ensure_proc()
        try:
            for x, s in zip(xs, seeds):
                proc.stdin.write(
                    "STEP " + " ".join(repr(float(c)) for c in x) + f" SEED {int(s)}\n"
                )
            proc.stdin.flush()
            out = [self._parse_response(proc.stdout.readline().strip()) for _ in xs]
        except (BrokenPipeError, OSError) as exc:
            raise PluginProtocolError("plugin process is gone") from exc
        return np.stack(out)

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def config_items(self):
        cmd = self.command if isinstance(self.command, str) else " ".join(self.command)
        return [("system", f"plugin:{cmd}"), ("state_dimension", self.state_dimension)]
