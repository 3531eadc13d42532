"""Command-line front end: counts, sample, verify, audit, lp-dump.

Configuration is a plain-text file of ``key=value`` lines (``#`` comments
allowed). Unknown keys are rejected. A digest of the semantic keys is
embedded in every dataset and report so that artifacts produced under one
configuration cannot silently be consumed under another.

Exit codes for ``verify``: 0 certified, 2 inconclusive, 1 error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass, fields

from . import bounds, jsonio, lp, sampling, scp, verify
from .core import InputError, MonomialBasis, Region, VerificationProblem
from .systems import BlackBoxSystem, LinearSystem, PluginSystem, RoomTemperatureSystem

_OPERATIONAL_KEYS = {"workers", "out", "chunk_size"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: str = "room"
    linear_a: float = 0.5
    sigma_w: float | None = None
    plugin_dimension: int = 1
    degree: int = 2
    horizon: int = 3
    rho: float = 0.1
    beta: float = 0.005
    beta_s: float = 0.005
    delta: float = 0.015
    epsilon: float = 0.03
    lipschitz_bound: float = 2160.0
    variance_bound: float = 0.005
    mu: float = -1e-3
    p_max: float | None = 12.0
    b_max: float | None = 1e3
    state_lower: tuple[float, ...] = (17.0,)
    state_upper: tuple[float, ...] = (30.0,)
    initial_lower: tuple[float, ...] = (17.0,)
    initial_upper: tuple[float, ...] = (18.0,)
    unsafe_lower: tuple[float, ...] = (28.0,)
    unsafe_upper: tuple[float, ...] = (30.0,)
    run_seed: int = 0
    tighten: bool = False
    compact: bool = True
    unsound_n: int | None = None
    unsound_nhat: int | None = None
    workers: int = 1
    out: str = "."
    chunk_size: int = sampling.DEFAULT_CHUNK

    def problem(self) -> VerificationProblem:
        return VerificationProblem(
            state_region=Region(self.state_lower, self.state_upper),
            initial_region=Region(self.initial_lower, self.initial_upper),
            unsafe_region=Region(self.unsafe_lower, self.unsafe_upper),
            horizon=self.horizon,
            rho=self.rho,
            beta=self.beta,
            beta_s=self.beta_s,
            delta=self.delta,
            epsilon=self.epsilon,
            lipschitz_bound=self.lipschitz_bound,
            variance_bound=self.variance_bound,
            mu=self.mu,
            p_max=self.p_max,
            b_max=self.b_max,
        )

    def build_system(self) -> BlackBoxSystem:
        if self.system == "room":
            kw = {} if self.sigma_w is None else {"sigma_w": self.sigma_w}
            return RoomTemperatureSystem(**kw)
        if self.system == "linear":
            sigma = 0.0 if self.sigma_w is None else self.sigma_w
            return LinearSystem(a=self.linear_a, sigma_w=sigma)
        if self.system.startswith("plugin:"):
            return PluginSystem(self.system[len("plugin:") :], self.plugin_dimension)
        raise ConfigError(f"unknown system {self.system!r}")

    def basis(self) -> MonomialBasis:
        return MonomialBasis(len(self.state_lower), self.degree)

    def canonical_items(self) -> list[tuple[str, str]]:
        items = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in _OPERATIONAL_KEYS:
                continue
            items.append((f.name, _canonical_value(getattr(self, f.name))))
        return items

    def digest_bytes(self) -> bytes:
        text = "\n".join(f"{k}={v}" for k, v in self.canonical_items())
        return hashlib.sha256(text.encode()).digest()

    def digest_hex(self) -> str:
        return self.digest_bytes().hex()


def _canonical_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, tuple):
        return ",".join(format(float(x), ".17g") for x in v)
    return str(v)


_BOOL_KEYS = {"tighten", "compact"}
_INT_KEYS = {"degree", "horizon", "run_seed", "plugin_dimension", "workers",
             "chunk_size", "unsound_n", "unsound_nhat"}
_FLOAT_KEYS = {"linear_a", "sigma_w", "rho", "beta", "beta_s", "delta", "epsilon",
               "lipschitz_bound", "variance_bound", "mu", "p_max", "b_max"}
_VECTOR_KEYS = {"state_lower", "state_upper", "initial_lower", "initial_upper",
                "unsafe_lower", "unsafe_upper"}
_OPTIONAL_KEYS = {"sigma_w", "p_max", "b_max", "unsound_n", "unsound_nhat"}
_STR_KEYS = {"system", "out"}


def parse_config(path: str) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _parse_value(key, value))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    _validate(cfg)
    return cfg


def _parse_value(key: str, value: str):
    if value.lower() == "none" and key in _OPTIONAL_KEYS:
        return None
    if key in _BOOL_KEYS:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError("expected true/false")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _VECTOR_KEYS:
        return tuple(float(p) for p in value.split(","))
    return value


def _validate(cfg: RunConfig) -> None:
    if cfg.epsilon > cfg.lipschitz_bound:
        raise ConfigError("epsilon exceeds lipschitz_bound")
    if not 0.0 < cfg.beta_s <= 1.0:
        raise ConfigError("beta_s must lie in (0, 1]")
    if cfg.degree < 0:
        raise ConfigError("degree must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    lengths = {len(getattr(cfg, k)) for k in _VECTOR_KEYS}
    if len(lengths) != 1:
        raise ConfigError("all region vectors must share one dimension")
    try:
        cfg.problem()
    except InputError as exc:
        raise ConfigError(str(exc)) from exc


def _counts(cfg: RunConfig) -> tuple[int, int, float]:
    problem = cfg.problem()
    q_dim = cfg.basis().count + 2
    n = bounds.minimal_scenario_count(
        bounds.SampleComplexityInputs(problem.epsilon_bar, problem.beta, q_dim)
    )
    n_hat = bounds.empirical_count(problem.variance_bound, problem.delta, problem.beta_s)
    return n, n_hat, problem.epsilon_bar


def cmd_counts(cfg: RunConfig) -> int:
    n, n_hat, eps_bar = _counts(cfg)
    print(f"epsilon          = {cfg.epsilon}")
    print(f"lipschitz_bound  = {cfg.lipschitz_bound}")
    print(f"epsilon_bar      = {eps_bar:.6g}")
    print(f"beta             = {cfg.beta}")
    print(f"beta_s           = {cfg.beta_s}")
    print(f"delta            = {cfg.delta}")
    print(f"variance_bound   = {cfg.variance_bound}")
    print(f"N  (scenario states)     = {n}")
    print(f"N^ (noise realizations)  = {n_hat}")
    if cfg.unsound_n is not None or cfg.unsound_nhat is not None:
        print(
            f"override (UNSOUND): N={cfg.unsound_n or n} N^={cfg.unsound_nhat or n_hat}"
        )
    return 0


def _dataset_path(cfg: RunConfig) -> str:
    return os.path.join(cfg.out, "dataset.bcds")


def cmd_sample(cfg: RunConfig) -> int:
    n, n_hat, _ = _counts(cfg)
    n = cfg.unsound_n if cfg.unsound_n is not None else n
    n_hat = cfg.unsound_nhat if cfg.unsound_nhat is not None else n_hat
    os.makedirs(cfg.out, exist_ok=True)
    path = _dataset_path(cfg)
    system = cfg.build_system()

    def progress(done, total):
        print(f"\rsamples {done}/{total}", end="", flush=True)

    try:
        sampling.build_dataset(
            system,
            cfg.problem().state_region,
            n,
            n_hat,
            cfg.run_seed,
            cfg.basis(),
            compact=cfg.compact,
            workers=cfg.workers,
            chunk_size=cfg.chunk_size,
            path=path,
            digest=cfg.digest_bytes(),
            resume=True,
            progress=progress,
        )
    except sampling.DatasetIncompleteError as exc:
        print(f"\nerror: {exc} (partial dataset kept at {exc.path})", file=sys.stderr)
        return 1
    print(f"\nwrote {path}")
    return 0


def _load_bound_dataset(cfg: RunConfig, path: str) -> sampling.ScenarioDataset:
    ds = sampling.load_dataset(path)
    if ds.digest != cfg.digest_bytes():
        raise ConfigError("dataset/config mismatch")
    return ds


def cmd_verify(cfg: RunConfig, dataset_path: str | None, grid: int, mc: int) -> int:
    if dataset_path is None:
        candidate = _dataset_path(cfg)
        if not os.path.exists(candidate):
            print("error: missing dataset path (run `scenbar sample` first)", file=sys.stderr)
            return 1
        dataset_path = candidate
    try:
        ds = _load_bound_dataset(cfg, dataset_path)
    except (sampling.DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    os.makedirs(cfg.out, exist_ok=True)
    system = cfg.build_system()
    report = verify.run_verification(
        cfg.problem(),
        system,
        cfg.basis(),
        cfg.run_seed,
        workers=cfg.workers,
        tighten=cfg.tighten,
        unsound_n=cfg.unsound_n,
        unsound_nhat=cfg.unsound_nhat,
        compact=cfg.compact,
        dataset=ds,
        config_digest=cfg.digest_hex(),
    )
    jsonio.dump_file(report.to_dict(), os.path.join(cfg.out, "report.json"))
    if report.certificate is not None:
        cert = report.certificate
        jsonio.dump_file(
            {
                "dimension": cert.basis.dimension,
                "degree": cert.basis.degree,
                "coefficients": list(cert.coefficients),
                "lam": cert.lam,
                "c": cert.c,
                "kappa": cert.kappa,
            },
            os.path.join(cfg.out, "certificate.json"),
        )
        if cfg.problem().dimension <= 2:
            table = verify.audit_certificate(
                cert, cfg.problem(), system, grid=grid, mc=mc, audit_seed=cfg.run_seed
            )
            table.write_csv(os.path.join(cfg.out, "audit.csv"))
    if report.failure_stage is not None:
        print(f"error at stage {report.failure_stage}: {report.failure_message}",
              file=sys.stderr)
        return 1
    status = report.verdict.status.value
    margin = report.verdict.decision_margin
    print(f"verdict: {status} (kappa*+margin = {margin:.6g})")
    if report.watermark:
        print(f"note: {report.watermark}")
    if status == "Certified":
        print(
            f"P(safe over horizon {cfg.horizon}) >= {report.verdict.probability_lower_bound}"
            f" with confidence {report.verdict.confidence}"
        )
        return 0
    return 2


def cmd_audit(cfg: RunConfig, certificate_path: str, grid: int, mc: int) -> int:
    data = jsonio.load_file(certificate_path)
    basis = MonomialBasis(data["dimension"], data["degree"])
    from .core import BarrierCertificate

    cert = BarrierCertificate(
        basis=basis,
        coefficients=tuple(data["coefficients"]),
        lam=data["lam"],
        c=data["c"],
        kappa=data["kappa"],
    )
    table = verify.audit_certificate(
        cert, cfg.problem(), cfg.build_system(), grid=grid, mc=mc, audit_seed=cfg.run_seed
    )
    os.makedirs(cfg.out, exist_ok=True)
    out_path = os.path.join(cfg.out, "audit.csv")
    table.write_csv(out_path)
    print(f"max B on initial region: {table.max_b_initial:.6g}")
    print(f"min B on unsafe region:  {table.min_b_unsafe:.6g}")
    print(f"max martingale slack:    {table.max_slack:.6g}")
    print(f"wrote {out_path}")
    return 0


def cmd_lp_dump(cfg: RunConfig, dataset_path: str | None, out_path: str | None) -> int:
    if dataset_path is None:
        dataset_path = _dataset_path(cfg)
    try:
        ds = _load_bound_dataset(cfg, dataset_path)
    except (sampling.DatasetError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    tighten = scp.tightened_offsets(cfg.problem()) if cfg.tighten else 0.0
    system_rows = scp.assemble(cfg.problem(), cfg.basis(), ds, tighten=tighten)
    os.makedirs(cfg.out, exist_ok=True)
    path = out_path or os.path.join(cfg.out, "program.lp")
    scp.dump_text(system_rows, path)
    print(f"wrote {path} ({system_rows.n_rows} rows)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenbar",
        description="Data-driven safety verification via scenario barrier certificates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="key=value configuration file")
        p.add_argument("--seed", type=int, default=None, help="override run_seed")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--tighten", action="store_true", default=None)
        p.add_argument("--unsound-N", dest="unsound_n", type=int, default=None)
        p.add_argument("--unsound-Nhat", dest="unsound_nhat", type=int, default=None)

    common(sub.add_parser("counts", help="print the required sample counts"))
    common(sub.add_parser("sample", help="draw states and successors into a dataset file"))
    p_verify = sub.add_parser("verify", help="run the verification pipeline on a dataset")
    common(p_verify)
    p_verify.add_argument("dataset", nargs="?", default=None, help="dataset file path")
    p_verify.add_argument("--grid", type=int, default=1001)
    p_verify.add_argument("--mc", type=int, default=256)
    p_audit = sub.add_parser("audit", help="mesh-audit a certificate against the system")
    common(p_audit)
    p_audit.add_argument("--certificate", required=True)
    p_audit.add_argument("--grid", type=int, default=1001)
    p_audit.add_argument("--mc", type=int, default=256)
    p_dump = sub.add_parser("lp-dump", help="write the assembled program in text form")
    common(p_dump)
    p_dump.add_argument("dataset", nargs="?", default=None)
    p_dump.add_argument("--lp-out", default=None)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> None:
    if args.seed is not None:
        cfg.run_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out = args.out
    if args.tighten:
        cfg.tighten = True
    if args.unsound_n is not None:
        cfg.unsound_n = args.unsound_n
    if args.unsound_nhat is not None:
        cfg.unsound_nhat = args.unsound_nhat


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        _apply_overrides(cfg, args)
        _validate(cfg)
        if args.command == "counts":
            return cmd_counts(cfg)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.dataset, args.grid, args.mc)
        if args.command == "audit":
            return cmd_audit(cfg, args.certificate, args.grid, args.mc)
        if args.command == "lp-dump":
            return cmd_lp_dump(cfg, args.dataset, args.lp_out)
        raise AssertionError(args.command)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
