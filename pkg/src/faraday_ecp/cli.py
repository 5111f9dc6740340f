"""Command-line front end.

    faraday-ecp phases --operating-point --kappa 1
    faraday-ecp round --alpha2 0.8 --round-index 2
    faraday-ecp run --alpha2 0.8 --rounds 2 --eta 1
    faraday-ecp sweep -K 5 -N 10 --out sweep.csv
    faraday-ecp compare -N 5 --rounds 5 --eta 0.8
    faraday-ecp mc --trials 1000000 --seed 42 --rounds 3

Every subcommand also takes ``--config FILE``: a flat ``key = value`` file
whose keys are flag names without the leading dashes (``alpha2 = 0.8``,
``eta-a = 0.9``). Flags given on the command line override the file.

Exit codes: 0 ok, 2 invalid input, 3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .cavity import CavityParams, faraday_phases, interaction_gate
from .errors import ConsistencyError, ECPError
from .protocol import (
    DetectionModel,
    ProtocolConfig,
    build_auxiliary_photon,
    build_initial_state,
    coefficients_for_round,
    largest_schmidt_coefficient,
    peng_success_probability,
    run_protocol_exact,
    run_round,
    total_success_probability,
)
from .stochastic import convergence_check, sample_protocol

SCHEMA_VERSION = 1
# default operating settings: 80% detectors, five rounds
DEFAULT_ETA = 0.8
DEFAULT_ROUNDS = 5


class UsageError(Exception):
    """Invalid flag value; the message names the flag."""


def _cjson(z: complex) -> list[float]:
    return [z.real, z.imag]


def _state_json(state) -> list[dict]:
    return [
        {"key": dict(zip(state.layout.names, key)), "amplitude": _cjson(amp)}
        for key, amp in sorted(state.terms.items())
    ]


# ---------------------------------------------------------------- argument parsing


def _protocol_flags(p: argparse.ArgumentParser, rounds: bool = True) -> None:
    g = p.add_argument_group("protocol")
    g.add_argument("--alpha2", type=float, default=0.5,
                   help="|alpha|^2 of the input state, real coefficients (default 0.5)")
    g.add_argument("--alpha", type=complex, default=None,
                   help="complex alpha, e.g. 0.8+0.1j; requires --beta and overrides --alpha2")
    g.add_argument("--beta", type=complex, default=None, help="complex beta (with --alpha)")
    g.add_argument("-N", "--n-photons", "--n", dest="n_photons", type=int, default=2,
                   help="photons in the GHZ state (default 2)")
    if rounds:
        g.add_argument("-K", "--rounds", dest="rounds", type=int, default=DEFAULT_ROUNDS,
                       help=f"maximum concentration rounds (default {DEFAULT_ROUNDS})")
    g.add_argument("--eta", type=float, default=None, help="set both detector efficiencies")
    g.add_argument("--eta-a", type=float, default=None, help=f"atom detection efficiency (default {DEFAULT_ETA})")
    g.add_argument("--eta-p", type=float, default=None, help=f"photon detection efficiency (default {DEFAULT_ETA})")
    g.add_argument("--detection-model", choices=[m.value for m in DetectionModel], default="final",
                   help="final: one eta_a*eta_p per success (default); per-round: (eta_a*eta_p)^k")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="key = value file; flags override it")
    p.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faraday-ecp", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phases", help="Faraday phases of the atom-cavity reflection")
    _common(p)
    p.add_argument("--operating-point", action="store_true",
                   help="omega_0 = omega_c, omega_p = omega_c - kappa/2, g = kappa/2, gamma = 0")
    p.add_argument("--kappa", type=float, default=1.0, help="cavity damping rate (default 1)")
    p.add_argument("--gamma", type=float, default=0.0, help="atomic decay rate (default 0)")
    p.add_argument("--omega-c", type=float, default=0.0, help="cavity frequency (default 0)")
    p.add_argument("--omega-0", type=float, default=None, help="atomic frequency (default omega-c)")
    p.add_argument("--omega-p", type=float, default=None, help="photon frequency (default omega-c - kappa/2)")
    p.add_argument("--g", type=float, default=None, help="atom-cavity coupling (default kappa/2)")
    p.add_argument("--tol", type=float, default=0.01, help="allowed | 1 - |r| | (default 0.01)")
    p.add_argument("--format", choices=["json", "text"], default="json")

    p = sub.add_parser("round", help="one exact concentration round")
    _common(p)
    _protocol_flags(p, rounds=False)
    p.add_argument("--round-index", type=int, default=1, help="round k to simulate (default 1)")

    p = sub.add_parser("run", help="exact multi-round protocol, checked against closed form")
    _common(p)
    _protocol_flags(p)

    p = sub.add_parser("sweep", help="success probabilities over a real alpha grid as CSV")
    _common(p)
    _protocol_flags(p)
    p.add_argument("--alpha-min", type=float, default=0.01)
    p.add_argument("--alpha-max", type=float, default=0.99)
    p.add_argument("--steps", type=int, default=99)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("compare", help="this protocol versus the two-copy rival")
    _common(p)
    _protocol_flags(p)

    p = sub.add_parser("mc", help="seeded Monte Carlo with detector sampling")
    _common(p)
    _protocol_flags(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None, help="required; any 64-bit integer")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _config_tokens(path: Path) -> list[str]:
    tokens = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config: line {lineno} is not 'key = value': {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.lstrip("-")
        if value.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            tokens.append(f"{flag}={value}")
    return tokens


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        # file values go first so explicit flags, parsed later, win
        idx = argv.index(args.command)
        args = parser.parse_args(argv[: idx + 1] + _config_tokens(args.config) + argv[idx + 1:])
    return args


def _eta(args, name: str) -> float:
    value = getattr(args, name)
    if value is None:
        value = args.eta if args.eta is not None else DEFAULT_ETA
    flag = "--" + name.replace("_", "-") if getattr(args, name) is not None else "--eta"
    if not 0 <= value <= 1:
        raise UsageError(f"{flag} must lie in [0, 1], got {value}")
    return value


def config_from_args(args) -> ProtocolConfig:
    if args.n_photons < 2:
        raise UsageError(f"--n-photons must be >= 2, got {args.n_photons}")
    rounds = getattr(args, "rounds", 1)
    if rounds < 1:
        raise UsageError(f"--rounds must be >= 1, got {rounds}")
    eta_a, eta_p = _eta(args, "eta_a"), _eta(args, "eta_p")
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise UsageError("--alpha and --beta must be given together")
        try:
            return ProtocolConfig(args.alpha, args.beta, args.n_photons, rounds, eta_a, eta_p)
        except ECPError as exc:
            raise UsageError(f"--alpha/--beta: {exc}") from exc
    if not 0 < args.alpha2 < 1:
        raise UsageError(f"--alpha2 must lie strictly between 0 and 1, got {args.alpha2}")
    return ProtocolConfig.from_alpha2(args.alpha2, n_photons=args.n_photons, max_rounds=rounds,
                                      eta_a=eta_a, eta_p=eta_p)


def cavity_from_args(args) -> CavityParams:
    if args.kappa <= 0:
        raise UsageError(f"--kappa must be > 0, got {args.kappa}")
    if args.operating_point:
        return CavityParams.operating_point(args.kappa, args.omega_c)
    omega_0 = args.omega_c if args.omega_0 is None else args.omega_0
    omega_p = args.omega_c - args.kappa / 2 if args.omega_p is None else args.omega_p
    g = args.kappa / 2 if args.g is None else args.g
    for flag, v in (("--gamma", args.gamma), ("--g", g)):
        if v < 0:
            raise UsageError(f"{flag} must be >= 0, got {v}")
    return CavityParams(args.kappa, args.gamma, args.omega_c, omega_0, omega_p, g)


# ---------------------------------------------------------------- commands


def cmd_phases(args) -> dict:
    params = cavity_from_args(args)
    phases = faraday_phases(params, tol_mag=args.tol)
    gate = interaction_gate(phases)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "faraday_phases",
        "params": {
            "kappa": params.kappa, "gamma": params.gamma, "omega_c": params.omega_c,
            "omega_0": params.omega_0, "omega_p": params.omega_p, "g": params.g,
        },
        **phases.to_dict(),
        "gate": {f"{p},{a}": _cjson(v) for (p, a), v in gate.items()},
    }


def cmd_round(args) -> dict:
    cfg = config_from_args(args)
    k = args.round_index
    if k < 1:
        raise UsageError(f"--round-index must be >= 1, got {k}")
    coeffs = coefficients_for_round(k, cfg.alpha, cfg.beta)
    state = build_initial_state(coeffs.alpha_k, coeffs.beta_k, cfg.n_photons)
    aux = build_auxiliary_photon(k, cfg.alpha, cfg.beta)
    outcomes = run_round(state, aux, coeffs)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "round",
        "round_index": k,
        "n_photons": cfg.n_photons,
        "alpha_k": _cjson(coeffs.alpha_k),
        "beta_k": _cjson(coeffs.beta_k),
        "outcomes": [
            {
                "label": o.label,
                "detector_outcome": {"photon": o.detector_outcome[0], "atom": o.detector_outcome[1]},
                "probability": o.probability,
                "corrected": o.corrected,
                "largest_schmidt_coefficient": largest_schmidt_coefficient(o.post_state, {"a1"}),
                "post_state": _state_json(o.post_state),
            }
            for o in outcomes
        ],
    }


def cmd_run(args) -> dict:
    cfg = config_from_args(args)
    return run_protocol_exact(cfg, args.detection_model).report.to_dict()


@dataclass(frozen=True)
class SweepSpec:
    alpha_min: float = 0.01
    alpha_max: float = 0.99
    steps: int = 99
    rounds: int = DEFAULT_ROUNDS
    n_photons: int = 2
    eta_a: float = DEFAULT_ETA
    eta_p: float = DEFAULT_ETA
    detection_model: DetectionModel = DetectionModel.FINAL

    def __post_init__(self):
        if not 0 < self.alpha_min < self.alpha_max < 1:
            raise UsageError(f"need 0 < --alpha-min < --alpha-max < 1, got {self.alpha_min}, {self.alpha_max}")
        if self.steps < 2:
            raise UsageError(f"--steps must be >= 2, got {self.steps}")

    def alphas(self) -> list[float]:
        span = self.alpha_max - self.alpha_min
        return [self.alpha_min + span * i / (self.steps - 1) for i in range(self.steps)]


def sweep_header(rounds: int) -> list[str]:
    return ["alpha", "alpha_sq", "p_total_ours", "p_total_rival"] + [f"per_round_p{k}" for k in range(1, rounds + 1)]


def sweep_row(spec: SweepSpec, alpha: float) -> list[float]:
    """Real alpha, beta = sqrt(1 - alpha^2). Per-round columns include the
    detection-efficiency factor, so they sum to p_total_ours."""
    cfg = ProtocolConfig(alpha, math.sqrt(1 - alpha * alpha), spec.n_photons, spec.rounds, spec.eta_a, spec.eta_p)
    report = total_success_probability(cfg, spec.detection_model)
    return [alpha, alpha * alpha, report.total_success, report.rival_success] + [r.p_detected for r in report.per_round]


def sweep_rows(spec: SweepSpec, workers: int = 1) -> list[list[float]]:
    alphas = spec.alphas()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda a: sweep_row(spec, a), alphas))
    return [sweep_row(spec, a) for a in alphas]


def write_sweep_csv(spec: SweepSpec, fh, workers: int = 1) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(sweep_header(spec.rounds))
    for row in sweep_rows(spec, workers):
        writer.writerow([f"{v:.12g}" for v in row])


def _sweep_spec(args) -> SweepSpec:
    cfg = config_from_args(args)
    return SweepSpec(args.alpha_min, args.alpha_max, args.steps, cfg.max_rounds, cfg.n_photons,
                     cfg.eta_a, cfg.eta_p, DetectionModel(args.detection_model))


def cmd_compare(args) -> dict:
    cfg = config_from_args(args)
    report = total_success_probability(cfg, args.detection_model)
    ours, rival = report.total_success, report.rival_success
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "compare",
        "alpha2": abs(cfg.alpha) ** 2,
        "n_photons": cfg.n_photons,
        "rounds": cfg.max_rounds,
        "eta_a": cfg.eta_a,
        "eta_p": cfg.eta_p,
        "detection_model": report.detection_model.value,
        "p_total_ours": ours,
        "p_total_rival": rival,
        "ratio": ours / rival if rival > 0 else None,
    }


def cmd_mc(args) -> dict:
    if args.seed is None:
        raise UsageError("--seed is required for mc")
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    cfg = config_from_args(args)
    report = sample_protocol(cfg, args.detection_model, args.trials, args.seed, workers=args.workers)
    out = report.to_dict()
    if report.n_trials >= 100:
        check = convergence_check(report)
        out["convergence"] = {
            "passed": check.passed,
            "threshold": check.threshold,
            "z_scores": [z if math.isfinite(z) else None for z in check.z_scores],
            "total_z": check.total_z if math.isfinite(check.total_z) else None,
            "degenerate_rounds": check.degenerate_rounds,
        }
    return out


COMMANDS = {"phases": cmd_phases, "round": cmd_round, "run": cmd_run, "compare": cmd_compare, "mc": cmd_mc}


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--out: cannot write {out}: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        if args.command == "sweep":
            spec = _sweep_spec(args)
            if args.out is None:
                write_sweep_csv(spec, sys.stdout, args.workers)
            else:
                try:
                    with open(args.out, "w", encoding="utf-8", newline="") as fh:
                        write_sweep_csv(spec, fh, args.workers)
                except OSError as exc:
                    raise UsageError(f"--out: cannot write {args.out}: {exc}") from exc
            return 0
        result = COMMANDS[args.command](args)
        if args.command == "phases" and args.format == "text":
            text = "".join(f"{k}={v}\n" for k, v in result.items() if not isinstance(v, dict) and k not in ("schema_version", "kind"))
        else:
            text = json.dumps(result, indent=2) + "\n"
        _emit(text, args.out)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ECPError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ConsistencyError as exc:
        print(f"internal check failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
