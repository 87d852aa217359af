"""Command-line front end.

Subcommands: validate, solve-fne, solve-olne, affine-oc, simulate, sweep,
verify-nash.  Exit codes: 0 success, 1 solver error (the message names the
error variant), 2 usage or input-schema error.  Floats are emitted in their
shortest round-trip decimal form so identical runs produce byte-identical
artifacts.  Set LQDG_LOG=info|debug for progress logging (default: off).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import affine_oc, fne, gamefile, olne, simulate, verify
from .errors import LqgError, SchemaError
from .game_model import Spectrum, validate_game

log = logging.getLogger("lqgames")


@dataclass
class RunConfig:
    command: str
    input_path: Path
    output_dir: Path
    overrides: dict = field(default_factory=dict)


def _setup_logging() -> None:
    level = os.environ.get("LQDG_LOG", "off").lower()
    if level in ("off", "", "0", "none"):
        logging.basicConfig(level=logging.CRITICAL + 10)
    elif level == "debug":
        logging.basicConfig(level=logging.DEBUG, format="%(name)s %(levelname)s %(message)s")
    else:
        logging.basicConfig(level=logging.INFO, format="%(name)s %(levelname)s %(message)s")


def _matrix_json(m: np.ndarray):
    return [[float(v) for v in row] for row in np.atleast_2d(m)]


def _spectrum_json(spec: Spectrum) -> dict:
    return {
        "real": [float(v.real) for v in spec.eigenvalues],
        "imag": [float(v.imag) for v in spec.eigenvalues],
        "spectral_radius": float(spec.spectral_radius),
        "classification": spec.classify(),
    }


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")


def _fmt_matrix(m: np.ndarray) -> str:
    m = np.atleast_2d(m)
    return "[" + "; ".join(" ".join(repr(float(v)) for v in row) for row in m) + "]"


def _fmt_eigs(eigenvalues) -> str:
    parts = []
    for v in eigenvalues:
        v = complex(v)
        parts.append(repr(v.real) if v.imag == 0.0 else f"{v.real!r}{v.imag:+}j")
    return "[" + ", ".join(parts) + "]"


def _resolve_x0(config: RunConfig, doc, required: bool) -> np.ndarray | None:
    if config.overrides.get("x0") is not None:
        return np.array(config.overrides["x0"], dtype=float)
    if doc.x0 is not None:
        return doc.x0
    if required:
        raise SchemaError("this command needs an initial state: provide --x0 or an x0 field")
    return None


def _cmd_validate(config: RunConfig) -> int:
    doc = gamefile.load_game(config.input_path)
    report = validate_game(doc.game)
    rows = [
        ("stabilizable (A,[B1 B2])", report.stabilizable_joint, "stabilizable_joint_margin"),
        ("A nonsingular", report.A_nonsingular, "A_smallest_singular_value"),
        ("reachable (A,B1)", report.reachable_1, "reachable_1_margin"),
        ("reachable (A,B2)", report.reachable_2, "reachable_2_margin"),
        ("detectable (A,Q1)", report.detectable_Q1, "detectable_Q1_margin"),
        ("detectable (A,Q2)", report.detectable_Q2, "detectable_Q2_margin"),
        ("detectable (A,Q1+Q2)", report.detectable_Qsum, "detectable_Qsum_margin"),
    ]
    for label, ok, margin_key in rows:
        margin = report.details[margin_key]
        print(f"{label:28s} {'true' if ok else 'FALSE'}   margin={margin!r}")
    return 0


def _cmd_solve_fne(config: RunConfig) -> int:
    doc = gamefile.load_game(config.input_path)
    opts = fne.FneOptions()
    if config.overrides.get("damping") is not None:
        opts.damping = config.overrides["damping"]
    if config.overrides.get("max_iters") is not None:
        opts.max_iters = config.overrides["max_iters"]
    if config.overrides.get("tol_fp") is not None:
        opts.tol_fp = config.overrides["tol_fp"]
    eq = fne.solve_fne(doc.game, opts)
    print(f"K1 = {_fmt_matrix(eq.K1)}")
    print(f"K2 = {_fmt_matrix(eq.K2)}")
    print(f"P1 = {_fmt_matrix(eq.P1)}")
    print(f"P2 = {_fmt_matrix(eq.P2)}")
    print(f"closed-loop eigenvalues: {_fmt_eigs(eq.closed_loop_spectrum.eigenvalues)}"
          f" ({eq.closed_loop_spectrum.classify()})")
    print(f"residuals: lyap1={eq.residuals['lyap1']!r} lyap2={eq.residuals['lyap2']!r} "
          f"stationarity={eq.residuals['stationarity']!r}")
    print(f"iterations: {eq.iterations}")
    x0 = _resolve_x0(config, doc, required=False)
    payload = {
        "kind": "fne",
        "K1": _matrix_json(eq.K1), "K2": _matrix_json(eq.K2),
        "P1": _matrix_json(eq.P1), "P2": _matrix_json(eq.P2),
        "closed_loop_spectrum": _spectrum_json(eq.closed_loop_spectrum),
        "residuals": eq.residuals,
        "iterations": eq.iterations,
    }
    if x0 is not None:
        J1, J2 = fne.equilibrium_value(eq, x0)
        print(f"values at x0: J1={J1!r} J2={J2!r}")
        payload["x0"] = [float(v) for v in x0]
        payload["values"] = [J1, J2]
    _write_json(payload, config.output_dir / f"{config.input_path.stem}_fne.json")
    return 0


def _cmd_solve_olne(config: RunConfig) -> int:
    doc = gamefile.load_game(config.input_path)
    eq = olne.solve_olne(doc.game)
    a4 = eq.hamiltonian.assumption4
    print(f"K1 = {_fmt_matrix(eq.K1)}")
    print(f"K2 = {_fmt_matrix(eq.K2)}")
    print(f"P1 = {_fmt_matrix(eq.P1)}")
    print(f"P2 = {_fmt_matrix(eq.P2)}")
    print(f"closed-loop eigenvalues: {_fmt_eigs(eq.closed_loop_spectrum.eigenvalues)}"
          f" ({eq.closed_loop_spectrum.classify()})")
    print(f"spectral dichotomy holds: {a4.holds} "
          f"(n_stable={a4.n_stable}, complementarity margin={a4.complementarity_margin!r})")
    print(f"asymmetric Riccati residuals: {eq.riccati_residuals[0]!r} {eq.riccati_residuals[1]!r}")
    print(f"invariance residual: {eq.invariance_residual!r}")
    payload = {
        "kind": "olne",
        "K1": _matrix_json(eq.K1), "K2": _matrix_json(eq.K2),
        "P1": _matrix_json(eq.P1), "P2": _matrix_json(eq.P2),
        "Lambda": _matrix_json(eq.Lambda),
        "closed_loop_spectrum": _spectrum_json(eq.closed_loop_spectrum),
        "assumption4": {
            "holds": a4.holds,
            "n_stable": a4.n_stable,
            "complementarity_margin": a4.complementarity_margin,
        },
        "riccati_residuals": list(eq.riccati_residuals),
        "invariance_residual": eq.invariance_residual,
        "stable_eigenvalues_of_H": {
            "real": [float(v.real) for v in eq.hamiltonian.eigenvalues if abs(v) < 1.0],
            "imag": [float(v.imag) for v in eq.hamiltonian.eigenvalues if abs(v) < 1.0],
        },
    }
    x0 = _resolve_x0(config, doc, required=False)
    if x0 is not None:
        P1t, P2t = simulate.eval_cost_feedback(doc.game, eq.K1, eq.K2)
        payload["x0"] = [float(v) for v in x0]
        payload["values"] = [0.5 * float(x0 @ P1t @ x0), 0.5 * float(x0 @ P2t @ x0)]
        print(f"values at x0: J1={payload['values'][0]!r} J2={payload['values'][1]!r}")
    _write_json(payload, config.output_dir / f"{config.input_path.stem}_olne.json")
    return 0


def _cmd_affine_oc(config: RunConfig) -> int:
    problem = gamefile.load_affine_problem(config.input_path)
    sol = affine_oc.solve_affine_oc(problem)
    print(f"P = {_fmt_matrix(sol.P)}")
    print(f"K = {_fmt_matrix(sol.K)}")
    print(f"b(0) = {_fmt_matrix(sol.b[0])}")
    print(f"c(0) = {sol.c0!r}")
    print(f"optimal cost = {sol.optimal_cost!r}")
    a = sol.assumptions
    print(f"assumptions: reachable={a.reachable} detectable={a.detectable} "
          f"A_nonsingular={a.a_nonsingular} stabilizable={a.stabilizable}")
    horizon = config.overrides.get("horizon")
    traj = affine_oc.hamiltonian_rollout(sol, horizon)
    payload = {
        "kind": "affine-oc",
        "P": _matrix_json(sol.P), "K": _matrix_json(sol.K),
        "b": [[float(v) for v in row] for row in sol.b],
        "c0": sol.c0,
        "optimal_cost": sol.optimal_cost,
        "assumptions": {
            "reachable": a.reachable, "detectable": a.detectable,
            "A_nonsingular": a.a_nonsingular, "stabilizable": a.stabilizable,
        },
    }
    stem = config.input_path.stem
    _write_json(payload, config.output_dir / f"{stem}_affine.json")
    csv_path = config.output_dir / f"{stem}_affine_trajectory.csv"
    simulate.write_trajectory_csv(traj, csv_path)
    print(f"wrote {csv_path}")
    return 0


def _cmd_simulate(config: RunConfig) -> int:
    doc = gamefile.load_game(config.input_path)
    x0 = _resolve_x0(config, doc, required=True)
    strategy = config.overrides["strategy"]
    horizon = config.overrides.get("horizon")
    if strategy == "fne":
        eq = fne.solve_fne(doc.game)
        traj = simulate.rollout_feedback(doc.game, eq.K1, eq.K2, x0, horizon)
    else:
        eq = olne.solve_olne(doc.game)
        traj = simulate.rollout_feedback(doc.game, eq.K1, eq.K2, x0, horizon)
        # static costate relation of the equilibrium subspace
        traj.costates1 = traj.states @ eq.P1.T
        traj.costates2 = traj.states @ eq.P2.T
    csv_path = config.output_dir / f"{config.input_path.stem}_simulate_{strategy}.csv"
    simulate.write_trajectory_csv(traj, csv_path)
    print(f"horizon {traj.horizon}, cumulative costs "
          f"({traj.cumulative1!r}, {traj.cumulative2!r}), tail bound {traj.tail_bound!r}")
    print(f"wrote {csv_path}")
    return 0


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise SchemaError(f"--grid expects LO:HI:COUNT, got {spec!r}") from None
    if count < 1:
        raise SchemaError("--grid COUNT must be >= 1")
    return np.linspace(lo, hi, count)


def _opponent_for(config: RunConfig, doc, player: int, x0):
    """Build the opponent model from MODE:SOURCE, e.g. feedback:olne."""
    spec = config.overrides["opponent"]
    try:
        mode, source = spec.split(":", 1)
    except ValueError:
        raise SchemaError(f"--opponent expects MODE:SOURCE, got {spec!r}") from None
    other = 2 if player == 1 else 1
    if source == "fne":
        eq = fne.solve_fne(doc.game)
        gains = {1: eq.K1, 2: eq.K2}
        reference = gains[player]
    elif source == "olne":
        eq = olne.solve_olne(doc.game)
        gains = {1: eq.K1, 2: eq.K2}
        reference = gains[player]
    else:
        try:
            value = float(source)
        except ValueError:
            raise SchemaError(f"--opponent SOURCE must be fne, olne or a scalar gain, got {source!r}") from None
        gains = {other: np.full((doc.game.B(other).shape[1], doc.game.n), value)}
        reference = None
    if mode == "feedback":
        return verify.OpponentFeedback(gains[other]), reference
    if mode == "openloop":
        if source not in ("fne", "olne"):
            raise SchemaError("openloop opponents need an equilibrium SOURCE (fne or olne)")
        A_cl = doc.game.A + doc.game.B1 @ gains[1] + doc.game.B2 @ gains[2]
        rho = float(np.max(np.abs(np.linalg.eigvals(A_cl))))
        if rho >= 1.0:
            raise SchemaError("open-loop opponent requires a stabilizing source equilibrium")
        T = int(min(max(np.ceil(np.log(1e-10) / np.log(max(rho, 1e-12))), 20), 2000))
        x = np.array(x0, dtype=float)
        inputs = np.zeros((T, doc.game.B(other).shape[1]))
        for k in range(T):
            inputs[k] = gains[other] @ x
            x = A_cl @ x
        return verify.OpponentOpenLoop(inputs), reference
    raise SchemaError(f"--opponent MODE must be feedback or openloop, got {mode!r}")


def _cmd_sweep(config: RunConfig) -> int:
    doc = gamefile.load_game(config.input_path)
    x0 = _resolve_x0(config, doc, required=True)
    player = config.overrides["player"]
    m_i = doc.game.m1 if player == 1 else doc.game.m2
    if m_i != 1 or doc.game.n != 1:
        raise SchemaError("scalar --grid sweeps need a scalar gain (n = m_i = 1)")
    opponent, reference = _opponent_for(config, doc, player, x0)
    grid = [np.array([[g]]) for g in _parse_grid(config.overrides["grid"])]
    result = verify.sweep_gain(doc.game, player, opponent, grid, x0, reference_gain=reference)
    argmin = float(result.argmin_gain.ravel()[0])
    print(f"player {player} vs {result.opponent_mode} opponent: "
          f"argmin gain {argmin!r} over {len(grid)} points")
    if result.gap is not None:
        print(f"reference gain {float(result.reference_gain.ravel()[0])!r} "
              f"cost gap vs argmin: {result.gap!r}")
    mode_tag = config.overrides["opponent"].replace(":", "_")
    csv_path = config.output_dir / f"{config.input_path.stem}_sweep_p{player}_{mode_tag}.csv"
    verify.write_sweep_csv(result, csv_path)
    print(f"wrote {csv_path}")
    return 0


def _cmd_verify_nash(config: RunConfig) -> int:
    doc = gamefile.load_game(config.input_path)
    eq_path = Path(config.overrides["equilibrium"])
    try:
        with open(eq_path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"equilibrium file not found: {eq_path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{eq_path}: not valid JSON: {exc}") from exc
    kind = payload.get("kind")
    if kind not in ("fne", "olne"):
        raise SchemaError(f"{eq_path}: 'kind' must be fne or olne")
    K1 = np.array(payload["K1"], dtype=float)
    K2 = np.array(payload["K2"], dtype=float)
    x0 = _resolve_x0(config, doc, required=False)
    if x0 is None and payload.get("x0") is not None:
        x0 = np.array(payload["x0"], dtype=float)
    if x0 is None:
        raise SchemaError("verify-nash needs an initial state (--x0, file x0, or x0 in the JSON)")
    if kind == "fne":
        checks = verify.certify_fne(doc.game, K1, K2, x0)
    else:
        checks = verify.certify_olne(doc.game, K1, K2, x0)
    all_ok = True
    for c in checks:
        status = "PASS" if c.holds else "FAIL"
        all_ok &= c.holds
        print(f"{status} player {c.player} {c.kind} inequality: "
              f"equilibrium cost {c.equilibrium_cost!r}, best deviation {c.deviation_cost!r}, "
              f"improvement {c.improvement!r}")
    return 0 if all_ok else 1


_COMMANDS = {
    "validate": _cmd_validate,
    "solve-fne": _cmd_solve_fne,
    "solve-olne": _cmd_solve_olne,
    "affine-oc": _cmd_affine_oc,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "verify-nash": _cmd_verify_nash,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqgames",
        description="Feedback and open-loop Nash equilibria of infinite-horizon "
                    "discrete-time LQ dynamic games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, x0=True):
        p.add_argument("input", type=Path, help="game/problem TOML file")
        p.add_argument("-o", "--output-dir", type=Path, default=Path("."))
        if x0:
            p.add_argument("--x0", type=float, nargs="+", default=None,
                           help="initial state (overrides the file)")

    common(sub.add_parser("validate", help="structural assumption report"), x0=False)

    p = sub.add_parser("solve-fne", help="feedback Nash equilibrium")
    common(p)
    p.add_argument("--damping", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol-fp", type=float, default=None)

    common(sub.add_parser("solve-olne", help="open-loop Nash equilibrium (feedback synthesis)"))

    p = sub.add_parser("affine-oc", help="single-player affine problem")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output-dir", type=Path, default=Path("."))
    p.add_argument("--horizon", type=int, default=None)

    p = sub.add_parser("simulate", help="closed-loop trajectory CSV")
    common(p)
    p.add_argument("--strategy", choices=("fne", "olne"), required=True)
    p.add_argument("--horizon", type=int, default=None)

    p = sub.add_parser("sweep", help="cost over a grid of deviation gains")
    common(p)
    p.add_argument("--player", type=int, choices=(1, 2), required=True)
    p.add_argument("--opponent", required=True,
                   help="MODE:SOURCE with MODE in {feedback, openloop} and "
                        "SOURCE in {fne, olne} or a scalar gain")
    p.add_argument("--grid", required=True, help="LO:HI:COUNT")

    p = sub.add_parser("verify-nash", help="PASS/FAIL per Nash inequality")
    common(p)
    p.add_argument("--equilibrium", required=True,
                   help="JSON result written by solve-fne / solve-olne")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "input", "output_dir") and v is not None}
    return RunConfig(
        command=args.command,
        input_path=args.input,
        output_dir=args.output_dir,
        overrides=overrides,
    )


def run(config: RunConfig) -> int:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[config.command](config)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LqgError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
