"""Command-line driver.

Every subcommand writes plot-ready CSV plus a JSON manifest into ``--out``.
Manifests embed the resolved run configuration and carry no timestamps, so
the same arguments and seed give byte-identical files.

Exit codes: 0 success, 2 parse or configuration error, 3 numerical guard.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import dynamics, fock, marginals, measurement, ordering, phasespace
from .errors import ConfigError, GuardError, ParseError
from .fock import DensityOperator, ModeSpace, OperatorMatrix, StateVector
from .phasespace import Kind, Measure, PhaseDistribution, PhaseGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3


@dataclass(frozen=True)
class RunConfig:
    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    dim: int = fock.DEFAULT_TRUNCATION
    grid_radius: float = phasespace.DEFAULT_RADIUS
    grid_samples: int = phasespace.DEFAULT_SAMPLES
    measure: str = "alpha"
    out: str = "husimi-out"
    seed: int = 0

    def __post_init__(self):
        # Building the objects re-runs every guard of the owning modules.
        self.space()
        self.grid()

    def space(self) -> ModeSpace:
        return ModeSpace(1, self.dim, self.hbar, self.mass, self.omega)

    def grid(self) -> PhaseGrid:
        return PhaseGrid(self.space(), self.grid_radius, self.grid_samples, self.measure)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


# -- state specs ------------------------------------------------------------

_COMPLEX = re.compile(r"^[-+]?[\d.eE+\-ij]*$")


def parse_complex(text: str) -> complex:
    """Parse ``1+0.5i``, ``-2i``, ``0.3`` (``i`` or ``j`` as the imaginary unit)."""
    raw = text.strip()
    try:
        if not raw or not _COMPLEX.match(raw):
            raise ValueError
        return complex(raw.replace("i", "j"))
    except ValueError:
        raise ParseError(f"not a number: {text!r}") from None


def _split_top(text: str, sep: str = "+") -> list[str]:
    """Split on ``sep`` surrounded by spaces, outside parentheses."""
    parts, depth, start = [], 0, 0
    token = f" {sep} "
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced ')'", text, i)
        elif depth == 0 and text.startswith(token, i):
            parts.append(text[start:i])
            start = i + len(token)
            i = start
            continue
        i += 1
    if depth:
        raise ParseError("unbalanced '('", text, len(text))
    parts.append(text[start:])
    return [p.strip() for p in parts]


def _pure(words: list[str], space: ModeSpace, rng) -> StateVector:
    head = words[0]
    if head == "fock":
        if len(words) != 2:
            raise ParseError(f"'fock' takes one level, got {' '.join(words)!r}")
        try:
            level = int(words[1])
        except ValueError:
            raise ParseError(f"bad Fock level {words[1]!r}") from None
        if level < 0:
            raise ConfigError("Fock level must be nonnegative")
        return fock.number_state(space, level)
    if head == "coherent":
        if len(words) != 2:
            raise ParseError(f"'coherent' takes one amplitude, got {' '.join(words)!r}")
        return fock.coherent_state(space, parse_complex(words[1]))
    if head == "random":
        levels = None
        for w in words[1:]:
            key, _, val = w.partition("=")
            if key != "levels" or not val.isdigit():
                raise ParseError(f"unknown option {w!r} for 'random'")
            levels = int(val)
        return fock.random_state(space, rng, levels)
    raise ParseError(f"unknown state {head!r}; expected fock, coherent, random, superpose or mixture")


def parse_state(text: str, space: ModeSpace, rng=None) -> DensityOperator:
    """Build a density operator from the state-spec mini-language.

    ``fock n`` | ``coherent re+imi`` | ``random [levels=k]`` |
    ``superpose c1 fock 0 + c2 fock 1`` | ``mixture w1 (spec) + w2 (spec)``.
    Superpositions and mixtures are renormalized.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        return parse_state(text[1:-1], space, rng)
    words = text.split()
    if not words:
        raise ParseError("empty state spec")
    if words[0] == "superpose":
        body = text[len("superpose"):].strip()
        coeffs, states = [], []
        for term in _split_top(body):
            tw = term.split()
            if len(tw) < 2:
                raise ParseError(f"superposition term {term!r} needs a coefficient and a state")
            coeffs.append(parse_complex(tw[0]))
            states.append(_pure(tw[1:], space, rng))
        total = sum(c * s.amplitudes for c, s in zip(coeffs, states))
        if np.linalg.norm(total) < 1e-12:
            raise ConfigError("superposition has zero norm")
        return fock.pure_density(StateVector.normalized(space, total))
    if words[0] == "mixture":
        body = text[len("mixture"):].strip()
        weights, parts = [], []
        for term in _split_top(body):
            w, _, rest = term.partition(" ")
            rest = rest.strip()
            if not (rest.startswith("(") and rest.endswith(")")):
                raise ParseError(f"mixture component {term!r} must be 'weight (spec)'")
            try:
                weights.append(float(w))
            except ValueError:
                raise ParseError(f"bad mixture weight {w!r}") from None
            parts.append(parse_state(rest, space, rng))
        weights = np.array(weights)
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ConfigError("mixture weights must be nonnegative with a positive sum")
        return DensityOperator.mixture(weights / weights.sum(), parts)
    return fock.pure_density(_pure(words, space, rng))


def parse_hamiltonian(text: str, space: ModeSpace) -> OperatorMatrix:
    """``harmonic`` | ``kerr chi=<x>`` | ``poly <polynomial>``.

    ``poly`` takes a ladder polynomial (or a q/p polynomial, which is Weyl
    quantized) whose truncated matrix is used as H in energy units.
    """
    text = text.strip()
    head, _, rest = text.partition(" ")
    if head == "harmonic" and not rest.strip():
        return fock.harmonic_hamiltonian(space)
    if head == "kerr":
        key, _, val = rest.strip().partition("=")
        if key.strip() != "chi":
            raise ParseError("kerr needs 'chi=<value>'")
        try:
            chi = float(val)
        except ValueError:
            raise ParseError(f"bad chi value {val!r}") from None
        return fock.kerr_hamiltonian(space, chi)
    if head == "poly":
        poly = ordering.parse_polynomial(rest, modes=space.modes)
        if isinstance(poly, ordering.PhasePolynomial):
            poly = ordering.weyl_quantize(poly)
        H = OperatorMatrix(space, poly.matrix(space), f"poly {rest.strip()}")
        if not H.is_hermitian():
            raise ConfigError(f"Hamiltonian {rest.strip()!r} is not Hermitian")
        return H
    raise ParseError(f"unknown Hamiltonian {text!r}; expected harmonic, kerr chi=<x> or poly <polynomial>")


# -- output -----------------------------------------------------------------


def _outdir(config: RunConfig) -> Path:
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    rows = zip(*[np.asarray(c).ravel() for c in columns])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_grid(path: Path, dist: PhaseDistribution):
    """Row-major (Re index slowest) grid CSV for a single mode."""
    a = dist.grid.mode_alphas(0)
    write_csv(path, ["re_alpha", "im_alpha", "value"], [a.real, a.imag, dist.values])


def write_json(path: Path, payload: dict):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cpx(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _manifest(config: RunConfig, command: str, **extra) -> dict:
    space = config.space()
    return {
        "command": command,
        "config": asdict(config),
        "units": {"hbar": space.hbar, "mass": space.mass[0], "omega": space.omega[0]},
        **extra,
    }


def _dist_summary(dist: PhaseDistribution) -> dict:
    idx = np.unravel_index(int(np.argmax(dist.values)), dist.values.shape)
    at = dist.grid.mode_alphas(0)[idx]
    return {
        "kind": dist.kind.value,
        "measure": dist.measure.value,
        "integral": dist.integrate(),
        "min": dist.min(),
        "max": dist.max(),
        "argmax": _cpx(at),
    }


# -- commands ---------------------------------------------------------------


def cmd_distribution(config: RunConfig, args) -> int:
    space, grid = config.space(), config.grid()
    rho = parse_state(args.state, space, config.rng())
    kind = Kind(args.kind)
    if kind is Kind.Q:
        dist = phasespace.q_grid(rho, grid)
    elif kind is Kind.WIGNER:
        dist = phasespace.wigner_grid(rho, grid)
    else:
        kappa = args.kappa if args.kappa is not None else space.omega[0]
        dist = phasespace.husimi_grid(rho, grid, kappa)
    out = _outdir(config)
    write_grid(out / f"{kind.value}.csv", dist)
    summary = _dist_summary(dist)
    write_json(
        out / f"{kind.value}.json",
        _manifest(config, "dist", state=args.state, kappa=dist.kappa, grid=grid.describe(), **summary),
    )
    print(f"{kind.value}: integral={summary['integral']:.10g} min={summary['min']:.6g} "
          f"max={summary['max']:.6g} at alpha={summary['argmax']['re']:.4g}{summary['argmax']['im']:+.4g}i")
    return EXIT_OK


def cmd_expect(config: RunConfig, args) -> int:
    space = config.space()
    rho = parse_state(args.state, space, config.rng())
    poly = ordering.parse_polynomial(args.poly, modes=space.modes)
    grid = None if args.grid_radius is None else config.grid()
    rows = {}
    if isinstance(poly, ordering.LadderPolynomial):
        rows["trace"] = ordering.expectation_trace(rho, poly)
        rows["phase_space"] = ordering.expectation_via_q(rho, ordering.to_antinormal(poly), grid)
        rows["discrepancy"] = rows["trace"] - rows["phase_space"]
    elif args.pipeline == "weyl":
        op = ordering.weyl_quantize(poly)
        rows["trace"] = ordering.expectation_trace(rho, op)
        rows["phase_space"] = ordering.expectation_via_q(rho, ordering.to_antinormal(op), grid)
        rows["discrepancy"] = rows["trace"] - rows["phase_space"]
    elif args.pipeline == "berezin":
        op = ordering.berezin_quantize(poly)
        rows["trace"] = ordering.expectation_trace(rho, op)
        rows["phase_space"] = ordering.expectation_via_q(rho, op, grid)
        rows["discrepancy"] = rows["trace"] - rows["phase_space"]
    else:
        rows["trace"] = ordering.expectation_trace(rho, ordering.weyl_quantize(poly))
        rows["phase_space"] = ordering.expectation_via_q(rho, ordering.berezin_quantize(poly), grid)
        rows["discrepancy"] = rows["trace"] - rows["phase_space"]
    for name, val in rows.items():
        print(f"{name:<12} {_show(val)}")
    write_json(
        _outdir(config) / "expect.json",
        _manifest(config, "expect", state=args.state, poly=str(poly), pipeline=args.pipeline,
                  **{k: _cpx(complex(v)) for k, v in rows.items()}),
    )
    return EXIT_OK


def _show(z) -> str:
    z = complex(z)
    if abs(z.imag) < 1e-12 * max(1.0, abs(z.real)):
        return f"{z.real:.10g}"
    return f"{z.real:.10g}{z.imag:+.10g}i"


def cmd_marginals(config: RunConfig, args) -> int:
    space = config.space()
    rho = parse_state(args.state, space, config.rng())
    if args.source == "psi":
        prof = marginals.psi_profile(rho)
    else:
        grid = config.grid().with_measure(Measure.QP)
        if args.source == "wigner":
            prof = marginals.wigner_marginals(phasespace.wigner_grid(rho, grid))
        else:
            prof = marginals.q_marginals(phasespace.q_grid(rho, grid))
    out = _outdir(config)
    write_csv(out / f"{args.source}_density.csv", ["q", "value"], [prof.axis, prof.density])
    write_csv(out / f"{args.source}_current.csv", ["q", "value"], [prof.axis, prof.current])
    at0 = prof.at(0.0)
    write_json(
        out / f"{args.source}_marginals.json",
        _manifest(config, "marginals", state=args.state, source=args.source, norm=prof.norm(),
                  density_at_0=at0[0], current_at_0=at0[1]),
    )
    print(f"{args.source}: norm={prof.norm():.10g} density(0)={at0[0]:.10g}")
    return EXIT_OK


def _refined(grid: PhaseGrid) -> PhaseGrid:
    return PhaseGrid(grid.space, grid.radius, 2 * (grid.samples[0] - 1) + 1, grid.measure)


def cmd_evolve(config: RunConfig, args) -> int:
    space, grid = config.space(), config.grid()
    rho0 = parse_state(args.state, space, config.rng())
    H = parse_hamiltonian(args.hamiltonian, space)
    traj = dynamics.evolve(rho0, H, args.t_final, args.steps)
    out = _outdir(config)
    steps = []
    for k, (t, dist) in enumerate(zip(traj.times, traj.q_grids(grid))):
        name = f"q_step_{k:04d}.csv"
        if not args.no_grids:
            write_grid(out / name, dist)
        c = phasespace.q_centroid(dist)
        steps.append({"index": k, "time": float(t), "file": None if args.no_grids else name,
                      "integral": dist.integrate(), "min": dist.min(), "centroid": _cpx(c)})
    manifest = _manifest(config, "evolve", state=args.state, hamiltonian=args.hamiltonian,
                         t_final=args.t_final, steps=steps)
    final = steps[-1]["centroid"]
    print(f"final centroid alpha={final['re']:.8g}{final['im']:+.8g}i at t={args.t_final:g}")
    if args.continuity:
        coarse = marginals.continuity_report(traj, grid)
        fine_traj = dynamics.evolve(rho0, H, args.t_final, 2 * args.steps)
        fine = marginals.continuity_report(fine_traj, _refined(grid))
        ratio = coarse["residual"] / fine["residual"] if fine["residual"] > 0 else math.inf
        manifest["continuity"] = {"coarse": coarse, "fine": fine, "order_ratio": ratio}
        print(f"continuity residual={coarse['residual']:.4e} (halved steps: {fine['residual']:.4e}) "
              f"ratio={ratio:.4f}")
    write_json(out / "evolve.json", manifest)
    return EXIT_OK


def _amplitudes(desc: dict, rng) -> list[complex]:
    amps = desc.get("amplitudes")
    if amps == "random" or amps is None:
        n = desc.get("outcomes")
        if not isinstance(n, int) or n < 1:
            raise ConfigError("random amplitudes need an integer 'outcomes' >= 1")
        c = rng.normal(size=n) + 1j * rng.normal(size=n)
        return list(c / np.linalg.norm(c))
    out = []
    for a in amps:
        if isinstance(a, (int, float)):
            out.append(complex(a))
        elif isinstance(a, str):
            out.append(parse_complex(a))
        elif isinstance(a, list) and len(a) == 2:
            out.append(complex(a[0], a[1]))
        else:
            raise ConfigError(f"bad amplitude {a!r}; use a number, 're+imi' or [re, im]")
    return out


def build_experiment(desc: dict, config: RunConfig) -> measurement.MeasurementModel:
    """Measurement model from a descriptor dictionary (see README)."""
    if not isinstance(desc, dict):
        raise ConfigError("experiment descriptor must be a JSON object")
    known = {"amplitudes", "outcomes", "separation", "radius", "regions", "width", "nodes", "system_dim"}
    unknown = set(desc) - known
    if unknown:
        raise ConfigError(f"unknown descriptor keys: {sorted(unknown)}")
    amps = _amplitudes(desc, config.rng())
    kwargs = dict(
        system_truncation=desc.get("system_dim"),
        width=float(desc.get("width", measurement.DEFAULT_WIDTH)),
        nodes=int(desc.get("nodes", measurement.DEFAULT_NODES)),
        hbar=config.hbar,
    )
    if "regions" in desc:
        regions = []
        for i, r in enumerate(desc["regions"]):
            try:
                centre = complex(*r["centre"])
                regions.append(measurement.PointerRegion(i + 1, centre, float(r["radius"])))
            except (KeyError, TypeError):
                raise ConfigError(f"region {i + 1} needs 'centre': [x, y] and 'radius'") from None
        return measurement.MeasurementModel.from_regions(amps, regions, **kwargs)
    return measurement.MeasurementModel.ring(
        amps, float(desc.get("separation", 8.0)), float(desc.get("radius", measurement.MIN_RADIUS)), **kwargs
    )


def cmd_measure(config: RunConfig, args) -> int:
    try:
        desc = json.loads(Path(args.experiment).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read experiment file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"experiment file is not valid JSON: {exc.msg}", exc.doc, exc.pos) from None
    model = build_experiment(desc, config)
    probs = measurement.pointer_probabilities(model)
    table = []
    for r, p, b in zip(model.regions, probs, model.born):
        table.append({"outcome": r.label, "centre": _cpx(r.centre), "radius": r.radius,
                      "P": float(p), "born": float(b), "error": float(abs(p - b))})
        print(f"j={r.label}  P={p:.8f}  |c|^2={b:.8f}  err={abs(p - b):.2e}")
    result = {"outcomes": table, "max_error": max(t["error"] for t in table),
              "amplitudes": [_cpx(c) for c in model.amplitudes], "apparatus_dim": model.apparatus.dims[0]}
    print(f"max error {result['max_error']:.3e}")
    if args.condition is not None:
        joint = measurement.joint_q(model)
        err = measurement.collapse_error(model, joint, args.condition)
        result["collapse"] = {"condition": args.condition, "sup_error": err}
        print(f"collapse onto outcome {args.condition}: sup-norm error {err:.3e}")
    write_json(_outdir(config) / "measure.json",
               _manifest(config, "measure", experiment=desc, **result))
    return EXIT_OK


def cmd_overlap(config: RunConfig, args) -> int:
    space = config.space()
    grid = None if args.grid_radius is None else config.grid()
    n, m = args.levels
    val = measurement.eigenstate_q_overlap(space, n, m, grid)
    print(f"overlap({n},{m}) = {val:.8f}")
    write_json(_outdir(config) / "overlap.json", _manifest(config, "overlap", levels=[n, m], overlap=val))
    return EXIT_OK


# -- argument parsing -------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--hbar", type=float, default=1.0)
    g.add_argument("--mass", type=float, default=1.0)
    g.add_argument("--omega", type=float, default=1.0)
    g.add_argument("--dim", type=int, default=fock.DEFAULT_TRUNCATION, help="Fock truncation D")
    g.add_argument("--grid-radius", type=float, default=None, help=f"half-width in |alpha| (default {phasespace.DEFAULT_RADIUS})")
    g.add_argument("--grid-samples", type=int, default=None, help=f"odd samples per axis (default {phasespace.DEFAULT_SAMPLES})")
    g.add_argument("--measure", choices=["alpha", "qp"], default="alpha")
    g.add_argument("--out", default="husimi-out", help="output directory")
    g.add_argument("--seed", type=int, default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="husimi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", parents=[common], help="export a Q, Wigner or Husimi grid")
    p.add_argument("--state", required=True)
    p.add_argument("--kind", choices=[k.value for k in Kind], default="q")
    p.add_argument("--kappa", type=float, default=None, help="Husimi stiffness (default omega)")
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("expect", parents=[common], help="compare trace and phase-space expectations")
    p.add_argument("--state", required=True)
    p.add_argument("--poly", required=True)
    p.add_argument("--pipeline", choices=["weyl", "berezin", "both"], default="both")
    p.set_defaults(func=cmd_expect)

    p = sub.add_parser("marginals", parents=[common], help="export position density and current")
    p.add_argument("--state", required=True)
    p.add_argument("--source", choices=["psi", "wigner", "q"], default="q")
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("evolve", parents=[common], help="evolve a state and export Q per step")
    p.add_argument("--state", required=True)
    p.add_argument("--hamiltonian", default="harmonic")
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--continuity", action="store_true", help="report the continuity residual and order ratio")
    p.add_argument("--no-grids", action="store_true", help="write only the manifest")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("measure", parents=[common], help="run a pointer-measurement experiment")
    p.add_argument("experiment", help="descriptor JSON file")
    p.add_argument("--condition", type=int, default=None, help="run the collapse check on outcome j")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("overlap", parents=[common], help="Q overlap of two number states")
    p.add_argument("--levels", type=int, nargs=2, default=[0, 1], metavar=("N", "M"))
    p.set_defaults(func=cmd_overlap)
    return parser


def resolve_config(args) -> RunConfig:
    return RunConfig(
        hbar=args.hbar,
        mass=args.mass,
        omega=args.omega,
        dim=args.dim,
        grid_radius=phasespace.DEFAULT_RADIUS if args.grid_radius is None else args.grid_radius,
        grid_samples=phasespace.DEFAULT_SAMPLES if args.grid_samples is None else args.grid_samples,
        measure=args.measure,
        out=args.out,
        seed=args.seed,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.simplefilter("default")
    try:
        config = resolve_config(args)
        return args.func(config, args)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
