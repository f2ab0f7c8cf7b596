"""
Command line frontend.

    rwglobal flatness --flat --n 2
    rwglobal graphs enumerate --n-bulk 2 --rep B
    rwglobal weights ihx --seed 7 --n 2
    rwglobal aksz dcme --model default --K 3

Each command writes <output>/<command>[_<subcommand>].json and a text
table next to it. Exit status: 0 when every asserted residual is within
tolerance, 1 when one is not, 2 for unusable input, 3 when an internal
invariant fails.
"""
import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np
import sympy as sp

from . import aksz, fedosov, geometry, graphs, weights
from .errors import (ConfigurationError, GeometryError, GraphError, NotInvertibleError,
                     ParseError)
from .opts import DEFAULT_TOLERANCE, ConventionFlags, default_output_dir
from .series import RINGS, get_ring

logger = logging.getLogger(name="rwglobal")

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

COMMANDS = {"geometry": (),
            "expmap": (),
            "grothendieck": (),
            "fedosov": (),
            "flatness": (),
            "theta": (),
            "graphs": ("enumerate", "check"),
            "weights": ("eval", "ihx", "as"),
            "aksz": ("dcme", "nilpotency", "degrees", "mdcme")}


@dataclasses.dataclass
class RunConfig:
    command: str
    subcommand: str = None
    n: int = 1
    K: int = 3
    L: int = 3
    weight_max: int = 4
    N: int = 4
    seed: int = 0
    mode: str = "compatible"
    ring: str = "float"
    symplectic: bool = True
    rep: str = "B_rep"
    n_bulk: int = 1
    max_valence: int = 6
    geometry: str = None
    model: str = None
    graphs: str = None
    method: str = "einsum"
    normalization: float = 1.0
    perturbation: float = 0.0
    tolerance: float = DEFAULT_TOLERANCE
    output: str = dataclasses.field(default_factory=default_output_dir)
    flags: ConventionFlags = ConventionFlags()
    verbose: bool = False

    @classmethod
    def from_args(cls, args):
        values = {f.name: getattr(args, f.name) for f in dataclasses.fields(cls)
                  if getattr(args, f.name, None) is not None and f.name != "flags"}
        values["flags"] = ConventionFlags(atiyah_half=not getattr(args, "full_atiyah", False),
                                          redef_R=getattr(args, "redef_R", False))
        if getattr(args, "graphs_file", None) is not None:
            values.setdefault("graphs", args.graphs_file)
        return cls(**values)

    @property
    def name(self):
        return self.command if self.subcommand is None else f"{self.command}_{self.subcommand}"

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        subs = COMMANDS[self.command]
        if subs and self.subcommand not in subs:
            raise ConfigurationError(f"{self.command} needs one of {subs}, got {self.subcommand!r}")
        if not subs and self.subcommand is not None:
            raise ConfigurationError(f"{self.command} takes no subcommand")
        for field in ("n", "K", "L", "weight_max", "N", "max_valence"):
            if getattr(self, field) < 1:
                raise ConfigurationError(f"{field} must be positive, got {getattr(self, field)}")
        if self.n_bulk < 0:
            raise ConfigurationError(f"n_bulk must be non-negative, got {self.n_bulk}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.mode not in geometry.MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.ring not in RINGS:
            raise ConfigurationError(f"unknown ring {self.ring!r}")
        if self.rep not in graphs.REPS:
            raise ConfigurationError(f"unknown representation {self.rep!r}")
        if self.method not in weights.METHODS:
            raise ConfigurationError(f"unknown contraction method {self.method!r}")
        return self

    def to_dict(self):
        data = dataclasses.asdict(self)
        data["flags"] = self.flags.to_dict()
        return data


@dataclasses.dataclass
class Report:
    """Residuals are asserted against the tolerance; diagnostics are not."""
    command: str
    residuals: dict = dataclasses.field(default_factory=dict)
    diagnostics: dict = dataclasses.field(default_factory=dict)
    data: dict = dataclasses.field(default_factory=dict)
    notes: list = dataclasses.field(default_factory=list)

    def failures(self, tol):
        return sorted(k for k, v in self.residuals.items() if not v <= tol)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return {"shape": list(obj.shape), "re": np.real(obj).tolist(), "im": np.imag(obj).tolist()}
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, sp.Basic):
        return str(obj)
    return obj


def render_table(report, tol):
    lines = [f"rwglobal {report.command}",
             f"{'quantity':<32}{'value':>14}  status"]
    for name, value in sorted(report.residuals.items()):
        status = "ok" if value <= tol else "FAIL"
        lines.append(f"{name:<32}{value:>14.3e}  {status}")
    for name, value in sorted(report.diagnostics.items()):
        lines.append(f"{name:<32}{value:>14.3e}  info")
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ParseError(f"cannot read file ({e.strerror})", path)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno} column {e.colno}", path)


def _geometry(config):
    if config.geometry:
        return geometry.GeometryJet.from_json(_read_json(config.geometry), location=config.geometry)
    return geometry.make_geometry(config.n, config.K, seed=config.seed, mode=config.mode,
                                  ring=get_ring(config.ring))


def _model(config, default="default"):
    spec = config.model or default
    if spec in aksz.MODELS:
        return aksz.get_model(spec)
    return aksz.FiniteDgModel.from_json(_read_json(spec), location=spec).validate()


def _max_diff(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max(initial=0.0))


PIPELINES = {}


def pipeline(command, subcommand=None):
    def register(func):
        PIPELINES[(command, subcommand)] = func
        return func
    return register


###########################################
#
# Geometry pipelines
#
###########################################

@pipeline("geometry")
def _run_geometry(config):
    geo = _geometry(config)
    report = Report(config.name, data={"geometry": geo.to_json()})
    if geo.mode in ("compatible", "hyperkahler", "flat"):
        report.residuals["compatibility"] = geo.compatibility_defect()
    if geo.mode == "hyperkahler":
        report.residuals["curvature_20"] = geo.curvature_20_norm()
    return report


@pipeline("expmap")
def _run_expmap(config):
    geo = _geometry(config)
    phi = geometry.geodesic_exp(geo, config.L, symplectic=config.symplectic)
    names = geo.fiber_names
    report = Report(config.name)
    report.residuals["normalisation"] = 0.0 if phi.check_invariants(config.tolerance) else 1.0
    quadratic = np.array([geometry.taylor_tensor(p, names, 2) for p in phi.phi])
    report.residuals["quadratic"] = _max_diff(quadratic, -0.5 * geo.gamma_at_origin)
    report.data["quadratic"] = quadratic
    if config.L >= 3:
        cubic = np.array([geometry.taylor_tensor(p, names, 3) for p in phi.phi])
        report.data["cubic"] = cubic
        if config.symplectic:
            report.residuals["cubic"] = _max_diff(cubic, geometry.exp_cubic_reference(geo))
        else:
            report.notes.append("plain geodesic map: cubic coefficients are not compared")
    return report


def _connection(config, geo):
    return geometry.grothendieck(geometry.geodesic_exp(geo, config.L, symplectic=config.symplectic))


@pipeline("grothendieck")
def _run_grothendieck(config):
    geo = _geometry(config)
    R = _connection(config, geo)
    max_k = min(2, config.L - 1)
    table = geometry.connection_table(R, config.flags, max_k=max_k)
    reference = geometry.reference_table(geo, config.flags, symplectic=config.symplectic)
    report = Report(config.name)
    for (label, k), arr in sorted(table.items()):
        key = f"{label}_{k}"
        report.data[key] = arr
        diff = _max_diff(arr, reference[(label, k)])
        if label == "antihol" and k == 2 and not config.flags.atiyah_half:
            # compared against the full Atiyah tensor, off by the factor 1/2
            report.diagnostics[key] = diff
            report.notes.append("antiholomorphic quadratic coefficient compared with the full Atiyah tensor")
        else:
            report.residuals[key] = diff
    return report


@pipeline("flatness")
def _run_flatness(config):
    geo = _geometry(config)
    flat = geometry.flatness_residual(_connection(config, geo))
    report = Report(config.name, data=flat.to_dict())
    report.residuals.update({f"flatness_{k}": v for k, v in flat.pieces.items()})
    return report


@pipeline("fedosov")
def _run_fedosov(config):
    geo = _geometry(config)
    I = fedosov.fedosov_solve(geo, config.weight_max)
    report = Report(config.name)
    curvature = fedosov.fedosov_residual(geo, I)
    report.residuals.update({f"fedosov_{k}": v for k, v in curvature.pieces.items()})
    names = geo.fiber_names
    found, expected = fedosov.cubic_tensors(I, geo), fedosov.cubic_reference(geo)
    report.residuals["leading_term"] = max(_max_diff(f, e) for f, e in zip(found, expected))

    if config.weight_max >= 4:
        R = geometry.grothendieck(geometry.geodesic_exp(geo, 3))
        table = geometry.connection_table(R, ConventionFlags(), max_k=2)
        for k, l in enumerate(fedosov.extract_linf(geo, I)):
            arr = np.zeros_like(table[("hol", k)])
            for a in range(geo.dim):
                for i in range(geo.dim):
                    arr[(a, i)] = geometry.taylor_tensor(l.component(a, i), names, k)
            report.residuals[f"linf_l{k}"] = _max_diff(arr, table[("hol", k)])
    report.data["I"] = I.to_json()
    return report


@pipeline("theta")
def _run_theta(config):
    geo = _geometry(config)
    theta = fedosov.theta_series(geo, config.N, tol=config.tolerance)
    report = Report(config.name)
    report.residuals["theta_mc"] = fedosov.theta_mc_residual(theta)
    report.residuals["theta_form"] = fedosov.theta_form_residual(theta)
    report.data["leading_term"] = [c.to_json() for c in theta.leading_term()]
    return report


###########################################
#
# Graph and weight pipelines
#
###########################################

@pipeline("graphs", "enumerate")
def _run_graphs_enumerate(config):
    entries = graphs.enumerate_bfv(config.n_bulk, config.max_valence, config.rep)
    report = Report(config.name, data={"catalog": [e.to_dict() for e in entries],
                                       "operator": graphs.bfv_term_report(entries)})
    report.diagnostics["classes"] = float(len(entries))
    report.diagnostics["surviving"] = float(sum(e.verdict.keep for e in entries))
    if not entries:
        report.notes.append("absence of solutions")
    return report


def _graph_records(data, location):
    """(label, graph, expected verdict) from a catalog file."""
    if "shapes" in data:
        shapes = data["shapes"]
        figures = data.get("figures") or {"shapes": {"shapes": list(shapes), "red": []}}
        for fig, spec in figures.items():
            for label in spec["shapes"]:
                try:
                    entry = shapes[label]
                except KeyError:
                    raise ParseError(f"figure {fig} refers to unknown shape {label!r}", location)
                g = graphs.FeynmanGraph.from_json(entry["graph"], location=f"{location}:{label}")
                red = {v: "bulk_red" for v in spec.get("red", []) if v in g.bulk()}
                g = graphs.FeynmanGraph([(v, red.get(v, k)) for v, k in g.vertices], g.edges)
                yield f"{fig}/{label}", g, entry.get("verdict")
        return
    for i, entry in enumerate(data.get("graphs", [])):
        graph = entry.get("graph", entry)
        g = graphs.FeynmanGraph.from_json(graph, location=f"{location}:{i}")
        yield entry.get("label", str(i)), g, entry.get("verdict")


@pipeline("graphs", "check")
def _run_graphs_check(config):
    if not config.graphs:
        raise ConfigurationError("graphs check needs a graph catalog FILE")
    data = _read_json(config.graphs)
    report = Report(config.name)
    rows = []
    mismatched = 0
    for label, g, expected in _graph_records(data, config.graphs):
        entry = graphs.catalog_entry(g, rep=config.rep)
        row = {"label": label, **entry.to_dict()}
        if expected is not None:
            row["expected"] = expected
            if str(entry.verdict) != expected:
                mismatched += 1
                logger.warning(f"{label}: verdict {entry.verdict}, expected {expected}")
        rows.append(row)
    report.residuals["verdict_mismatches"] = float(mismatched)
    report.diagnostics["graphs"] = float(len(rows))
    report.data["entries"] = rows
    return report


def theta_graph():
    return graphs.FeynmanGraph([("u", "bulk_black"), ("v", "bulk_black")], [("u", "v")] * 3)


@pipeline("weights", "eval")
def _run_weights_eval(config):
    geo = _geometry(config)
    if config.graphs:
        data = _read_json(config.graphs)
        records = [(label, g) for label, g, _ in _graph_records(
            data if ("shapes" in data or "graphs" in data) else {"graphs": [data]}, config.graphs)]
    else:
        records = [("theta", theta_graph())]
    report = Report(config.name)
    tensors = []
    worst_methods = worst_antisymmetry = 0.0
    for label, g in records:
        W = weights.contract_graph(g, geo, config.method, config.normalization)
        other = "tensordot" if config.method == "einsum" else "einsum"
        V = weights.contract_graph(g, geo, other, config.normalization)
        worst_methods = max(worst_methods, _max_diff(W.components, V.components))
        if not W.is_antisymmetric(config.tolerance):
            worst_antisymmetry = max(worst_antisymmetry, W.max_abs())
        tensors.append({"label": label, **W.to_json()})
    report.residuals["method_agreement"] = worst_methods
    report.residuals["antisymmetry"] = worst_antisymmetry
    report.data["weights"] = tensors
    return report


@pipeline("weights", "ihx")
def _run_weights_ihx(config):
    geo = _geometry(config)
    report = Report(config.name)
    report.residuals["ihx"] = weights.ihx_residual(geo, config.perturbation, config.seed)
    return report


@pipeline("weights", "as")
def _run_weights_as(config):
    geo = _geometry(config)
    check = weights.as_symmetry_check(geo, config.tolerance)
    report = Report(config.name, data=check.to_dict())
    report.residuals["symmetry"] = check.symmetry_defect
    report.residuals["trace"] = check.trace_defect
    return report


###########################################
#
# AKSZ pipelines
#
###########################################

@pipeline("aksz", "dcme")
def _run_aksz_dcme(config):
    geo = _geometry(config)
    model = _model(config)
    result = aksz.dcme_residuals(model, geo, config.weight_max, config.perturbation, config.seed)
    report = Report(config.name, data=result.to_dict())
    report.residuals.update(result.pieces)
    report.diagnostics.update({f"target_{k}": v for k, v in result.target.items()})
    report.diagnostics.update(result.halves)
    return report


@pipeline("aksz", "nilpotency")
def _run_aksz_nilpotency(config):
    report = Report(config.name)
    report.residuals.update(aksz.nilpotency_suite(config.seed, get_ring(config.ring)))
    return report


@pipeline("aksz", "degrees")
def _run_aksz_degrees(config):
    geo = _geometry(config)
    model = _model(config)
    field = aksz.FiniteModelField(model, geo.n, ring=geo.ring)
    S = aksz.split_action_eval(model, geo, field, config.weight_max)
    degrees = aksz.term_degrees(S, field)
    report = Report(config.name, data={"superfields": field.degree_table(),
                                       "coefficients": aksz.action_degree_table(),
                                       "term_degrees": dict(sorted(degrees.items()))})
    report.residuals["misgraded_terms"] = float(sum(c for d, c in degrees.items() if d != 0))
    return report


@pipeline("aksz", "mdcme")
def _run_aksz_mdcme(config):
    geo = _geometry(config)
    model = _model(config, default="boundary")
    result = aksz.mdcme_boundary_term(model, geo, weight_max=config.weight_max, seed=config.seed)
    report = Report(config.name, data=result.to_dict())
    report.residuals["mdcme"] = result.defect
    report.diagnostics["discrepancy"] = result.discrepancy.max_abs()
    report.diagnostics["interaction"] = result.interaction.max_abs()
    return report


###########################################
#
# Entry points
#
###########################################

def write_report(config, report):
    os.makedirs(config.output, exist_ok=True)
    base = os.path.join(config.output, config.name)
    payload = {"command": report.command,
               "config": config.to_dict(),
               "flags": config.flags.to_dict(),
               "tolerance": config.tolerance,
               "passed": not report.failures(config.tolerance),
               "residuals": report.residuals,
               "diagnostics": report.diagnostics,
               "notes": report.notes,
               "data": report.data}
    with open(base + ".json", "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    table = render_table(report, config.tolerance)
    with open(base + ".txt", "w") as f:
        f.write(table)
    return base + ".json", table


def run(config):
    """
    Executes the selected pipeline and writes its report.

    Returns the exit status.
    """
    try:
        config.validate()
        report = PIPELINES[(config.command, config.subcommand)](config)
    except (ParseError, ConfigurationError, GeometryError, GraphError, NotInvertibleError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT
    except AssertionError as e:
        logger.error(f"internal invariant failed: {e}")
        return EXIT_INTERNAL
    path, table = write_report(config, report)
    sys.stdout.write(table)
    failures = report.failures(config.tolerance)
    if failures:
        logger.error(f"residuals above tolerance {config.tolerance:g}: {', '.join(failures)}")
        return EXIT_RESIDUAL
    logger.info(f"report written to {path}")
    return EXIT_OK


def _rep(value):
    value = {"A": "A_rep", "B": "B_rep"}.get(value, value)
    if value not in graphs.REPS:
        raise argparse.ArgumentTypeError(f"expected A, B, A_rep or B_rep, got {value!r}")
    return value


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1,
                        help="quaternionic dimension n; the holomorphic dimension is 2n")
    common.add_argument("--K", type=int, default=3, help="base order of the connection jets")
    common.add_argument("--seed", type=int, default=0, help="seed of the random jets")
    common.add_argument("--geometry", default=None, help="GeometryJet JSON file instead of random jets")
    modes = common.add_mutually_exclusive_group()
    for mode in geometry.MODES:
        modes.add_argument(f"--{mode}", dest="mode", action="store_const", const=mode)
    common.add_argument("--rational", dest="ring", action="store_const", const="rational",
                        help="exact rational coefficients")
    common.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    common.add_argument("--output", default=default_output_dir(), help="report directory")
    common.add_argument("--full-atiyah", action="store_true",
                        help="compare the antiholomorphic coefficient with the full Atiyah tensor")
    common.add_argument("--redef-R", dest="redef_R", action="store_true",
                        help="rescale reported Taylor tensors by (k+1)!")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rwglobal", formatter_class=fmt,
                                     description="Formal geometry, graph and master equation checks "
                                                 "for the globalized split Rozansky-Witten model.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("geometry", parents=[common], formatter_class=fmt,
                   help="write the jets of a random geometry")
    for name in ("expmap", "grothendieck", "flatness"):
        p = sub.add_parser(name, parents=[common], formatter_class=fmt)
        p.add_argument("--L", type=int, default=3, help="order of the exponential map")
        p.add_argument("--plain", dest="symplectic", action="store_false",
                       help="geodesic map without the symplectic correction")
    p = sub.add_parser("fedosov", parents=[common], formatter_class=fmt)
    p.add_argument("--weight-max", dest="weight_max", type=int, default=4)
    p = sub.add_parser("theta", parents=[common], formatter_class=fmt)
    p.add_argument("--N", type=int, default=4, help="largest y-order of the series")

    p = sub.add_parser("graphs", formatter_class=fmt)
    gsub = p.add_subparsers(dest="subcommand", required=True)
    q = gsub.add_parser("enumerate", parents=[common], formatter_class=fmt)
    q.add_argument("--n-bulk", dest="n_bulk", type=int, default=1)
    q.add_argument("--max-valence", dest="max_valence", type=int, default=6)
    q.add_argument("--rep", type=_rep, default="B_rep")
    q = gsub.add_parser("check", parents=[common], formatter_class=fmt)
    q.add_argument("graphs_file", nargs="?", default=None, metavar="FILE",
                   help="graph catalog JSON file")
    q.add_argument("--graphs", "--graph", dest="graphs", default=None, help="same as FILE")
    q.add_argument("--rep", type=_rep, default="B_rep")

    p = sub.add_parser("weights", formatter_class=fmt)
    wsub = p.add_subparsers(dest="subcommand", required=True)
    q = wsub.add_parser("eval", parents=[common], formatter_class=fmt)
    q.add_argument("--graphs", "--graph", dest="graphs", default=None,
                   help="graph JSON file; the theta graph if omitted")
    q.add_argument("--method", choices=weights.METHODS, default="einsum")
    q.add_argument("--normalization", type=float, default=1.0)
    q = wsub.add_parser("ihx", parents=[common], formatter_class=fmt)
    q.add_argument("--perturbation", type=float, default=0.0)
    wsub.add_parser("as", parents=[common], formatter_class=fmt)

    p = sub.add_parser("aksz", formatter_class=fmt)
    asub = p.add_subparsers(dest="subcommand", required=True)
    q = asub.add_parser("dcme", parents=[common], formatter_class=fmt)
    q.add_argument("--model", default=None, help=f"model JSON file or one of {sorted(aksz.MODELS)}")
    q.add_argument("--weight-max", dest="weight_max", type=int, default=4)
    q.add_argument("--perturbation", type=float, default=0.0)
    asub.add_parser("nilpotency", parents=[common], formatter_class=fmt)
    q = asub.add_parser("degrees", parents=[common], formatter_class=fmt)
    q.add_argument("--model", default=None)
    q.add_argument("--weight-max", dest="weight_max", type=int, default=4)
    q = asub.add_parser("mdcme", parents=[common], formatter_class=fmt)
    q.add_argument("--model", default=None, help="defaults to the boundary model")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig.from_args(args)
    except (ConfigurationError, TypeError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
