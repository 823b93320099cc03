"""Command-line front end.

Every subcommand reads a JSON configuration (``--config``) or, with ``--seed``
and no config, a seeded random graph.  Results go to ``--out DIR`` as
``<subcommand>.csv`` / ``<subcommand>.json`` (stdout when ``--out`` is absent).
CSV files start with ``#``-prefixed manifest lines; JSON reports carry the
manifest under ``"manifest"``.  Output contains no timestamps, so identical
inputs give byte-identical files.

Exit status: 0 success, 1 invalid input or failed check, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dislocation import StabilizationError, dislocation_report
from .graph import (ConfigError, GridFunction, Robin, SolverSettings, StarGraph, load_config,
                    parse_extended_real, random_graph)
from .matching import MatchingError, as_pair, validate_matching
from .oracle import ResolutionError, discretize, oracle_spectrum
from .propagator import PropagationError
from .resolvent import (SpectralPointError, apply_graph_resolvent, regularized_trace, trace_edge_diff,
                        trace_robin_diff)
from .spectrum import ScanError, check_interlacing, monotonicity_check, robin_spectrum
from .weyl import PoleError, char_entries

__all__ = ["RunManifest", "build_parser", "run", "main"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

_NUMERICAL_ERRORS = (PropagationError, ScanError, StabilizationError, SpectralPointError, PoleError,
                     ResolutionError, np.linalg.LinAlgError, ArithmeticError)


class UsageError(Exception):
    """Bad command line (unknown flag, missing config, malformed value)."""


@dataclass
class RunManifest:
    subcommand: str
    config: Optional[str]
    outputs: list[str]
    settings: dict
    options: dict
    graph_fingerprint: str
    seed: Optional[int] = None
    version: str = __version__
    schema: str = "run-manifest/1"

    def to_dict(self) -> dict:
        return asdict(self)

    def header_lines(self) -> list[str]:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return [f"# manifest {text}"]


# ----------------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pair(text: str) -> tuple[float, float]:
    parts = [s for s in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}") from None


def _complex(text: str) -> complex:
    re_, im_ = _pair(text)
    return complex(re_, im_)


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None


def _ext(text: str) -> float:
    try:
        return parse_extended_real(text)
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--seed", type=int, help="seed for a random graph when no config is given")

    parser = _Parser(prog="diracstar", description="Spectral computations for Dirac systems on star graphs.")
    parser.add_argument("--version", action="version", version=f"diracstar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", parents=[common], help="Robin spectrum in a window (CSV: lambda,multiplicity,tag)")
    p.add_argument("--window", type=_pair)
    p.add_argument("--tau", type=_ext)

    p = sub.add_parser("weyl", parents=[common], help="Weyl function sample of one edge (JSON)")
    p.add_argument("--edge", type=int, default=0)
    p.add_argument("--z", type=_complex, required=True)

    p = sub.add_parser("resolve", parents=[common], help="apply the graph resolvent to a CSV right-hand side")
    p.add_argument("--z", type=_complex, required=True)
    p.add_argument("--rhs", required=True, help="CSV with columns edge,x,re_f,im_f,re_fhat,im_fhat")
    p.add_argument("--tau", type=_ext)

    p = sub.add_parser("trace", parents=[common], help="trace formulas at z (JSON)")
    p.add_argument("--z", type=_complex, required=True)
    p.add_argument("--z2", type=_complex, help="second point for edge trace differences")
    p.add_argument("--tau", type=_ext)

    p = sub.add_parser("dislocation", parents=[common], help="dislocation indices and d_R bounds (JSON)")
    p.add_argument("--R", type=_float_list, default=[20.0, 40.0, 80.0])
    p.add_argument("--tau", type=_ext)

    p = sub.add_parser("oracle", parents=[common], help="dense discretization eigenvalues (CSV: lambda,multiplicity)")
    p.add_argument("--M", type=int, default=128)
    p.add_argument("--window", type=_pair)
    p.add_argument("--tau", type=_ext)

    sub.add_parser("validate", parents=[common], help="validate the configuration and matching condition (JSON)")

    p = sub.add_parser("interlace", parents=[common], help="interlacing and monotonicity for two tau values (JSON)")
    p.add_argument("--window", type=_pair)
    p.add_argument("--tau", type=_ext)
    p.add_argument("--tau2", type=_ext, required=True)
    return parser


# ----------------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------------


def _load(args) -> tuple[StarGraph, object, SolverSettings]:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        return load_config(text)
    if args.seed is not None:
        graph = random_graph(np.random.default_rng(args.seed))
        return graph, Robin(math.inf), SolverSettings()
    raise UsageError("missing --config (or --seed for a random graph)")


def _tau(args, matching) -> float:
    tau = getattr(args, "tau", None)
    if tau is not None:
        return tau
    if isinstance(matching, Robin):
        return matching.tau
    raise ConfigError(f"'{args.command}' needs a Robin matching condition or --tau")


def _matching(args, matching):
    tau = getattr(args, "tau", None)
    return Robin(tau) if tau is not None else matching


def _num(v: float) -> str:
    return repr(float(v))


def _options(args) -> dict:
    skip = {"command", "config", "out", "seed"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or v is None:
            continue
        if isinstance(v, complex):
            v = [v.real, v.imag]
        elif isinstance(v, float) and math.isinf(v):
            v = "inf" if v > 0 else "-inf"
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class _Writer:
    def __init__(self, args, manifest: RunManifest):
        self.args = args
        self.manifest = manifest

    def _target(self, ext: str) -> Optional[str]:
        if not self.args.out:
            return None
        os.makedirs(self.args.out, exist_ok=True)
        path = os.path.join(self.args.out, f"{self.args.command}.{ext}")
        self.manifest.outputs = [path]
        return path

    def _emit(self, path: Optional[str], text: str) -> None:
        if path is None:
            sys.stdout.write(text)
        else:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)

    def csv(self, header: Sequence[str], rows: Sequence[Sequence]) -> None:
        path = self._target("csv")
        buf = io.StringIO()
        for line in self.manifest.header_lines():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
        self._emit(path, buf.getvalue())

    def json(self, report: dict) -> None:
        path = self._target("json")
        doc = {"manifest": self.manifest.to_dict(), "report": _jsonable(report)}
        self._emit(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_rhs(path: str, graph: StarGraph) -> GridFunction:
    rows: dict[int, list[list[float]]] = {j: [] for j in range(graph.n)}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise UsageError(f"cannot read rhs: {exc}") from None
    reader = csv.reader(lines)
    for rec in reader:
        if not rec or rec[0].strip() == "edge":
            continue
        if len(rec) != 6:
            raise ConfigError(f"rhs rows need 6 columns, got {len(rec)}")
        j = int(rec[0])
        if j not in rows:
            raise ConfigError(f"rhs refers to edge {j}, graph has {graph.n} edges")
        rows[j].append([float(v) for v in rec[1:]])
    grids, values = [], []
    for j, e in enumerate(graph.edges):
        data = np.array(sorted(rows[j]))
        if data.shape[0] < 3:
            raise ConfigError(f"rhs needs at least 3 points on edge {j}")
        x = data[:, 0]
        if x[0] != 0.0 or abs(x[-1] - e.length) > 1e-12 * e.length:
            raise ConfigError(f"rhs grid on edge {j} must span [0, {e.length}]")
        grids.append(x)
        values.append(np.column_stack([data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4]]))
    return GridFunction(grids, values)


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------


def _cmd_spectrum(args, graph, matching, settings, out: _Writer) -> int:
    window = args.window or settings.window
    spec = robin_spectrum(graph, _tau(args, matching), window, settings)
    out.csv(["lambda", "multiplicity", "tag"], [[_num(e.lam), e.multiplicity, e.tag] for e in spec.entries])
    return EXIT_OK


def _cmd_weyl(args, graph, matching, settings, out: _Writer) -> int:
    if not 0 <= args.edge < graph.n:
        raise ConfigError(f"--edge {args.edge} out of range for {graph.n} edges")
    s = char_entries(graph.edges[args.edge], args.z, settings, edge_index=args.edge)
    out.json(s.to_dict())
    return EXIT_OK


def _cmd_resolve(args, graph, matching, settings, out: _Writer) -> int:
    g = _read_rhs(args.rhs, graph)
    f = apply_graph_resolvent(graph, _matching(args, matching), args.z, g, settings)
    rows = []
    for j, (x, v) in enumerate(zip(f.grids, f.values)):
        for xi, (a, b) in zip(x, v):
            rows.append([j, _num(xi), _num(a.real), _num(a.imag), _num(b.real), _num(b.imag)])
    out.csv(["edge", "x", "re_f", "im_f", "re_fhat", "im_fhat"], rows)
    return EXIT_OK


def _cmd_trace(args, graph, matching, settings, out: _Writer) -> int:
    z = args.z
    report: dict = {"schema": "trace-report/1", "z": z}
    report["regularized"] = [regularized_trace(e, z, settings) for e in graph.edges]
    if args.z2 is not None:
        report["z2"] = args.z2
        report["edge_difference"] = [trace_edge_diff(e, z, args.z2, settings) for e in graph.edges]
    if isinstance(_matching(args, matching), Robin):
        tau = _tau(args, matching)
        report["tau"] = tau
        report["robin_difference"] = trace_robin_diff(graph, tau, z, settings)
    out.json(report)
    return EXIT_OK


def _cmd_dislocation(args, graph, matching, settings, out: _Writer) -> int:
    rep = dislocation_report(graph, _tau(args, matching), args.R, settings, edge_details=True)
    out.json(rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_INVALID


def _cmd_oracle(args, graph, matching, settings, out: _Writer) -> int:
    window = args.window or settings.window
    op = discretize(graph, _matching(args, matching), args.M)
    groups = oracle_spectrum(op, window)
    out.csv(["lambda", "multiplicity"], [[_num(lam), k] for lam, k in groups])
    return EXIT_OK


def _cmd_validate(args, graph, matching, settings, out: _Writer) -> int:
    pair = as_pair(matching, graph.n)
    rep = validate_matching(pair)
    report = {"schema": "validation-report/1", "edges": graph.n, "matching": rep.to_dict()}
    out.json(report)
    return EXIT_OK if rep.ok else EXIT_INVALID


def _cmd_interlace(args, graph, matching, settings, out: _Writer) -> int:
    window = args.window or settings.window
    tau1 = _tau(args, matching)
    tau2 = args.tau2
    s1 = robin_spectrum(graph, tau1, window, settings)
    s2 = robin_spectrum(graph, tau2, window, settings)
    inter = check_interlacing(s1, s2)
    same_side = (tau1 > 0 and tau2 > 0) or (tau1 < 0 and tau2 < 0)
    if same_side and tau1 != tau2:
        # monotonicity is stated for increasing tau
        ordered = (s1, s2) if tau1 < tau2 else (s2, s1)
        lo_tau, hi_tau = sorted((tau1, tau2))
        mono = monotonicity_check(graph, lo_tau, hi_tau, window, settings, spectra=ordered).to_dict()
        mono_ok = mono["ok"]
    else:
        mono = {"skipped": "tau values are not in one monotonicity interval"}
        mono_ok = True
    report = {
        "schema": "interlace-report/1",
        "tau": tau1,
        "tau2": tau2,
        "window": list(window),
        "interlacing": inter.to_dict(),
        "monotonicity": mono,
        "ok": bool(inter.ok and mono_ok),
    }
    out.json(report)
    return EXIT_OK if report["ok"] else EXIT_INVALID


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "weyl": _cmd_weyl,
    "resolve": _cmd_resolve,
    "trace": _cmd_trace,
    "dislocation": _cmd_dislocation,
    "oracle": _cmd_oracle,
    "validate": _cmd_validate,
    "interlace": _cmd_interlace,
}


_VALUE_FLAGS = {"--window", "--z", "--z2", "--tau", "--tau2", "--R"}


def _attach_values(argv: Sequence[str]) -> list[str]:
    """Join value flags with their argument so ``--window -4,4`` parses."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one subcommand and return the exit status."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_attach_values(argv))
        graph, matching, settings = _load(args)
    except UsageError as exc:
        print(f"diracstar: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, MatchingError) as exc:
        print(f"diracstar: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest = RunManifest(
        subcommand=args.command,
        config=args.config,
        outputs=[],
        settings=_jsonable(asdict(settings)),
        options=_options(args),
        graph_fingerprint=graph.fingerprint(),
        seed=args.seed,
    )
    try:
        return _COMMANDS[args.command](args, graph, matching, settings, _Writer(args, manifest))
    except UsageError as exc:
        print(f"diracstar: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _NUMERICAL_ERRORS as exc:
        print(f"diracstar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, MatchingError, ValueError) as exc:
        print(f"diracstar: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
