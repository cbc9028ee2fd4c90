"""Command-line surface: sketch, explain, and bench subcommands.

Exit codes are part of the contract so harnesses can script failure modes:
0 success, 1 usage or bad input, 2 sketch gave up (partial sketch still
written), 3 model I/O failure.  Data goes to files and a one-line JSON
summary to stdout; logs go to stderr (level via ``AMORTIZED_SHAP_LOG``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from .bridge import bridge_connect
from .errors import (
    AmortizedShapError,
    BridgeIOError,
    CapacityError,
    ConfigurationError,
    ContractViolationError,
    FormatError,
    ProtocolError,
)
from .explain import (
    aggregate,
    explain_many,
    write_aggregate_csv,
    write_interactions_csv,
    write_reports_json,
    write_shap_csv,
)
from .models import (
    ModelHandle,
    SyntheticLandscapeSpec,
    make_synthetic,
    make_trig3_fixture,
    TRIG3_N,
    TRIG3_Q,
)
from .oracles import RuntimeLedger, monte_carlo_shap, run_benchmark, write_ledger_csv, write_ledger_json
from .qary import QaryVector
from .sketch import SketchConfig, load_sketch_bundle, save_sketch, sketch

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SKETCH_SOFT_FAIL = 2
EXIT_MODEL_IO = 3

FIXTURES = {"trig3": (make_trig3_fixture, TRIG3_Q, TRIG3_N)}


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code pinned to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging() -> None:
    level = os.environ.get("AMORTIZED_SHAP_LOG", "WARNING").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _parse_synthetic(text: str, q: int, n: int, seed: int) -> SyntheticLandscapeSpec:
    """Parse ``s=10,l=3[,noise=0.0][,amin=0.5][,amax=2.0]``."""
    fields = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ContractViolationError(f"bad synthetic field {part!r}, expected key=value")
        key, value = part.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        return SyntheticLandscapeSpec(
            q=q,
            n=n,
            s=int(fields.pop("s")),
            lmax=int(fields.pop("l")),
            amplitude_range=(
                float(fields.pop("amin", 0.5)),
                float(fields.pop("amax", 2.0)),
            ),
            seed=seed,
            noise_sd_out=float(fields.pop("noise", 0.0)),
        )
    except KeyError as exc:
        raise ContractViolationError(f"synthetic spec missing required field {exc}") from exc
    finally:
        if fields:
            log.warning("ignoring unknown synthetic fields: %s", sorted(fields))


def _open_model(args, parser: argparse.ArgumentParser) -> ModelHandle:
    sources = [
        name
        for name, value in (
            ("--model-cmd", getattr(args, "model_cmd", None)),
            ("--synthetic", getattr(args, "synthetic", None)),
            ("--fixture", getattr(args, "fixture", None)),
        )
        if value
    ]
    if len(sources) != 1:
        parser.error(f"exactly one model source required, got {sources or 'none'}")
    if args.fixture:
        if args.fixture not in FIXTURES:
            parser.error(f"unknown fixture {args.fixture!r}; available: {sorted(FIXTURES)}")
        maker, q, n = FIXTURES[args.fixture]
        if (args.q is not None and args.q != q) or (args.n is not None and args.n != n):
            parser.error(f"fixture {args.fixture} is q={q}, n={n}")
        model, _ = maker()
        return model
    if args.q is None or args.n is None:
        parser.error("--q and --n are required with --model-cmd/--synthetic")
    if args.synthetic:
        model, _ = make_synthetic(_parse_synthetic(args.synthetic, args.q, args.n, args.seed))
        return model
    return bridge_connect(args.model_cmd, args.q, args.n)


def _read_queries(path, q: int, n: int) -> list[QaryVector]:
    queries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                elems = tuple(int(tok) for tok in line.split(","))
                queries.append(QaryVector(elems, q))
            except (ValueError, ContractViolationError) as exc:
                raise ContractViolationError(f"{path}:{lineno}: bad query line: {exc}") from exc
            if len(elems) != n:
                raise ContractViolationError(
                    f"{path}:{lineno}: query has {len(elems)} symbols, expected {n}"
                )
    if not queries:
        raise ContractViolationError(f"{path}: no queries found")
    return queries


def _sketch_config(args) -> SketchConfig:
    return SketchConfig(
        b=args.b,
        num_subsample=args.num_subsample,
        num_repeat=args.num_repeat,
        noise_sd=args.noise_sd,
        lmax=args.lmax,
        seed=args.seed,
        exact=args.exact,
    )


def cmd_sketch(args, parser) -> int:
    model = _open_model(args, parser)
    config = _sketch_config(args)
    try:
        spectrum, diag = sketch(model, config)
    finally:
        model.close()
    save_sketch(spectrum, diag, args.out, lmax=config.lmax)
    print(
        json.dumps(
            {
                "out": str(args.out),
                "queries_used": diag.queries_used,
                "coefficients_recovered": diag.coefficients_recovered,
                "coefficients_discarded": diag.coefficients_discarded,
                "gave_up": diag.gave_up,
            },
            sort_keys=True,
        )
    )
    return EXIT_SKETCH_SOFT_FAIL if diag.gave_up else EXIT_OK


def cmd_explain(args, parser) -> int:
    spectrum, _diag, lmax = load_sketch_bundle(args.sketch)
    queries = _read_queries(args.queries, spectrum.q, spectrum.n)
    order = args.order if args.order is not None else max(1, lmax)
    reports = explain_many(spectrum, queries, order, jobs=args.jobs)
    if args.format == "json":
        write_reports_json(reports, args.out)
    else:
        write_shap_csv(reports, args.out)
        root, ext = os.path.splitext(str(args.out))
        write_interactions_csv(reports, f"{root}_interactions{ext or '.csv'}")
    if args.aggregate:
        write_aggregate_csv(aggregate(reports), args.aggregate)
    print(
        json.dumps(
            {"out": str(args.out), "queries": len(reports), "order": order}, sort_keys=True
        )
    )
    return EXIT_OK


def cmd_bench(args, parser) -> int:
    have_model = args.model_cmd or args.synthetic or args.fixture
    if args.sketch is None and not have_model:
        parser.error("bench needs --sketch or a model source")
    if args.sketch is not None:
        spectrum, diag, lmax = load_sketch_bundle(args.sketch)
        queries = _read_queries(args.queries, spectrum.q, spectrum.n)
        order = max(1, min(lmax, spectrum.max_weight() or 1))
        ledger = RuntimeLedger(sketch_wall_time=0.0, sketch_queries=diag.queries_used)
        from .explain import explain  # local alias for timing loop

        for qi, query in enumerate(queries):
            if qi == 0:
                explain(spectrum, query, order)
            start = time.perf_counter()
            explain(spectrum, query, order)
            ledger.per_query_explain_times.append(time.perf_counter() - start)
        if args.baseline == "mc":
            if not have_model:
                parser.error("baseline timing needs a model source")
            model = _open_model(args, parser)
            try:
                for qi, query in enumerate(queries):
                    start = time.perf_counter()
                    monte_carlo_shap(model, query, args.permutations, seed=args.seed + qi)
                    ledger.baseline_per_query_times.append(time.perf_counter() - start)
            finally:
                model.close()
    else:
        model = _open_model(args, parser)
        config = _sketch_config(args)
        queries = _read_queries(args.queries, model.q, model.n)
        try:
            ledger, _spectrum, _reports = run_benchmark(
                model,
                config,
                queries,
                baseline=args.baseline,
                num_permutations=args.permutations,
                seed=args.seed,
            )
        finally:
            model.close()
    write_ledger_csv(ledger, str(args.out) + ".csv")
    write_ledger_json(ledger, str(args.out) + ".json")
    print(
        json.dumps(
            {
                "out": str(args.out),
                "crossover": ledger.crossover(),
                "mean_explain_time": ledger.mean_explain_time(),
                "mean_baseline_time": ledger.mean_baseline_time(),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _add_model_source_flags(sub) -> None:
    sub.add_argument("--model-cmd", help="external model command speaking the bridge protocol")
    sub.add_argument("--synthetic", help="synthetic landscape spec, e.g. 's=10,l=3'")
    sub.add_argument("--fixture", help=f"builtin fixture name: {sorted(FIXTURES)}")
    sub.add_argument("--q", type=int, help="alphabet size")
    sub.add_argument("--n", type=int, help="sequence length")


def _add_sketch_param_flags(sub) -> None:
    sub.add_argument("--b", type=int, default=3, help="bins exponent (q^b bins per hash)")
    sub.add_argument("--num-subsample", type=int, default=3)
    sub.add_argument("--num-repeat", type=int, default=3)
    sub.add_argument("--noise-sd", type=float, default=0.0)
    sub.add_argument("--lmax", type=int, default=5, help="max interaction order retained")
    sub.add_argument("--exact", action="store_true", help="dense exact mode (small q^n only)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amortized-shap", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sketch = subs.add_parser("sketch", help="sketch a model into a sparse spectrum file")
    _add_model_source_flags(p_sketch)
    _add_sketch_param_flags(p_sketch)
    p_sketch.add_argument("--seed", type=int, default=0)
    p_sketch.add_argument("--out", required=True, help="output sketch JSON path")
    p_sketch.set_defaults(func=cmd_sketch)

    p_explain = subs.add_parser("explain", help="explain queries against a sketch file")
    p_explain.add_argument("--sketch", required=True, help="sketch JSON path")
    p_explain.add_argument("--queries", required=True, help="query file, one comma-separated sequence per line")
    p_explain.add_argument("--order", type=int, help="max interaction order (default: sketch lmax)")
    p_explain.add_argument("--out", required=True, help="output report path")
    p_explain.add_argument("--format", choices=("json", "csv"), default="json")
    p_explain.add_argument("--jobs", type=int, default=1, help="parallel explanation threads")
    p_explain.add_argument("--aggregate", help="also write an aggregate CSV to this path")
    p_explain.set_defaults(func=cmd_explain)

    p_bench = subs.add_parser("bench", help="measure amortized explanation cost")
    p_bench.add_argument("--sketch", help="reuse an existing sketch file")
    _add_model_source_flags(p_bench)
    _add_sketch_param_flags(p_bench)
    p_bench.add_argument("--queries", required=True)
    p_bench.add_argument("--baseline", choices=("mc",), default="mc")
    p_bench.add_argument("--permutations", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True, help="output prefix for .csv and .json ledgers")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (BridgeIOError, ProtocolError) as exc:
        print(f"model I/O error: {exc}", file=sys.stderr)
        return EXIT_MODEL_IO
    except (ContractViolationError, FormatError, ConfigurationError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AmortizedShapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_MODEL_IO


if __name__ == "__main__":
    sys.exit(main())
