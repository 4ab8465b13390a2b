"""Command-line entry point: ``dcg <subcommand> [flags]``.

Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.
Data goes to files (or stdout when ``--out`` is omitted); logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import synth
from .classifier import load_classifier, save_classifier
from .counterfactuals import CounterfactualExplainer, Intervention, counterfactual_samples
from .exceptions import CheckpointError, DcgError, RejectionStall
from .graph import GraphSpec, load_graph
from .model import (
    DistributionalCausalGraph,
    load_model,
    read_dataset,
    save_model,
    write_dataset,
)
from .reporting import fit_report, write_effect_report, write_fit_report, write_kde_csv
from .validation import array_to_vector

logger = logging.getLogger("dcg")

BUILTIN_GRAPHS = {
    "builtin:shapes3d": synth.shapes3d_spec,
    "builtin:wetfloor": synth.wetfloor_spec,
}


class UsageError(Exception):
    pass


def resolve_graph(name: str) -> GraphSpec:
    if name in BUILTIN_GRAPHS:
        return BUILTIN_GRAPHS[name]()
    return load_graph(name)


def resolve_model(name: str) -> DistributionalCausalGraph:
    if name == "builtin:wetfloor":
        return synth.wet_floor_model()
    return load_model(name)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _row(X, i):
    if not 0 <= i < len(X):
        raise UsageError(f"row {i} out of range; the data has {len(X)} rows")
    return X[i]


def _positive(kind=int):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


# -- subcommands --------------------------------------------------------------

def cmd_gendata(args):
    if args.scm == "wetfloor":
        model = synth.wet_floor_model()
        X = model.sample(args.n, args.seed)
        graph = model.graph_
        sidecar = {"scm": "wetfloor", "seed": args.seed, "n_rows": args.n,
                   "seasons": list(synth.SEASONS),
                   "cpts": {k: list(v) for k, v in synth.WET_FLOOR_CPTS.items()}}
    else:
        cfg = synth.Shapes3dConfig(n_rows=args.n, seed=args.seed)
        X, diag = synth.generate_shapes3d(cfg)
        graph = synth.shapes3d_spec()
        sidecar = {"scm": "shapes3d", "constants": cfg.constants(), **diag}
    sidecar["graph"] = graph.to_dict()
    out, close = _open_out(args.out)
    try:
        write_dataset(graph, X, out)
    finally:
        if close:
            out.close()
    if args.sidecar:
        with open(args.sidecar, "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write("\n")
    logger.info("wrote %d rows", len(X))


def cmd_train(args):
    graph = resolve_graph(args.graph)
    X = read_dataset(args.data, graph)
    model = DistributionalCausalGraph(
        graph, epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
        random_state=args.seed,
    ).fit(X)
    for k, mll in enumerate(model.trace_, start=1):
        print(f"epoch,{k},mll,{mll!r}")
    save_model(model, args.out)


def cmd_train_clf(args):
    graph = resolve_graph(args.graph)
    X = read_dataset(args.data, graph)
    clf = synth.train_target_classifier(
        X, graph, seed=args.seed, target=args.target, epochs=args.epochs,
        holdout=args.holdout,
    )
    print(f"holdout_accuracy,{clf.holdout_accuracy_!r}")
    save_classifier(clf, args.out)


def cmd_explain(args):
    model = resolve_model(args.model)
    clf = load_classifier(args.classifier)
    if clf.graph_.names != model.graph_.names:
        raise UsageError("classifier and model were built on different graphs")
    X = read_dataset(args.data, model.graph_)
    x = _row(X, args.row)
    if args.nodes == "all":
        nodes = model.graph_.names
    else:
        nodes = [n.strip() for n in args.nodes.split(",") if n.strip()]
        unknown = [n for n in nodes if n not in model.graph_]
        if unknown:
            raise UsageError(f"unknown nodes {unknown}")
    explainer = CounterfactualExplainer(
        model, clf, samples=args.samples, n_grid=args.grid, weighting=args.weighting,
        sigma_prox=args.sigma_prox, random_state=args.seed, n_jobs=args.threads,
    )
    curves = explainer.explain(x, nodes)
    write_effect_report(model.graph_, curves, x, explainer.base_logit(x), args.out)


def cmd_evalfit(args):
    model = resolve_model(args.model)
    X = read_dataset(args.data, model.graph_)
    report = fit_report(model, X, n_gen=args.n_gen, random_state=args.seed)
    write_fit_report(report, args.out)
    if args.kde:
        write_kde_csv(report, args.kde)


def cmd_sample(args):
    model = resolve_model(args.model)
    out, close = _open_out(args.out)
    try:
        write_dataset(model.graph_, model.sample(args.n, args.seed), out)
    finally:
        if close:
            out.close()


def cmd_loglik(args):
    model = resolve_model(args.model)
    X = read_dataset(args.data, model.graph_)
    ll = model.score_samples(X)
    out, close = _open_out(args.out)
    try:
        out.write("row,loglik\n")
        for i, v in enumerate(ll):
            out.write(f"{i},{float(v)!r}\n")
    finally:
        if close:
            out.close()


def cmd_cf(args):
    model = resolve_model(args.model)
    graph = model.graph_
    X = read_dataset(args.data, graph)
    x = _row(X, args.row)
    iv = Intervention.parse(args.do, graph)
    if not iv:
        raise UsageError("--do needs at least one Node=value assignment")
    cf = counterfactual_samples(model, array_to_vector(graph, x), iv, args.n, args.seed)
    label = ",".join(f"{k}={v}" for k, v in iv.assignments.items())
    out, close = _open_out(args.out)
    try:
        write_dataset(graph, cf, out, extra=[("cf_id", list(range(len(cf)))),
                                             ("intervention", [label] * len(cf))])
    finally:
        if close:
            out.close()


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="dcg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gendata", parents=[common], help="generate a synthetic factor dataset")
    p.add_argument("--n", type=_positive(), default=50_000)
    p.add_argument("--scm", choices=["shapes3d", "wetfloor"], default="shapes3d")
    p.add_argument("--out", default="data.csv")
    p.add_argument("--sidecar", default=None, help="JSON file for the ground-truth constants")
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("train", parents=[common], help="fit a DCG by maximum likelihood")
    p.add_argument("--data", required=True)
    p.add_argument("--graph", default="builtin:shapes3d",
                   help="graph JSON file, builtin:shapes3d or builtin:wetfloor")
    p.add_argument("--epochs", type=_non_negative, default=30)
    p.add_argument("--lr", type=_positive(float), default=1e-2)
    p.add_argument("--batch", type=_positive(), default=256)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-clf", parents=[common], help="fit the factor classifier to explain")
    p.add_argument("--data", required=True)
    p.add_argument("--graph", default="builtin:shapes3d")
    p.add_argument("--target", default="Type")
    p.add_argument("--epochs", type=_non_negative, default=30)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--out", default="clf.json")
    p.set_defaults(func=cmd_train_clf)

    p = sub.add_parser("explain", parents=[common], help="single-node intervention effect curves")
    p.add_argument("--model", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--nodes", default="all")
    p.add_argument("--grid", type=_positive(), default=20)
    p.add_argument("--samples", type=_positive(), default=100)
    p.add_argument("--weighting", choices=["none", "likelihood", "proximity"], default="none")
    p.add_argument("--sigma-prox", type=_positive(float), default=0.25)
    p.add_argument("--threads", type=_positive(), default=1)
    p.add_argument("--out", default="effects.csv")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evalfit", parents=[common], help="compare model samples with the data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n-gen", type=_positive(), default=10_000)
    p.add_argument("--out", default="report.json")
    p.add_argument("--kde", default=None)
    p.set_defaults(func=cmd_evalfit)

    p = sub.add_parser("sample", parents=[common], help="draw samples from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive(), default=1000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("loglik", parents=[common], help="log-likelihood of each data row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_loglik)

    p = sub.add_parser("cf", parents=[common], help="counterfactual samples for one row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--do", required=True, help="Node=value[,Node=value]")
    p.add_argument("--n", type=_positive(), default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except RejectionStall as exc:
        print(f"dcg {args.command}: {exc}", file=sys.stderr)
        return 3
    except (UsageError, DcgError, OSError, CheckpointError, ValueError) as exc:
        print(f"dcg {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"dcg {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
