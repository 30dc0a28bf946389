"""Command-line interface.

Subcommands cover the full pipeline: ``gen`` synthetic signatures,
``enroll`` them into a bundle of group representatives, ``verify``
queries against a bundle, ``roc`` curves from score files, ``attack``
reports against a bundle, ``bloom-tune`` the baseline parameters, and
``experiment`` for the named report presets. Reports are CSV; the
``experiment`` and ``roc`` paths also render a PNG figure next to the
CSV unless ``--no-plot`` is given.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .aggregation import AggregationScheme, SignatureSet
from .attack import write_attack_csv
from .bloom import InfeasibleTuningError, tune, write_bloom_params_csv
from .embedding import decode_code, embed_batch, encode_code, make_transform
from .experiments import (PRESET_NAMES, RepresentativeBank,
                          build_representatives, evaluate_attack,
                          gen_signatures, parse_config_text, run_preset,
                          write_rows_csv)
from .partitioning import GroupAssignment, kmeans_partition, random_partition, \
    write_assignment_csv
from .verification import roc_curve, score_matrix, write_roc_csv

_FLOAT_FMT = "%.9g"


def _write_signatures_csv(sigs: SignatureSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index"] + [f"x{i}" for i in range(sigs.dim)])
        for j in range(sigs.count):
            writer.writerow([j] + [_FLOAT_FMT % v for v in sigs.matrix[:, j]])


def _read_signatures_csv(path) -> SignatureSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "index":
            raise ValueError(f"{path}: expected a signatures CSV with an index column")
        rows = [[float(v) for v in row[1:]] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no signatures found")
    return SignatureSet(np.asarray(rows, dtype=float).T)


def _read_scores_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        try:
            col = header.index("score")
        except ValueError:
            raise ValueError(f"{path}: no 'score' column") from None
        return np.array([float(row[col]) for row in reader if row], dtype=float)


def _write_kv(path, items) -> None:
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key} = {value}\n")


def _read_kv(path) -> dict[str, str]:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------------------
# Enrollment bundles
# ---------------------------------------------------------------------------

def _save_bundle(out_dir: Path, scheme, sigs, assignment, bank, args) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_kv(out_dir / "meta.cfg", [
        ("dim", sigs.dim),
        ("count", sigs.count),
        ("groups", assignment.n_groups),
        ("scheme", scheme.value),
        ("sparsity", _FLOAT_FMT % args.sparsity),
        ("sigma_x", _FLOAT_FMT % args.sigma_x),
        ("seed", args.seed),
        ("lambda_query", _FLOAT_FMT % bank.query_threshold),
    ])
    write_assignment_csv(assignment, out_dir / "assignment.csv")
    with open(out_dir / "groups.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "size", "lambda_rep", "prior_sigma"])
        for k in range(assignment.n_groups):
            writer.writerow([k, int(assignment.sizes[k]),
                             _FLOAT_FMT % bank.thresholds[k],
                             _FLOAT_FMT % bank.priors[k]])
    for k, code in enumerate(bank.codes):
        (out_dir / f"rep_{k:05d}.tern").write_bytes(encode_code(code))


def _load_bundle(bundle_dir: Path):
    meta = _read_kv(bundle_dir / "meta.cfg")
    n_groups = int(meta["groups"])
    labels = np.empty(int(meta["count"]), dtype=int)
    with open(bundle_dir / "assignment.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                labels[int(row[0])] = int(row[1])
    assignment = GroupAssignment(labels=labels, n_groups=n_groups)
    thresholds, priors = [0.0] * n_groups, [0.0] * n_groups
    with open(bundle_dir / "groups.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                thresholds[int(row[0])] = float(row[2])
                priors[int(row[0])] = float(row[3])
    codes = np.stack([decode_code((bundle_dir / f"rep_{k:05d}.tern").read_bytes())
                      for k in range(n_groups)])
    return meta, assignment, codes, thresholds, priors


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_gen(args) -> int:
    sigs = gen_signatures(args.count, args.dim, args.sigma_x, args.seed)
    _write_signatures_csv(sigs, args.out)
    print(f"wrote {args.count} signatures of dim {args.dim} to {args.out}")
    return 0


def _cmd_enroll(args) -> int:
    sigs = _read_signatures_csv(args.signatures)
    scheme = AggregationScheme(args.scheme)
    if args.normalize:
        sigs = SignatureSet(sigs.matrix / np.linalg.norm(sigs.matrix, axis=0))
    if args.groups == 1:
        assignment = GroupAssignment(labels=np.zeros(sigs.count, dtype=int),
                                     n_groups=1)
    elif args.partitioner == "kmeans":
        assignment = kmeans_partition(sigs, args.groups, seed=args.seed)
    else:
        assignment = random_partition(sigs.count, args.groups, seed=args.seed)
    transform = make_transform(sigs.dim, sigs.dim, args.seed)
    group_sets = [sigs.subset(assignment.members(k))
                  for k in range(args.groups)]
    bank = build_representatives(scheme, group_sets, transform,
                                 args.sparsity, args.sigma_x)
    _save_bundle(Path(args.out), scheme, sigs, assignment, bank, args)
    print(f"enrolled {sigs.count} signatures into {args.groups} group(s) at {args.out}")
    return 0


def _cmd_verify(args) -> int:
    bundle = Path(args.bundle)
    meta, _, codes, _, _ = _load_bundle(bundle)
    queries = _read_signatures_csv(args.queries)
    if queries.dim != int(meta["dim"]):
        raise ValueError(f"queries have dim {queries.dim}, bundle expects {meta['dim']}")
    transform = make_transform(int(meta["dim"]), int(meta["dim"]), int(meta["seed"]))
    q_codes = embed_batch(queries.matrix, transform, float(meta["lambda_query"]))
    scores = score_matrix(q_codes, codes).max(axis=1)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "score", "decision"])
        for i, s in enumerate(scores):
            decision = "" if args.tau is None else int(s > args.tau)
            writer.writerow([i, _FLOAT_FMT % s, decision])
    print(f"scored {queries.count} queries against {codes.shape[0]} group(s) -> {args.out}")
    return 0


def _cmd_roc(args) -> int:
    pos = _read_scores_csv(args.pos)
    neg = _read_scores_csv(args.neg)
    curve = roc_curve(pos, neg)
    write_roc_csv(curve, args.out)
    outputs = [str(args.out)]
    if not args.no_plot:
        from .plots import render_roc_figure
        png = Path(args.out).with_suffix(".png")
        render_roc_figure(curve, png)
        outputs.append(str(png))
    print(f"AUC = {curve.auc:.6f}; wrote {', '.join(outputs)}")
    return 0


def _cmd_attack(args) -> int:
    bundle = Path(args.bundle)
    meta, assignment, codes, thresholds, priors = _load_bundle(bundle)
    sigs = _read_signatures_csv(args.signatures)
    if sigs.count != int(meta["count"]) or sigs.dim != int(meta["dim"]):
        raise ValueError("signatures CSV does not match the bundle shape")
    scheme = AggregationScheme(meta["scheme"])
    transform = make_transform(sigs.dim, sigs.dim, int(meta["seed"]))
    group_sets = [sigs.subset(assignment.members(k))
                  for k in range(assignment.n_groups)]
    bank = RepresentativeBank(codes=codes, thresholds=thresholds, priors=priors,
                              query_threshold=float(meta["lambda_query"]))
    report = evaluate_attack(scheme, group_sets, bank, transform,
                             float(meta["sigma_x"]))
    write_attack_csv([report], args.out)
    print(f"attack report for scheme {scheme.value}: "
          f"MSE_e = {report.mse_enrolled_empirical:.6g} -> {args.out}")
    return 0


def _cmd_bloom_tune(args) -> int:
    try:
        params = tune(args.count, args.p_fp, entropy_margin=args.margin,
                      epsilon=args.epsilon, sigma_x=args.sigma_x,
                      sigma_n=args.sigma_n)
    except InfeasibleTuningError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    write_bloom_params_csv(params, args.out)
    print(f"tuned lambda={params.threshold:.4g} l={params.code_len} "
          f"l_B={params.filter_bits} k={params.k_hashes} -> {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    overrides = None
    if args.config:
        text = Path(args.config).read_text()
        if args.preset == "bloom-baseline":
            overrides = {k: v for k, v in _read_kv(args.config).items()}
        else:
            overrides = parse_config_text(text)
    rows, columns = run_preset(args.preset, seed=args.seed, scale=args.scale,
                               overrides=overrides)
    out = Path(args.out) if args.out else Path(f"{args.preset}.csv")
    write_rows_csv(rows, columns, out)
    outputs = [str(out)]
    if not args.no_plot:
        from .plots import render_preset_figure
        png = out.with_suffix(".png")
        if render_preset_figure(args.preset, rows, png):
            outputs.append(str(png))
    print(f"{args.preset}: {len(rows)} row(s) -> {', '.join(outputs)}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupsketch",
        description="Privacy-preserving group membership verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic Gaussian signatures")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sigma-x", dest="sigma_x", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("enroll", help="aggregate signatures into group representatives")
    p.add_argument("--signatures", required=True)
    p.add_argument("--scheme", choices=[s.value for s in AggregationScheme],
                   required=True)
    p.add_argument("--sparsity", type=float, default=0.6)
    p.add_argument("--groups", type=int, default=1)
    p.add_argument("--partitioner", choices=["random", "kmeans"], default="random")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--sigma-x", dest="sigma_x", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="bundle directory")
    p.set_defaults(func=_cmd_enroll)

    p = sub.add_parser("verify", help="score query signatures against a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("roc", help="ROC curve and AUC from score files")
    p.add_argument("--pos", required=True, help="CSV with H1 scores")
    p.add_argument("--neg", required=True, help="CSV with H0 scores")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_roc)

    p = sub.add_parser("attack", help="reconstruction attack report for a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--signatures", required=True,
                   help="the enrolled signatures (ground truth for the MSE)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("bloom-tune", help="tune the Bloom baseline parameters")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--p-fp", dest="p_fp", type=float, default=0.01)
    p.add_argument("--margin", type=float, default=3.0, help="entropy margin in nats")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--sigma-x", dest="sigma_x", type=float, default=1.0)
    p.add_argument("--sigma-n", dest="sigma_n", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bloom_tune)

    p = sub.add_parser("experiment", help="run a named experiment preset")
    p.add_argument("preset", choices=PRESET_NAMES)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scale", type=float, default=1.0,
                   help="shrink enrolled counts and trial counts for quick runs")
    p.add_argument("--config", default=None,
                   help="key = value file overriding preset parameters")
    p.add_argument("--out", default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
