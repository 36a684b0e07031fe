"""Command-line entry point: ``credal-decal <subcommand> ...``.

Exit status is 0 on success, 1 on invalid input and 2 when a solver fails
to certify its result.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path


from .core import BoxCredalSet, SolverError, ValidationError
from .credal import predict_intervals
from .io import (
    SpiderPlotSpec,
    emit_spider_svg,
    read_boxes,
    read_distributions,
    read_labeled_logits,
    read_logits,
    read_model,
    write_boxes,
    write_csv,
    write_distributions,
    write_logits,
    write_model,
)
from .likelihood import SolverConfig, fit
from .metrics import auroc, coverage, efficiency, pareto_sweep
from .synth import SynthConfig, generate
from .uncertainty import eu_score, rank_by_uncertainty, uncertainty_report

log = logging.getLogger("credal_decal")

MEASURE_ALIASES = {"entropy": "eu_entropy", "zero-one": "eu_zero_one"}


def _alphas(text: str) -> list[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None


def _boxes_from_model(args, logits_path):
    model = read_model(args.model)
    Z = read_logits(logits_path)
    lo, hi = predict_intervals(model, Z, args.alpha)
    return model, lo, hi


def cmd_fit(args):
    data = read_labeled_logits(args.train)
    cfg = SolverConfig(tol_delta=args.tol, clamp=args.clamp)
    model = fit(data, args.alphas, mode=args.mode, cfg=cfg)
    write_model(model, args.output)
    log.info("fitted %d alpha levels x %d classes (%d root finds)",
             len(model.alphas), model.K, model.n_root_finds)


def cmd_predict(args):
    _, lo, hi = _boxes_from_model(args, args.test)
    write_boxes(args.output, lo, hi)


def cmd_uncertainty(args):
    _, lo, hi = _boxes_from_model(args, args.test)
    scale = 1.0 / math.log(2.0) if args.bits else 1.0
    if args.measure == "entropy":
        rows = []
        for a, b in zip(lo, hi):
            rep = uncertainty_report(BoxCredalSet(a, b))
            rows.append([rep.au * scale, rep.eu_entropy * scale, rep.tu * scale])
        write_csv(args.output, ["au", "eu", "tu"], rows)
    else:
        rows = [[eu_score(BoxCredalSet(a, b), "eu_zero_one")] for a, b in zip(lo, hi)]
        write_csv(args.output, ["eu"], rows)


def cmd_metrics(args):
    lo, hi = read_boxes(args.boxes)
    out = {
        "n_instances": int(lo.shape[0]),
        "efficiency": efficiency((lo, hi), tightened=args.tightened),
    }
    if args.gt:
        gts = read_distributions(args.gt, renormalize=args.renormalize)
        out["coverage"] = coverage((lo, hi), gts)
    Path(args.output).write_text(json.dumps(out, indent=2) + "\n")


def cmd_sweep(args):
    model = read_model(args.model)
    Z = read_logits(args.test)
    gts = read_distributions(args.gt, renormalize=args.renormalize) if args.gt else None
    ood = read_logits(args.ood) if args.ood else None
    summary = pareto_sweep(model, Z, gts, ood, measure=MEASURE_ALIASES[args.measure],
                           tightened=args.tightened)
    rows = []
    for r in summary.rows:
        rows.append([r.alpha, "" if r.coverage is None else r.coverage, r.efficiency,
                     "" if r.auroc is None else r.auroc])
    write_csv(args.output, ["alpha", "coverage", "efficiency", "auroc"], rows)
    if args.figure:
        from .plotting import plot_ood, plot_pareto

        plot_pareto(summary, args.figure)
        if ood is not None:
            fig = Path(args.figure)
            plot_ood(summary, fig.with_name(fig.stem + "_ood" + fig.suffix))


def cmd_ood(args):
    model = read_model(args.model)
    measure = MEASURE_ALIASES[args.measure]
    scores = {}
    for name, path in (("id", args.id), ("ood", args.ood)):
        lo, hi = predict_intervals(model, read_logits(path), args.alpha)
        scores[name] = [eu_score(BoxCredalSet(a, b), measure) for a, b in zip(lo, hi)]
    out = {
        "alpha": args.alpha,
        "measure": measure,
        "n_id": len(scores["id"]),
        "n_ood": len(scores["ood"]),
        "auroc": auroc(scores["ood"], scores["id"]),
    }
    Path(args.output).write_text(json.dumps(out, indent=2) + "\n")


def cmd_select(args):
    _, lo, hi = _boxes_from_model(args, args.pool)
    boxes = [BoxCredalSet(a, b) for a, b in zip(lo, hi)]
    idx = rank_by_uncertainty(boxes, MEASURE_ALIASES[args.measure], args.m)
    write_csv(args.output, ["index"], [[i] for i in idx])


def cmd_spider(args):
    lo, hi = read_boxes(args.boxes)
    i = args.row
    if not 0 <= i < lo.shape[0]:
        raise ValidationError(f"row {i} out of range 0..{lo.shape[0] - 1}")
    K = lo.shape[1]
    names = args.class_names.split(",") if args.class_names else [str(k) for k in range(1, K + 1)]
    mle = read_distributions(args.mle)[i] if args.mle else None
    gt = read_distributions(args.gt, renormalize=args.renormalize)[i] if args.gt else None
    spec = SpiderPlotSpec(tuple(names), BoxCredalSet(lo[i], hi[i]), mle, gt,
                          radial_max=args.radial_max, size_px=args.size)
    emit_spider_svg(spec, args.output)
    if args.figure:
        from .plotting import plot_spider

        plot_spider(spec, args.figure)


def cmd_synth(args):
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = SynthConfig.from_dict(doc)
    data = generate(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_logits(out / "train.csv", data.train.logits, data.train.labels)
    write_logits(out / "test.csv", data.test_logits)
    write_distributions(out / "test_gt.csv", data.test_gts)
    write_logits(out / "ood.csv", data.ood_logits)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="credal-decal", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def measure_opt(sp):
        sp.add_argument("--measure", choices=sorted(MEASURE_ALIASES), default="entropy")

    s = sub.add_parser("fit", help="fit shift endpoints on labeled training logits")
    s.add_argument("--train", required=True)
    s.add_argument("--alphas", type=_alphas, required=True)
    s.add_argument("--mode", choices=["base", "family-mle"], default="base")
    s.add_argument("--tol", type=float, default=None, help="residual tolerance (default 1e-10*N)")
    s.add_argument("--clamp", type=float, default=10000.0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="write box credal sets for test logits")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("uncertainty", help="per-instance uncertainty scores")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--alpha", type=float, required=True)
    measure_opt(s)
    s.add_argument("--bits", action="store_true", help="report entropies in bits")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_uncertainty)

    s = sub.add_parser("metrics", help="coverage and efficiency of a box file")
    s.add_argument("--boxes", required=True)
    s.add_argument("--gt")
    s.add_argument("--tightened", action="store_true")
    s.add_argument("--renormalize", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("sweep", help="coverage/efficiency/AUROC across fitted alphas")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--gt")
    s.add_argument("--ood")
    measure_opt(s)
    s.add_argument("--tightened", action="store_true")
    s.add_argument("--renormalize", action="store_true")
    s.add_argument("--figure", help="also render the sweep with matplotlib (png/pdf/svg)")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("ood", help="AUROC of EU scores between ID and OOD logits")
    s.add_argument("--model", required=True)
    s.add_argument("--id", required=True)
    s.add_argument("--ood", required=True)
    s.add_argument("--alpha", type=float, required=True)
    measure_opt(s)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_ood)

    s = sub.add_parser("select", help="indices of the most uncertain pool instances")
    s.add_argument("--model", required=True)
    s.add_argument("--pool", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("-m", type=int, required=True)
    s.add_argument("--measure", choices=sorted(MEASURE_ALIASES), default="zero-one")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("spider", help="credal spider plot of one box as SVG")
    s.add_argument("--boxes", required=True)
    s.add_argument("--row", type=int, required=True)
    s.add_argument("--mle")
    s.add_argument("--gt")
    s.add_argument("--class-names")
    s.add_argument("--radial-max", type=float, default=1.0)
    s.add_argument("--size", type=int, default=640)
    s.add_argument("--renormalize", action="store_true")
    s.add_argument("--figure", help="also render with matplotlib (png/pdf)")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_spider)

    s = sub.add_parser("synth", help="generate a synthetic task into a directory")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except SolverError as e:
        log.error("solver failure: %s", e)
        return 2
    except ValidationError as e:
        log.error("invalid input: %s", e)
        return 1
    except OSError as e:
        log.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
