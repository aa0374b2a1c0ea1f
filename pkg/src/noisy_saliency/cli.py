"""Command-line entry point: ``noisy-saliency <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import io, labellers, metrics
from .noise import variance_to_image
from .predictor import PredictorConfig, PredictorParams, predict
from .synthetic import CorpusSpec, make_corpus
from .tensor import Tensor
from .trainer import TrainConfig, run, run_baseline

log = logging.getLogger("noisy_saliency")

PREDICTOR_KEYS = {"channels", "kernel_size", "dilations"}
METRIC_KEYS = {"beta_squared"}


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def load_settings(path) -> tuple[dict, dict, dict]:
    """Split a flat config file into (train, predictor, metric) option dicts."""
    raw = io.read_config(path) if path else {}
    train, pred, metric = {}, {}, {}
    for k, v in raw.items():
        if k in PREDICTOR_KEYS:
            pred[k] = _ints(v) if k in ("channels", "dilations") else int(v)
        elif k in METRIC_KEYS:
            metric[k] = float(v)
        else:
            train[k] = v
    return train, pred, metric


# synth

def cmd_synth(args) -> int:
    spec = CorpusSpec(count=args.count, size=args.size, labellers=args.labellers,
                      sigmas=_floats(args.sigmas), bias=args.bias,
                      bias_strength=args.bias_strength, seed=args.seed)
    ds, meta = make_corpus(spec)
    out = Path(args.out)
    io.write_dataset(out, ds)
    io.write_json(out / "corpus.json", {"spec": vars(spec), **meta})
    io.write_json(out / "manifest.json",
                  io.manifest("synth", vars(spec), data_root=out, seed=args.seed))
    log.info("wrote %d images x %d labellers to %s", ds.n, ds.m, out)
    return 0


# label

def cmd_label(args) -> int:
    src = Path(args.images)
    files = io._image_files(src)
    if not files:
        raise SystemExit(f"no images in {src}")
    out = Path(args.out)
    for iid in sorted(files):
        maps = labellers.prior_maps(io.read_image(files[iid]), cell_size=args.cell_size,
                                    with_center=args.center)
        for name, m in maps.items():
            io.write_image(out / name / f"{iid}.png", m)
    io.write_json(out / "manifest.json",
                  io.manifest("label", {"cell_size": args.cell_size, "center": args.center},
                              data_root=src))
    return 0


# train

def _train_options(args) -> tuple[TrainConfig, dict, str, str, str | None]:
    if args.manifest:
        m = json.loads(Path(args.manifest).read_text())
        cfg = TrainConfig.from_dict(m["config"])
        return cfg, m.get("predictor", {}), m.get("mode", "joint"), m["data"], m.get("eval_data")
    if not args.data:
        raise SystemExit("train needs --data or --manifest")
    train, pred, _ = load_settings(args.config)
    for key, flag in (("seed", args.seed), ("rounds", args.rounds), ("lam", args.lam),
                      ("alpha", args.alpha)):
        if flag is not None:
            train[key] = flag
    cfg = TrainConfig.from_dict(train)
    mode = args.baseline.upper() if args.baseline else "joint"
    return cfg, pred, mode, args.data, args.eval_data


def cmd_train(args) -> int:
    cfg, pred_opts, mode, data_root, eval_root = _train_options(args)
    ds = io.ingest_dataset(data_root)
    ev = io.ingest_dataset(eval_root) if eval_root else None
    pcfg = PredictorConfig(input_size=ds.map_shape, **pred_opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    def on_round(r, params, bank, state, history):
        ck = out / f"round_{r}.ckpt"
        io.save_checkpoint(ck, io.Checkpoint(pcfg, params.arrays(), state, bank, r, cfg.seed,
                                             {"train": cfg.to_dict(), "mode": mode}))
        io.write_json(out / f"metrics_round_{r}.json", history.rounds[-1])
        artifacts[f"round_{r}"] = {"checkpoint": ck.name, "metrics": f"metrics_round_{r}.json"}

    if mode == "joint":
        _, _, history = run(ds, cfg, pcfg, eval_set=ev, on_round=on_round)
    else:
        _, history = run_baseline(ds, mode, cfg, pcfg, eval_set=ev, on_round=on_round)

    with open(out / "train_log.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["round", "epoch", "pred_loss", "noise_loss", "total", "lr"])
        for row in history.losses:
            w.writerow([row["round"], row["epoch"], repr(row["pred_loss"]),
                        repr(row["noise_loss"]), repr(row["total"]), repr(row["lr"])])
    io.write_json(out / "metrics.json", {"mode": mode, "rounds": history.rounds})
    io.write_json(out / "manifest.json",
                  io.manifest("train", cfg.to_dict(), data_root=data_root, seed=cfg.seed,
                              artifacts=artifacts, mode=mode, predictor=pred_opts,
                              eval_data=str(eval_root) if eval_root else None))
    return 0


# export

def _params_from_checkpoint(ck: io.Checkpoint) -> PredictorParams:
    return PredictorParams(ck.predictor, [Tensor(a) for a in ck.params])


def cmd_export(args) -> int:
    ck = io.load_checkpoint(args.checkpoint)
    params = _params_from_checkpoint(ck)
    files = io._image_files(Path(args.data) / "images") or io._image_files(Path(args.data))
    out = Path(args.out)
    for iid in sorted(files):
        io.write_image(out / f"{iid}.png", predict(io.read_image(files[iid]), params))
    if args.variances:
        for iid, v in ck.bank.variances.items():
            io.write_uint8(out / "variance" / f"{iid}.png", variance_to_image(v))
    return 0


# eval

def cmd_eval(args) -> int:
    preds = {k: io.read_map(p) for k, p in io._image_files(Path(args.pred)).items()}
    gts = {k: (io.read_map(p) >= 0.5).astype(float) for k, p in io._image_files(Path(args.gt)).items()}
    missing = sorted(set(gts) - set(preds))
    if missing:
        raise SystemExit(f"no prediction for {missing[:5]}")
    _, _, metric = load_settings(args.config)
    beta2 = metric.get("beta_squared", metrics.BETA_SQUARED)
    res = metrics.evaluate_maps({k: preds[k] for k in gts}, gts, beta2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "per_image.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "mae", "f_beta"])
        for row in res["per_image"]:
            w.writerow([row["id"], repr(row["mae"]), repr(row["f_beta"])])
    with open(out / "pr_curve.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["threshold", "precision", "recall"])
        for t, (p, r) in enumerate(res["pr_curve"]):
            w.writerow([t, repr(p), repr(r)])
    io.write_json(out / "metrics.json", {"mean_mae": res["mean_mae"], "mean_f": res["mean_f"],
                                         "pr_curve": res["pr_curve"]})
    print(f"mean MAE {res['mean_mae']:.4f}  mean F {res['mean_f']:.4f}")
    return 0


# report

def cmd_report(args) -> int:
    rows = []
    for run_dir in args.runs:
        m = json.loads((Path(run_dir) / "metrics.json").read_text())
        for r in m["rounds"]:
            rows.append([Path(run_dir).name, m["mode"], r["round"], r.get("mae", ""),
                         r.get("mean_f", ""), r["pred_loss"], r["noise_loss"], r["mean_sigma"]])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["run", "mode", "round", "mae", "mean_f", "pred_loss", "noise_loss", "mean_sigma"])
        w.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisy-saliency", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=32)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--labellers", type=int, default=4)
    p.add_argument("--sigmas", default="0.05,0.1,0.2")
    p.add_argument("--bias", choices=["none", "fields"], default="none")
    p.add_argument("--bias-strength", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("label", help="run the prior labellers over a directory of images")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cell-size", type=int, default=4)
    p.add_argument("--center", action="store_true", help="also emit the center prior")
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train", help="train the joint model or a baseline")
    p.add_argument("--data")
    p.add_argument("--eval-data")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--manifest", help="re-run exactly from a previous train manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--baseline", choices=["bl1", "bl2", "bl3"])
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score saliency maps against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export", help="write predicted maps from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variances", action="store_true")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("report", help="merge per-round metrics of several runs into one CSV")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
