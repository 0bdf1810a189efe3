"""Command-line entry point: ``meshfree gen-data | train | diagnose``.

Exit codes: 0 success, 1 invalid argument, 2 numerical failure, 3 I/O error.
Outputs go under ``--out`` (default ``$MESHFREE_OUT`` or ``./runs``), and
each run first writes ``manifest.json`` with the resolved configuration.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import platform
import sys
from pathlib import Path

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "MESHFREE_OUT"
SUITES = ("moments", "convergence", "spectrum", "modal", "timing", "tgv")

log = logging.getLogger("meshfree")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _fraction(text):
    """Accept ``0.03125`` or ``1/32``."""
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser():
    p = _Parser(prog="meshfree", description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default: ${OUT_ENV} or ./runs/<subcommand>)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS/OpenMP thread count; 1 forces the deterministic path")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a NeMDO training dataset")
    g.add_argument("--nx", type=int, default=None)
    g.add_argument("--ny", type=int, default=None)
    g.add_argument("--spacing", type=_fraction, default=1 / 32)
    g.add_argument("--epsilon", type=float, default=1.0)
    g.add_argument("--stencil-n", type=int, default=10)
    g.add_argument("--count", type=int, default=26000)
    g.add_argument("--val-frac", type=float, default=3 / 26)
    g.add_argument("--test-frac", type=float, default=3 / 26)
    g.add_argument("--file", type=Path, default=None, help="dataset path (default: <out>/dataset.bin)")

    t = sub.add_parser("train", help="train a NeMDO model on a dataset")
    t.add_argument("--dataset", type=Path, required=True)
    t.add_argument("--operator", default="dx", help="dx | laplacian")
    t.add_argument("--p", type=int, default=2)
    t.add_argument("--f-h", type=int, default=32)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--hidden", type=int, default=1)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--epochs", type=int, default=300)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--precision", choices=("float32", "float64"), default="float32")
    t.add_argument("--resume", action="store_true", help="continue from <out>/train_state.npz")

    d = sub.add_parser("diagnose", help="run an evaluation suite")
    d.add_argument("--suite", choices=SUITES, required=True)
    d.add_argument("--providers", type=_csv_list, default=["sph-quintic", "sph-wendland", "labfm"])
    d.add_argument("--checkpoint", type=_csv_list, default=[],
                   help="NeMDO checkpoint(s), comma separated (one per operator kind)")
    d.add_argument("--operator", type=_csv_list, default=None, help="operator kind(s)")
    d.add_argument("--p", type=int, default=2, help="LABFM order")
    d.add_argument("--epsilon", type=float, default=None)
    d.add_argument("--s", type=_fraction, default=None, help="node spacing")
    d.add_argument("--clouds", type=int, default=4, help="ensemble size (moments)")
    d.add_argument("--resolutions", type=_csv_list, default=["1/20", "1/40", "1/80", "1/160"])
    d.add_argument("--k-points", type=int, default=64)
    d.add_argument("--repeats", type=int, default=5)
    d.add_argument("--weights-only", action=argparse.BooleanOptionalAction, default=True)
    d.add_argument("--reynolds", type=float, default=100.0)
    d.add_argument("--mach", type=float, default=0.1)
    d.add_argument("--cfl", type=float, default=0.5)
    d.add_argument("--filter-coefficient", type=float, default=0.01)
    d.add_argument("--filter-interval", type=int, default=1)
    d.add_argument("--filter-power", type=int, default=2, help="powers of the biharmonic in the filter")
    d.add_argument("--initial-density", choices=("pressure", "uniform"), default="pressure")
    d.add_argument("--end-time", type=float, default=1.0)
    d.add_argument("--run-file", type=Path, default=None,
                   help="JSON file of solver settings for the tgv suite (overrides the flags)")
    return p


def _set_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    if "numpy" in sys.modules:
        log.warning("numpy already loaded; --threads may not take effect in this process")


def _version():
    try:
        from importlib.metadata import version
        v = version("artifact")
    except Exception:  # not installed as a distribution
        v = "unknown"
    return {"package": v, "python": platform.python_version()}


def write_manifest(out, args):
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    manifest = {"subcommand": args.command, "config": cfg, "seed": args.seed,
                "version": _version(), "output_dir": str(out),
                "created": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    if args.command == "train":
        from .taylor import target_moments
        manifest["target_moments"] = target_moments(args.operator, args.p).tolist()
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return manifest


# subcommands -----------------------------------------------------------------

def cmd_gen_data(args, out):
    from .nemdo.dataset import generate_dataset, save_dataset
    spacing = args.spacing if args.nx is None else 1.0 / args.nx
    ds = generate_dataset(args.count, args.stencil_n, args.epsilon, args.seed, spacing=spacing,
                          val_frac=args.val_frac, test_frac=args.test_frac, nx=args.nx, ny=args.ny)
    path = args.file or out / "dataset.bin"
    save_dataset(ds, path)
    counts = ds.counts()
    print(f"wrote {len(ds)} stencils (train {counts['train']}, val {counts['val']}, "
          f"test {counts['test']}) from {ds.meta['clouds']} clouds to {path}")
    return EXIT_OK


def cmd_train(args, out):
    import csv

    from .nemdo.config import ModelConfig, TrainConfig
    from .nemdo.dataset import load_dataset
    from .nemdo.train import load_train_state, train
    from .taylor import target_moments

    ds = load_dataset(args.dataset)
    mcfg = ModelConfig(stencil_n=ds.stencil_n, order_p=args.p, kind=args.operator, f_h=args.f_h,
                       graph_layers=args.layers, mlp_hidden=args.hidden)
    tcfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed)
    state_path = out / "train_state.npz"
    resume = None
    if args.resume:
        if not state_path.exists():
            raise FileNotFoundError(f"no resume state at {state_path}")
        resume = load_train_state(state_path)
    details = {"model": mcfg.to_dict(), "train": tcfg.to_dict(), "config_hash": mcfg.hash(),
               "target_moments": target_moments(mcfg.kind, mcfg.order_p).tolist(),
               "dataset": str(args.dataset), "precision": args.precision}
    (out / "train_config.json").write_text(json.dumps(details, indent=2))
    log.info("target moments %s", details["target_moments"])

    def report(row):
        if args.verbose or row["epoch"] % 10 == 0:
            print(f"epoch {row['epoch']:4d}  train {row['train_loss']:.4e}  val {row['val_loss']:.4e}"
                  f"  lr {row['lr']:.2e}", flush=True)

    res = train(ds, mcfg, tcfg, resume=resume, precision=args.precision, callback=report,
                checkpoint=out / "model.ckpt", state_path=state_path)
    with open(out / "train_log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss", "lr", "seconds"])
        w.writeheader()
        w.writerows(res.log)
    print(f"best val loss {res.best_val:.4e} at epoch {res.best_epoch}; checkpoint {out / 'model.ckpt'}")
    if res.diverged:
        print("training diverged; kept the last good checkpoint", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _providers(args):
    from .diagnostics.providers import make_provider
    from .errors import InvalidArgument
    from .nemdo.infer import NemdoModel

    models = [NemdoModel.load(c) for c in args.checkpoint]
    out = []
    for name in args.providers:
        if name == "nemdo" and not models:
            raise InvalidArgument("the nemdo provider needs --checkpoint")
        out.append(make_provider(name, order_p=args.p, models=models))
    return out


def cmd_diagnose(args, out):
    import numpy as np

    from .diagnostics import accuracy, spectral, timing
    from .diagnostics.export import write_report
    from .geometry import centered_square_cloud, unit_square_cloud
    from .taylor import OperatorKind

    providers = _providers(args)
    kinds = [OperatorKind.parse(k) for k in (args.operator or ["dx"])]
    meta = {"manifest": "manifest.json", "providers": [p.name for p in providers], "seed": args.seed}
    rng = np.random.default_rng(args.seed)
    suite = args.suite

    if suite == "moments":
        eps = 0.5 if args.epsilon is None else args.epsilon
        s = args.s or 1 / 30
        clouds = [unit_square_cloud(s, eps, int(sd)) for sd in rng.integers(2**62, size=args.clouds)]
        rows = []
        for p in providers:
            for k in kinds:
                if p.supports(k):
                    rows += accuracy.moment_table(p, k, clouds, order_p=max(args.p, k.m)).rows()
        write_report(out / "moments.csv", ["provider", "operator", "monomial", "mae", "std"], rows,
                     {**meta, "epsilon": eps, "spacing": s, "clouds": args.clouds})
    elif suite == "convergence":
        eps = 0.5 if args.epsilon is None else args.epsilon
        res = [_fraction(r) for r in args.resolutions]
        rows, slopes = [], {}
        for k in kinds:
            rep = accuracy.convergence_study([p for p in providers if p.supports(k)], k, res, eps,
                                             seed=args.seed)
            rows += rep.rows()
            slopes[k.label] = rep.slopes
        write_report(out / "convergence.csv", ["provider", "operator", "s", "rel_l2", "skipped"], rows,
                     {**meta, "epsilon": eps, "slopes": slopes, "fit": "three finest resolutions"})
        for k, sl in slopes.items():
            for name, v in sl.items():
                print(f"{k:10s} {name:14s} slope {v:6.3f}")
    elif suite == "spectrum":
        eps = 1.0 if args.epsilon is None else args.epsilon
        s = args.s or 1 / 30
        cloud = unit_square_cloud(s, eps, args.seed)
        for p in providers:
            for k in kinds:
                rep = spectral.eigen_spectrum(spectral.assemble_global(p, cloud, k), s, k.m, eps)
                write_report(out / f"spectrum_{p.name}_{k.label}.csv", ["re", "im", "provider"],
                             [(r, i, p.name) for r, i in rep.rows()],
                             {**meta, "epsilon": eps, "nodes": len(cloud), "scale": f"s^{k.m}",
                              "max_re": rep.max_real, "max_abs_im": rep.max_abs_imag})
                print(f"{p.name:14s} {k.label:10s} max Re {rep.max_real:.3e}  max |Im| {rep.max_abs_imag:.3e}")
    elif suite == "modal":
        eps = 1.0 if args.epsilon is None else args.epsilon
        s = args.s or 1 / 30
        cloud = unit_square_cloud(s, eps, args.seed)
        grid = np.linspace(1.0 / args.k_points, 1.0, args.k_points)
        for k in kinds:
            rows = []
            for p in providers:
                for ratio in (0.0, 1.0):
                    rows += spectral.modal_response(p, k, cloud, grid, ratio).rows()
            write_report(out / f"modal_{k.label}.csv", ["provider", "ratio", "k_hat", "re", "im"], rows,
                         {**meta, "epsilon": eps, "spacing": s, "averaging": "arithmetic mean over stencils"})
    elif suite == "timing":
        eps = 0.5 if args.epsilon is None else args.epsilon
        s = args.s or 1 / 40
        cloud = centered_square_cloud(s, eps, args.seed)
        rows = timing.timing_harness(providers, cloud, kinds[0], args.repeats, args.weights_only)
        write_report(out / "timing.csv",
                     ["provider", "median_s", "min_s", "max_s", "repeats", "nodes", "per_node_s", "rel_l2"],
                     [(r.provider, r.median_s, r.min_s, r.max_s, r.repeats, r.n_nodes, r.per_node_s, r.error)
                      for r in rows], {**meta, "epsilon": eps, "spacing": s, "weights_only": args.weights_only})
        for r in rows:
            print(f"{r.provider:14s} median {r.median_s:.4f}s  error {r.error:.3e}")
    elif suite == "tgv":
        from .pde_solver import SolverConfig, run_tgv
        eps = 0.5 if args.epsilon is None else args.epsilon
        s = args.s or 1 / 32
        cloud = unit_square_cloud(s, eps, args.seed)
        cfg = SolverConfig(args.reynolds, args.mach, args.cfl, args.filter_coefficient,
                           args.filter_interval, args.filter_power, args.initial_density,
                           args.end_time)
        if args.run_file is not None:
            cfg = SolverConfig.from_json(args.run_file, base=cfg)
        times = np.linspace(0.0, cfg.end_time, 11)[1:]
        for p in providers:
            res = run_tgv(cfg, cloud, p, times, out_dir=out / f"tgv_{p.name}", snapshots=True)
            print(f"{p.name:14s} relative L2 velocity error at t*={res.times[-1]:g}: {res.errors[-1]:.3e}")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "diagnose": cmd_diagnose}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    from .errors import (DegenerateGeometry, IncompatibleCheckpoint, InvalidArgument, NumericalFailure,
                         SolveFailure, IllConditionedStencil)

    root = args.out or Path(os.environ.get(OUT_ENV, "runs")) / args.command
    try:
        write_manifest(root, args)
        return COMMANDS[args.command](args, root)
    except (InvalidArgument, DegenerateGeometry, IncompatibleCheckpoint) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, SolveFailure, IllConditionedStencil) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
