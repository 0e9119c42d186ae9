"""``pencil-lab`` command line: generate, inject-noise, train, eval, gradcheck.

Exit status is 0 on success, 2 for usage/config errors (including missing
input files) and 1 for failures during a run.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

from .backbone import load_params
from .config import ConfigError, apply_overrides, config_keys, resolve_config
from .data import DatasetParseError, NoiseSpec, inject_noise, load_dataset, make_blobs, save_dataset
from .labels import LabelStore
from .metrics import accuracy
from .trainer import ExperimentConfig, run_experiment

log = logging.getLogger("pencil_lab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _threads():
    raw = os.environ.get("PENCIL_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"PENCIL_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def _limit_threads(n):
    """Cap BLAS threads; batch reductions then run in a fixed order when n == 1."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - threadpoolctl ships with scikit-learn
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _parse_pairs(text):
    try:
        return {int(a): int(b) for a, b in (item.split(":") for item in text.split(","))}
    except ValueError:
        raise UsageError(f"--pairs expects 'src:dst,src:dst', got {text!r}") from None


def _load(path, class_count=None):
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    return load_dataset(path, class_count)


def cmd_generate(args):
    ds = make_blobs(args.n, args.classes, args.dims, args.separation, args.sigma, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n} samples, {ds.class_count} classes, {ds.d} dims to {args.out}")


def cmd_inject_noise(args):
    if not 0 <= args.rate <= 1:
        raise UsageError(f"--rate must be in [0, 1], got {args.rate}")
    pairs = _parse_pairs(args.pairs) if args.pairs else None
    if args.kind == "asymmetric-pairs" and not pairs:
        raise UsageError("--kind asymmetric-pairs needs --pairs")
    ds = _load(args.data, args.classes)
    if ds.true_labels is None:
        raise UsageError(f"{args.data} has no true_label column to inject noise from")
    noisy = inject_noise(ds, NoiseSpec(args.kind, args.rate, pairs), args.seed)
    save_dataset(noisy, args.out)
    frac = (noisy.noisy_labels != noisy.true_labels).mean()
    print(f"corrupted fraction {frac:.4f}; wrote {args.out}")


def cmd_train(args, overrides):
    config = resolve_config(args.config) if args.config else ExperimentConfig()
    config = apply_overrides(config, overrides)
    ds = _load(args.data, args.classes)
    test = _load(args.test_data, ds.class_count) if args.test_data else None
    params = load_params(args.resume_params) if args.resume_params else None
    store = LabelStore.load(args.resume_labels, config.K) if args.resume_labels else None
    report = run_experiment(config, ds, test, out_dir=args.out, params=params, store=store,
                            dump_distributions=args.dump_distributions)
    print(f"best_test_acc {report.best_test_acc:.4f}")
    print(f"last_test_acc {report.last_test_acc:.4f}")
    if report.records:
        print(f"recovery_rate {report.records[-1].recovery_rate:.6g}")
    print(f"outputs in {args.out}")


def cmd_eval(args):
    params = load_params(args.params)
    ds = _load(args.data, args.classes)
    print(f"accuracy {accuracy(params, ds, args.labels):.4f}")


def cmd_gradcheck(args):
    from .gradcheck import run_all

    results = run_all(args.seed, args.instances)
    width = max(map(len, results))
    for name, err in results.items():
        print(f"{name:<{width}}  {err:.3e}")
    worst = max(results.values())
    print(f"max relative error {worst:.3e} (tolerance {args.tol:g})")
    if worst > args.tol:
        raise RuntimeError("gradient check exceeded tolerance")


def build_parser():
    p = argparse.ArgumentParser(prog="pencil-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic Gaussian-blob dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=3000)
    g.add_argument("--classes", type=int, default=3)
    g.add_argument("--dims", type=int, default=2)
    g.add_argument("--separation", type=float, default=10.0)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)

    n = sub.add_parser("inject-noise", help="rewrite noisy labels from the true labels")
    n.add_argument("--data", required=True)
    n.add_argument("--out", required=True)
    n.add_argument("--kind", choices=("symmetric", "asymmetric-circular", "asymmetric-pairs"),
                   default="symmetric")
    n.add_argument("--rate", type=float, required=True)
    n.add_argument("--pairs", help="src:dst,src:dst (asymmetric-pairs)")
    n.add_argument("--classes", type=int, help="class count (default: inferred)")
    n.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="run the three training phases",
                       description="Every config key can be overridden with --key value.")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--config", help="config file or preset name (e.g. sym30)")
    t.add_argument("--test-data", help="separate test set (default: hold out test_fraction)")
    t.add_argument("--classes", type=int)
    t.add_argument("--resume-params", help="parameter snapshot to start from")
    t.add_argument("--resume-labels", help="label-store snapshot to start phase 2 from")
    t.add_argument("--dump-distributions", action="store_true",
                   help="also write label_distributions.csv")
    cfg = t.add_argument_group("config overrides")
    for key in config_keys():
        cfg.add_argument(f"--{key}", dest=f"cfg__{key}", metavar="VALUE")

    e = sub.add_parser("eval", help="accuracy of a parameter snapshot on a dataset")
    e.add_argument("--params", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--labels", choices=("true", "noisy"), default="true")
    e.add_argument("--classes", type=int)

    c = sub.add_parser("gradcheck", help="finite-difference check of every gradient")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--instances", type=int, default=100)
    c.add_argument("--tol", type=float, default=1e-4)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k[5:]: v for k, v in vars(args).items() if k.startswith("cfg__") and v is not None}
    handlers = {
        "generate": cmd_generate,
        "inject-noise": cmd_inject_noise,
        "train": lambda a: cmd_train(a, overrides),
        "eval": cmd_eval,
        "gradcheck": cmd_gradcheck,
    }
    try:
        with _limit_threads(_threads()):
            handlers[args.command](args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"pencil-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetParseError as exc:
        print(f"pencil-lab: bad dataset file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("run failed", exc_info=True)
        print(f"pencil-lab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
