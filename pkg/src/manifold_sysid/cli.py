"""Command-line entry point: ``manifold-sysid <command> [options]``.

Every command reads ``--config`` (merged over its preset), honors
``--seed`` and ``--out``, writes its artifacts plus ``summary.json`` into the
output directory and exits with 0 on success, 1 on invalid input and 2 on
numerical failure. Artifacts never contain timestamps or absolute paths;
wall-clock measurements go to a separate ``timings.csv``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import config as C
from . import io
from .archmods.manifold import lift
from .boucwen import make_dataset
from .diffcore import sym_eig
from .errors import ManifoldSysidError, NumericalError, ValidationError
from .hashing import to_plain
from .optim import learning_rate
from .pipeline.meta import meta_train
from .pipeline.studies import aggregate, finite_difference_hessian, mc_study
from .pipeline.training import heldout_metrics, train_full, train_linear_baseline, train_reduced
from .rng import derive_seed

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
COMMANDS = ("generate", "train-full", "train-linear", "meta-train", "train-reduced", "mc-study", "hessian", "eval")


class UsageError(ValidationError):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="manifold-sysid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    helps = {
        "generate": "simulate a Bouc-Wen dataset",
        "train-full": "train every model parameter on a dataset",
        "train-linear": "train the linear (A, B, C) baseline on a dataset",
        "meta-train": "learn the parameter manifold and encoder",
        "train-reduced": "fit manifold coordinates on a dataset",
        "mc-study": "Monte Carlo study over training lengths",
        "hessian": "Hessian spectrum of the training loss at a model",
        "eval": "score a model on the test portion of a dataset",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory")
        if name in ("train-full", "train-linear", "train-reduced", "hessian", "eval"):
            p.add_argument("--data", required=True, help="dataset file")
        if name in ("hessian", "eval"):
            p.add_argument("--model", required=True, help="theta checkpoint")
        if name == "train-full":
            p.add_argument("--init", help="theta checkpoint to start from")
        if name in ("train-reduced", "mc-study"):
            required = name == "train-reduced"
            p.add_argument("--manifold", required=required, help="manifold checkpoint")
            p.add_argument("--encoder", required=required, help="encoder checkpoint")
    return parser


class _Run:
    """Shared state of one command: config, provenance, output directory."""

    def __init__(self, args):
        self.args = args
        self.cfg = C.load_config(args.config, seed=args.seed, out=args.out)
        self.seed = self.cfg["seed"]
        self.hash = C.run_hash(self.cfg)
        self.provenance = {"config_hash": self.hash, "master_seed": self.seed}
        self.out = Path(self.cfg.get("out", "out"))
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def meta(self, **extra) -> dict:
        return {**self.provenance, **extra}

    def summary(self, **fields) -> dict:
        doc = {"command": self.args.command, **self.provenance, "preset": self.cfg["preset"], **fields,
               "artifacts": sorted(self.artifacts + ["summary.json"])}
        doc = _finite(to_plain(doc))
        (self.out / "summary.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return doc


def _finite(obj):
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def _result_fields(res) -> dict:
    return {"status": res.status, "train_loss": res.train_loss,
            "metrics": None if res.metrics is None else res.metrics.as_dict()}


def _write_result(run: _Run, res) -> None:
    io.export_results([res], run.path("results.csv"), provenance=run.provenance, timing=False)
    io.export_results([res], run.out / "timings.csv", provenance=run.provenance, timing=True)
    io.write_trace(run.path("trace.csv"), res.trace, provenance=run.provenance)


def cmd_generate(run: _Run) -> dict:
    d = run.cfg["data"]
    ds = make_dataset(C.ranges_from(d["coefficients"]), C.excitation(run.cfg, d["n_train"]),
                      C.excitation(run.cfg, d["n_test"]), d["noise_std"], d["substeps"],
                      rng=derive_seed(run.seed, "generate", 0))
    io.save_dataset(ds, run.path("dataset.json"), provenance=run.provenance)
    return run.summary(n_train=ds.n_train, n_test=ds.n_test,
                       coefficients=None if ds.coeffs is None else ds.coeffs.as_dict())


def cmd_train_full(run: _Run) -> dict:
    d = io.load_dataset(run.args.data)
    cfg = C.full_config(run.cfg)
    theta0 = None
    if run.args.init:
        theta0, ssm, _ = io.load_checkpoint(run.args.init, kind="theta").to_theta()
        if ssm != cfg.ssm:
            raise ValidationError("initial checkpoint architecture differs from the configured one")
    seed = derive_seed(run.seed, "init", 0)
    theta, res = train_full(d, cfg, seed=seed, theta0=theta0, config_hash=run.hash)
    io.save_checkpoint(io.theta_checkpoint(theta, cfg.ssm, cfg.scaling, run.meta(
        iteration=len(res.trace), loss=res.train_loss)), run.path("theta.json"))
    _write_result(run, res)
    return run.summary(mode="full", **_result_fields(res))


def cmd_train_linear(run: _Run) -> dict:
    d = io.load_dataset(run.args.data)
    cfg = C.full_config(run.cfg)
    theta, res = train_linear_baseline(d, cfg, seed=derive_seed(run.seed, "init", 0), config_hash=run.hash)
    io.save_checkpoint(io.theta_checkpoint(theta, cfg.ssm, cfg.scaling, run.meta(
        iteration=len(res.trace), loss=res.train_loss)), run.path("theta.json"))
    _write_result(run, res)
    return run.summary(mode="linear", **_result_fields(res))


def _meta_train(run: _Run):
    cfg = C.meta_config(run.cfg)
    m, psi, trace = meta_train(cfg)
    tail = float(np.mean(trace[-min(100, trace.size):])) if trace.size else float("nan")
    meta = run.meta(iteration=int(trace.size), loss=tail)
    io.save_checkpoint(io.manifold_checkpoint(m, meta), run.path("manifold.json"))
    io.save_checkpoint(io.encoder_checkpoint(psi, cfg.scaling, meta), run.path("encoder.json"))
    lrs = [learning_rate(t, cfg.adam) for t in range(trace.size)]
    io.write_trace(run.path("meta_trace.csv"), trace, lrs, provenance=run.provenance)
    head = float(np.mean(trace[: min(100, trace.size)])) if trace.size else float("nan")
    return m, psi, {"n_gamma": int(m.gamma.size), "n_psi": int(psi.values.size),
                    "loss_head_mean": head, "loss_tail_mean": tail}


def cmd_meta_train(run: _Run) -> dict:
    _, _, info = _meta_train(run)
    return run.summary(**info)


def _manifold_pair(run: _Run):
    m = io.load_checkpoint(run.args.manifold, kind="manifold").to_manifold()
    enc = io.load_checkpoint(run.args.encoder, kind="encoder")
    return m, enc.to_encoder()


def cmd_train_reduced(run: _Run) -> dict:
    d = io.load_dataset(run.args.data)
    m, psi = _manifold_pair(run)
    phi, res = train_reduced(d, m, psi, C.reduced_config(run.cfg), config_hash=run.hash)
    io.save_checkpoint(io.theta_checkpoint(lift(m, phi), m.ssm, m.scaling, run.meta(
        iteration=len(res.trace), loss=res.train_loss)), run.path("theta.json"))
    _write_result(run, res)
    return run.summary(mode="reduced", phi=[float(v) for v in phi], **_result_fields(res))


def cmd_mc_study(run: _Run) -> dict:
    cfg = C.mc_config(run.cfg)
    m = psi = None
    extra = {}
    if "reduced" in cfg.modes:
        if run.args.manifold and run.args.encoder:
            m, psi = _manifold_pair(run)
        elif run.args.manifold or run.args.encoder:
            raise ValidationError("--manifold and --encoder must be given together")
        else:
            m, psi, extra = _meta_train(run)
    results = mc_study(cfg, m, psi, threads=run.cfg.get("threads"))
    io.export_results(results, run.path("results.csv"), run.path("aggregate.csv"), run.provenance, timing=False)
    io.export_results(results, run.out / "timings.csv", run.out / "timings_aggregate.csv", run.provenance)
    agg = aggregate(results)
    for row in agg:
        for q in ("q25", "median", "q75"):
            row.pop(f"wall_time_s_{q}")
    return run.summary(n_results=len(results), n_failed=sum(r.failed for r in results), aggregate=agg, **extra)


def cmd_hessian(run: _Run) -> dict:
    d = io.load_dataset(run.args.data)
    theta, ssm, scaling = io.load_checkpoint(run.args.model, kind="theta").to_theta()
    cfg = C.full_config(run.cfg)
    cfg = dataclasses.replace(cfg, ssm=ssm, scaling=scaling)
    H = finite_difference_hessian(theta, d, cfg, run.cfg["hessian"]["h"])
    eig = sym_eig(H)
    io.write_table(run.path("eigenvalues.csv"), ("index", "eigenvalue"),
                  [(i, float(v)) for i, v in enumerate(eig)], run.provenance)
    top = float(np.max(np.abs(eig)))
    return run.summary(n=int(eig.size), max_abs=top, trace=float(np.trace(H)), sum_eigenvalues=float(eig.sum()),
                       fraction_near_zero=float(np.mean(np.abs(eig) < 1e-3 * top)) if top > 0 else 1.0)


def cmd_eval(run: _Run) -> dict:
    d = io.load_dataset(run.args.data)
    theta, ssm, scaling = io.load_checkpoint(run.args.model, kind="theta").to_theta()
    rep = heldout_metrics(theta, ssm, scaling, d.u_te, d.y_te)
    print(f"fit={rep.fit_percent:.6f} rmse={rep.rmse:.6e} n_skip={rep.n_skip}")
    return run.summary(metrics=rep.as_dict())


HANDLERS = {
    "generate": cmd_generate, "train-full": cmd_train_full, "train-linear": cmd_train_linear,
    "meta-train": cmd_meta_train, "train-reduced": cmd_train_reduced, "mc-study": cmd_mc_study,
    "hessian": cmd_hessian, "eval": cmd_eval,
}


def cli_main(argv: list[str] | None = None) -> int:
    """Run one command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        HANDLERS[args.command](_Run(args))
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ManifoldSysidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
