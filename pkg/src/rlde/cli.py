"""Command-line interface: ``rlde <command> [options]``.

Global options may appear before or after the command.  ``--config`` names a
JSON file whose keys supply defaults for any option not given on the command
line; its ``agent`` object holds agent hyperparameters and its ``de`` object a
DE design for ``run``.

Exit codes: 0 success, 2 configuration error, 3 I/O or checkpoint error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from rlde import bbob, ela, evalharness
from rlde.de import CANONICAL_DE, DEConfig, run_de
from rlde.errors import CheckpointError, ConfigurationError
from rlde.madqn import AgentConfig
from rlde.meta_train import checkpoint_hash, design_for, load_checkpoint, save_checkpoint, train

log = logging.getLogger("rlde")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

GLOBAL_DEFAULTS = {"seed": 0, "dim": 10, "max_fes": None, "runs": 31, "config": None, "out": None, "verbose": False}


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def d(name):
        if suppress:
            return argparse.SUPPRESS
        return False if name == "verbose" else None

    parser.add_argument("--seed", type=int, default=d("seed"), help="master seed (default 0)")
    parser.add_argument("--dim", type=int, default=d("dim"), help="problem dimension (default 10)")
    parser.add_argument("--max-fes", type=int, default=d("max_fes"), help="DE budget per run (default 2000*dim)")
    parser.add_argument("--runs", type=int, default=d("runs"), help="runs per function (default 31)")
    parser.add_argument("--config", default=d("config"), help="JSON file with option defaults")
    parser.add_argument("--out", default=d("out"), help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", default=d("verbose"), help="progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlde", description=__doc__.split("\n")[0])
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train the designer on the training functions")
    p.add_argument("--meta-steps", type=int, default=None, help="meta steps (default 10000)")
    p.set_defaults(func=cmd_train)

    def problem(p):
        p.add_argument("--function", type=int, required=True, help="function id 1..24")
        p.add_argument("--instance-seed", type=int, default=None, help="instance seed (default: function id)")

    p = sub.add_parser("design", parents=[common], help="print the designed DE configuration for a problem")
    problem(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("run", parents=[common], help="one DE run; design from --config 'de' (default canonical)")
    problem(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("features", parents=[common], help="print the 62 landscape features as CSV")
    problem(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("eval", parents=[common], help="run a full experiment and write records and report")
    p.add_argument("--algorithms", default=None, help="comma-separated names (rlde, random_search, canonical_de)")
    p.add_argument("--functions", default=None, help="comma-separated function ids (default: test set)")
    p.add_argument("--checkpoint", default=None, help="trained designer for 'rlde'")
    p.add_argument("--reference", default=None, help="algorithm for significance marks (default random_search)")
    p.add_argument("--aei-baseline", default=None, help="AEI baseline (default: the reference)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="report from stored records")
    p.add_argument("--records", required=True, help="directory holding records.csv and trajectories.csv")
    p.add_argument("--reference", default=None)
    p.add_argument("--aei-baseline", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


class Options:
    """Command-line values with ``--config`` fallbacks."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file: dict = {}
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise OSError(f"cannot read config {args.config}: {exc.strerror}") from exc
            try:
                self.file = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"config {args.config} is not valid JSON: {exc}") from None
            if not isinstance(self.file, dict):
                raise ConfigurationError("config file must hold a JSON object")

    def get(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        return self.file.get(name, GLOBAL_DEFAULTS.get(name) if default is None else default)

    @property
    def dim(self) -> int:
        d = int(self.get("dim", 10))
        if d < 2:
            raise ConfigurationError("--dim must be >= 2")
        return d

    @property
    def max_fes(self) -> int:
        m = self.get("max_fes")
        return int(m) if m is not None else 2000 * self.dim

    @property
    def seed(self) -> int:
        return int(self.get("seed", 0))


def _instance(opts: Options) -> bbob.ProblemInstance:
    fid = int(opts.get("function"))
    iseed = opts.get("instance_seed")
    return bbob.make_instance(fid, opts.dim, fid if iseed is None else int(iseed))


def _out_dir(opts: Options, default: str | None) -> Path | None:
    out = opts.get("out", default)
    if out is None:
        return None
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _load_agent(path: str):
    try:
        return load_checkpoint(path), checkpoint_hash(path)
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc.strerror}") from exc


def _id_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"bad id list {text!r}") from None


def _name_list(text) -> list[str]:
    if isinstance(text, list):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(opts: Options) -> int:
    agent_config = AgentConfig.from_dict(opts.file.get("agent", {}))
    steps = int(opts.get("meta_steps", 10000))
    out = _out_dir(opts, "train_out")

    def progress(rec):
        if rec.step % 100 == 0:
            log.info("step %d  f%d  reward %.4g  eps %.3f", rec.step, rec.function_id, rec.reward, rec.epsilon)

    agent, tlog = train(agent_config, bbob.suite_split(), opts.dim, steps, opts.max_fes, opts.seed, progress=progress)
    digest = save_checkpoint(agent, out / "agent.ckpt")
    _write(out / "training_log.csv", tlog.to_csv())
    meta = {
        "checkpoint_sha256": digest,
        "dimension": opts.dim,
        "meta_steps": steps,
        "base_max_fes": opts.max_fes,
        "seed": opts.seed,
        "ela_samples": tlog.ela_samples,
        "de_runs": tlog.de_runs,
        "timings": tlog.timings,
    }
    _write(out / "training_meta.json", json.dumps(meta, indent=2, sort_keys=True))
    print(f"checkpoint {out / 'agent.ckpt'} sha256 {digest}")
    return EXIT_OK


def cmd_design(opts: Options) -> int:
    agent, _ = _load_agent(opts.get("checkpoint"))
    if agent.dimension != opts.dim:
        log.warning("checkpoint was trained at D=%d, designing for D=%d", agent.dimension, opts.dim)
    cfg = design_for(agent, _instance(opts), np.random.default_rng(opts.seed))
    print(cfg.to_json())
    return EXIT_OK


def cmd_run(opts: Options) -> int:
    inst = _instance(opts)
    cfg = DEConfig.from_dict(opts.file["de"]) if "de" in opts.file else CANONICAL_DE
    max_fes = opts.max_fes
    hit = lambda f: f - inst.f_opt <= evalharness.ACCURACY  # noqa: E731
    res = run_de(cfg, inst, max_fes, evalharness.checkpoint_schedule(max_fes), np.random.default_rng(opts.seed), hit)
    out = _out_dir(opts, None)
    if out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("fes", "gap"))
        for fes, f in res.trajectory:
            w.writerow((fes, repr(bbob.gap(inst, f))))
        _write(out / "trajectory.csv", buf.getvalue())
    summary = {
        "function": inst.function_id,
        "dimension": inst.dimension,
        "config": cfg.to_dict(),
        "gap": bbob.gap(inst, res.best_f),
        "fes_used": res.fes_used,
        "fes_to_accuracy": res.hit_fes if res.hit_fes is not None else max_fes,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_features(opts: Options) -> int:
    inst = _instance(opts)
    values = ela.raw_state(inst, np.random.default_rng(opts.seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ela.FEATURE_NAMES)
    w.writerow([repr(float(v)) for v in values])
    out = _out_dir(opts, None)
    if out is not None:
        _write(out / "features.csv", buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _report(opts: Options, records, out: Path | None) -> None:
    names = sorted({r.algorithm for r in records})
    reference = opts.get("reference") or ("random_search" if "random_search" in names else names[0])
    report = evalharness.build_report(records, reference, opts.get("aei_baseline"))
    if out is not None:
        _write(out / "report.json", report.to_json())
        _write(out / "report.txt", report.to_text())
    sys.stdout.write(report.to_text())


def cmd_eval(opts: Options) -> int:
    ckpt = opts.get("checkpoint")
    default_algs = "rlde,random_search,canonical_de" if ckpt else "random_search,canonical_de"
    names = _name_list(opts.get("algorithms", default_algs))
    agent, digest = _load_agent(ckpt) if ckpt else (None, "")
    algorithms = evalharness.resolve_algorithms(names, agent, digest)
    functions = _id_list(opts.get("functions", sorted(bbob.TEST_IDS)))
    runs = int(opts.get("runs", 31))
    out = _out_dir(opts, "eval_out")

    def progress(rec):
        log.info("%s f%d run %d gap %.3e", rec.algorithm, rec.function_id, rec.run, rec.v_obj)

    records = evalharness.run_experiment(algorithms, functions, opts.dim, runs, opts.max_fes, opts.seed, progress=progress)
    evalharness.export(records, out)
    _report(opts, records, out)
    return EXIT_OK


def cmd_compare(opts: Options) -> int:
    src = Path(opts.get("records"))
    timings = src / "timings.json"
    records = evalharness.load_records(
        src / "records.csv", src / "trajectories.csv", timings if timings.exists() else None
    )
    if not records:
        raise ConfigurationError(f"no records in {src}")
    _report(opts, records, _out_dir(opts, None))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(Options(args))
    except CheckpointError as exc:
        print(f"rlde: checkpoint error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, ValueError, KeyError) as exc:
        print(f"rlde: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rlde: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
