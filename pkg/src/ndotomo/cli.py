"""Command-line interface: dataset generation, training, evaluation,
and comparison sweeps.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage error.
Every subcommand is deterministic given its full flag set including
``--seed``. A JSON config file (``--config``) may override flag
defaults; keys match the long flag names without leading dashes, and
explicit flags win over the config file.
"""

import argparse
import json
import sys

import numpy as np

from . import serialize, sweep as sweep_mod
from .datagen import (
    MeasurementProtocol,
    nine_bases,
    read_dataset,
    sample_dataset,
    write_dataset,
)
from .model import materialize
from .qcore import (
    DensityMatrix,
    canonical_state,
    depolarize,
    fidelity,
    mix_with_identity,
    pure_density,
    trace_distance,
    validate_density,
)
from .training import TrainConfig, train

TARGET_CHOICES = ("bell", "psi_i", "file")

EVAL_HEADER = "# ndotomo eval v1"


def _resolve_state(kind: str, file_path, p_dep: float) -> tuple[DensityMatrix, str]:
    """A named pure state or a matrix-blocks file, optionally mixed with
    the identity at strength p_dep."""
    if kind == "file":
        if not file_path:
            raise ValueError("target 'file' needs a matrix-blocks path")
        matrix = serialize.read_matrix_blocks(file_path)
        rho = validate_density(matrix)
        if not isinstance(rho, DensityMatrix):
            raise ValueError(f"{file_path}: {rho.describe()}")
        desc = str(file_path)
    else:
        name = "bell_phi_plus" if kind == "bell" else "psi_i"
        rho = pure_density(canonical_state(name))
        desc = name
    if p_dep > 0.0:
        rho = mix_with_identity(rho, p_dep)
        desc += f" (p_dep={p_dep})"
    return rho, desc


def _parse_bases(spec: str, n_qubits_hint=None):
    if spec == "nine2q":
        return nine_bases()
    return [b.strip().upper() for b in spec.split(",") if b.strip()]


def _float_list(spec) -> list:
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    return [float(v) for v in str(spec).split(",") if v.strip()]


def _int_list(spec) -> list:
    return [int(round(v)) for v in _float_list(spec)]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    target, desc = _resolve_state(args.target, args.target_file, args.p_dep)
    bases = _parse_bases(args.bases)
    protocol = MeasurementProtocol(tuple(bases), args.n_samples, seed=args.seed)
    dataset = sample_dataset(target, protocol)
    write_dataset(dataset, args.out)
    print(f"target: {desc}", file=sys.stderr)
    print(f"purity: {target.purity():.6f}", file=sys.stderr)
    print(f"bases: {len(bases)}  records: {dataset.n_records}  -> {args.out}",
          file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    dataset = read_dataset(args.data)
    reference = None
    if args.reference is not None:
        reference, _ = _resolve_state(args.reference, args.reference_file,
                                      args.ref_p_dep)
    config = TrainConfig(
        n_hidden=args.n_hidden,
        n_aux=args.n_aux,
        epochs=args.epochs,
        batch_size=args.batch_size,
        optimizer=args.optimizer,
        learning_rate=args.learning_rate,
        negative_phase=args.negative_phase,
        cd_k=args.cd_k,
        seed=args.seed,
        holdout_fraction=args.holdout,
        progress=not args.quiet,
    )
    report = train(dataset, config, reference=reference)
    serialize.save_checkpoint(report.best_params, args.out_model)
    serialize.save_train_report(report.epochs, report.best_epoch,
                                report.best_nll, args.out_report)
    print(f"best epoch {report.best_epoch}  nll {report.best_nll:.6f}  "
          f"model -> {args.out_model}  report -> {args.out_report}")
    return 0


def cmd_eval(args) -> int:
    params = serialize.load_checkpoint(args.model)
    rho = materialize(params)
    lines = [EVAL_HEADER, "# metric,value"]
    if args.reference is not None:
        reference, desc = _resolve_state(args.reference, args.reference_file,
                                         args.p_dep)
        lines.append(f"fidelity,{fidelity(reference, rho):.6f}")
        lines.append(f"trace_distance,{trace_distance(reference, rho):.6f}")
        lines.append(f"# reference: {desc}")
    lines.append(f"purity,{rho.purity():.6f}")
    text = "\n".join(lines) + "\n" + serialize.format_matrix_blocks(rho.matrix)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    tasks = sweep_mod.build_tasks(
        p_dep_list=_float_list(args.p_dep_list),
        ns_list=_int_list(args.ns_list),
        n_aux_list=_int_list(args.n_aux_list),
        repeats=args.repeats,
        base_seed=args.seed,
        n_hidden=args.n_hidden,
        batch_size=args.batch_size,
        epochs=args.epochs,
        target_name="bell_phi_plus" if args.target == "bell" else "psi_i",
    )
    jobs = args.jobs if args.jobs > 0 else sweep_mod.default_jobs()
    rows = sweep_mod.run_sweep(tasks, jobs=jobs)
    sweep_mod.write_sweep_csv(rows, args.out_csv)
    n_failed = sum(1 for r in rows if r.error)
    for row in rows:
        if row.error:
            t = row.task
            print(f"cell (p={t.p_dep}, ns={t.n_s}, na={t.n_aux}) "
                  f"repeat {t.repeat} failed: {row.error}", file=sys.stderr)
    print(f"{len(rows) - n_failed}/{len(rows)} runs ok -> {args.out_csv}",
          file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Parser plumbing
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="ndotomo",
        description="Mixed-state tomography with RBM-purified neural "
                    "density operators.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    sub_map = {}

    def add_config(p):
        p.add_argument("--config", default=None,
                       help="JSON file overriding flag defaults "
                            "(keys = flag names without dashes)")

    gen = subs.add_parser("gen", help="generate a synthetic dataset")
    sub_map["gen"] = gen
    gen.add_argument("--target", choices=TARGET_CHOICES, default="bell")
    gen.add_argument("--target-file", default=None,
                     help="matrix-blocks file when --target file")
    gen.add_argument("--p-dep", type=float, default=0.0,
                     help="depolarizing strength in [0, 1]")
    gen.add_argument("--bases", default="nine2q",
                     help="'nine2q' or a comma-separated basis list")
    gen.add_argument("--n-samples", type=int, default=1000,
                     help="measurements per basis")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    add_config(gen)
    gen.set_defaults(func=cmd_gen)

    tr = subs.add_parser("train", help="train an NDO on a dataset")
    sub_map["train"] = tr
    tr.add_argument("--data", required=True)
    tr.add_argument("--n-hidden", type=int, default=1)
    tr.add_argument("--n-aux", type=int, default=2)
    tr.add_argument("--epochs", type=int, default=1000)
    tr.add_argument("--batch-size", type=int, default=10)
    tr.add_argument("--optimizer", choices=("adadelta", "sgd"), default="adadelta")
    tr.add_argument("--learning-rate", type=float, default=0.05,
                    help="step size (sgd only)")
    tr.add_argument("--negative-phase", choices=("exact", "cd"), default="exact")
    tr.add_argument("--cd-k", type=int, default=10)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--holdout", type=float, default=0.0,
                    help="fraction held out for model selection")
    tr.add_argument("--reference", choices=TARGET_CHOICES, default=None,
                    help="log fidelity against this state each epoch")
    tr.add_argument("--reference-file", default=None)
    tr.add_argument("--ref-p-dep", type=float, default=0.0)
    tr.add_argument("--quiet", action="store_true",
                    help="suppress per-epoch progress on stderr")
    tr.add_argument("--out-model", required=True)
    tr.add_argument("--out-report", required=True)
    add_config(tr)
    tr.set_defaults(func=cmd_train)

    ev = subs.add_parser("eval", help="evaluate a trained checkpoint")
    sub_map["eval"] = ev
    ev.add_argument("--model", required=True)
    ev.add_argument("--reference", choices=TARGET_CHOICES, default=None)
    ev.add_argument("--reference-file", default=None)
    ev.add_argument("--p-dep", type=float, default=0.0)
    ev.add_argument("--out", default=None, help="write report here instead of stdout")
    add_config(ev)
    ev.set_defaults(func=cmd_eval)

    sw = subs.add_parser("sweep", help="fidelity comparison sweep")
    sub_map["sweep"] = sw
    sw.add_argument("--p-dep-list", default="0,0.5,1")
    sw.add_argument("--ns-list", default="100,1000,10000")
    sw.add_argument("--n-aux-list", default="1,2")
    sw.add_argument("--repeats", type=int, default=10)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--n-hidden", type=int, default=1)
    sw.add_argument("--batch-size", type=int, default=10)
    sw.add_argument("--epochs", type=int, default=0,
                    help="per-run epochs; 0 targets a fixed update budget")
    sw.add_argument("--target", choices=("bell", "psi_i"), default="bell")
    sw.add_argument("--jobs", type=int, default=0,
                    help="parallel cells; 0 reads NDOTOMO_JOBS (default 1)")
    sw.add_argument("--out-csv", required=True)
    add_config(sw)
    sw.set_defaults(func=cmd_sweep)

    return parser, sub_map


def _apply_config(argv, parser, sub_map):
    """Load --config JSON (if present) as subcommand defaults."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    command = next((tok for tok in argv if tok in sub_map), None)
    if command is None:
        return
    sub = sub_map[command]
    with open(path) as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        parser.error(f"{path}: config must be a JSON object")
    defaults = {}
    for key, value in overrides.items():
        opt = "--" + key
        action = sub._option_string_actions.get(opt)
        if action is None:
            parser.error(f"{path}: unknown config key {key!r} for '{command}'")
        if action.type is not None and isinstance(value, str):
            value = action.type(value)
        if action.choices is not None and value not in action.choices:
            parser.error(f"{path}: invalid value {value!r} for {key!r}")
        defaults[action.dest] = value
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub_map = build_parser()
    try:
        _apply_config(argv, parser, sub_map)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as err:
        print(f"ndotomo: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
