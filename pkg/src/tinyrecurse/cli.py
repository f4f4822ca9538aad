"""Command-line interface.

Commands: gen-data, train, eval, ablate, inspect-checkpoint.
Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
Relative --out paths resolve under $TINYRECURSE_OUT when it is set.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import checkpoint as ckpt
from . import evaluation
from .config import RunConfig, config_hash_of
from .data import arc as arc_mod
from .data import io as data_io
from .data import pipelines
from .data.grids import task_spec
from .model import NetConfig, ParamStore, param_count
from .plots import svg_line_plot
from .recursion import RecursionSchedule, check_memory, effective_depth
from .training import TrainConfig, TrainingDiverged, make_train_state, train_step


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_path(path: str) -> str:
    root = os.environ.get("TINYRECURSE_OUT", "")
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def build_parser() -> _Parser:
    p = _Parser(prog="tinyrecurse", description="recursive-refinement engine for grid puzzles")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate or ingest a dataset")
    g.add_argument("task", choices=["sudoku", "maze", "arc"])
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--force", action="store_true")
    g.add_argument("--count", type=int, default=400, help="train instances (or tasks for arc)")
    g.add_argument("--test-count", type=int, default=400)
    g.add_argument("--augment", type=int, default=8, help="augmented copies per instance")
    g.add_argument("--size", type=int, choices=[4, 9], default=4, help="sudoku grid size")
    g.add_argument("--clue-min", type=int, default=None)
    g.add_argument("--clue-max", type=int, default=None)
    g.add_argument("--height", type=int, default=12)
    g.add_argument("--width", type=int, default=12)
    g.add_argument("--min-path-len", type=int, default=44)
    g.add_argument("--input", default=None, help="arc: task JSON file to ingest")
    g.add_argument("--full-color-perm", action="store_true", help="arc: permute the background too")

    t = sub.add_parser("train", help="train a model on a generated dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", default=None, help="RunConfig JSON; flags override it")
    t.add_argument("--resume", default=None, help="checkpoint to continue from")
    t.add_argument("--variant", choices=["trm", "hrm", "single_z", "multi_z"], default=None)
    t.add_argument("--n", type=int, default=None)
    t.add_argument("--T", type=int, default=None)
    t.add_argument("--n-sup", type=int, default=None)
    t.add_argument("--layers", type=int, default=None)
    t.add_argument("--width", type=int, default=None, help="hidden width D")
    t.add_argument("--heads", type=int, default=None)
    t.add_argument("--net", choices=["attention", "mixer"], default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--embedding-lr", type=float, default=None)
    t.add_argument("--warmup", type=int, default=None)
    t.add_argument("--weight-decay", type=float, default=None)
    t.add_argument("--ema-decay", type=float, default=None)
    t.add_argument("--steps", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--dtype", choices=["float32", "float64"], default=None)
    t.add_argument("--no-halting", action="store_true")
    t.add_argument("--mem-limit", type=float, default=None, help="tape memory budget, GiB")
    t.add_argument("--ckpt-every", type=int, default=0, help="checkpoint cadence in steps")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--out", default=None, help="report JSON path")
    e.add_argument("--per-sample", default=None, help="optional per-sample CSV path")
    e.add_argument("--no-ema", action="store_true", help="evaluate raw weights instead of EMA")
    e.add_argument("--n-sup", type=int, default=None)
    e.add_argument("--batch-size", type=int, default=256)
    e.add_argument("--no-vote", action="store_true", help="skip augmentation voting on grouped tasks")

    a = sub.add_parser("ablate", help="train/eval a grid of schedule cells")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--cells", required=True,
                   help="semicolon list of variant,n,T,layers[,net] cells; empty string allowed")
    a.add_argument("--steps", type=int, default=300)
    a.add_argument("--seeds", default="0", help="comma list of seeds per cell")
    a.add_argument("--width", type=int, default=32)
    a.add_argument("--heads", type=int, default=4)
    a.add_argument("--batch-size", type=int, default=64)
    a.add_argument("--lr", type=float, default=1e-3)
    a.add_argument("--warmup", type=int, default=50)
    a.add_argument("--n-sup", type=int, default=8)
    a.add_argument("--mem-limit", type=float, default=8.0)

    i = sub.add_parser("inspect-checkpoint", help="print checkpoint contents")
    i.add_argument("checkpoint")
    return p


def _load_dataset(data_dir: str, split: str):
    try:
        manifest = data_io.load_manifest(data_dir)
        records = data_io.load_split(data_dir, split)
    except FileNotFoundError as e:
        raise DataError(str(e)) from e
    except (json.JSONDecodeError, KeyError) as e:
        raise DataError(f"corrupt dataset under {data_dir}: {e}") from e
    return manifest, records


def cmd_gen_data(args) -> int:
    out = _out_path(args.out)
    if args.task == "sudoku":
        default_clues = {4: (6, 12), 9: (28, 45)}[args.size]
        clue_range = (
            args.clue_min if args.clue_min is not None else default_clues[0],
            args.clue_max if args.clue_max is not None else default_clues[1],
        )
        splits, meta = pipelines.build_sudoku(
            args.size, args.count, args.test_count, clue_range, args.augment, args.seed
        )
    elif args.task == "maze":
        splits, meta = pipelines.build_maze(
            args.height, args.width, args.min_path_len, args.count, args.test_count,
            args.augment, args.seed,
        )
    else:
        if not args.input:
            raise UsageError("gen-data arc requires --input")
        try:
            tasks = arc_mod.load_tasks(args.input)
        except (OSError, arc_mod.ArcFormatError) as e:
            raise DataError(str(e)) from e
        splits, meta = pipelines.build_arc(
            tasks, args.augment, args.seed, fix_background=not args.full_color_perm
        )
    meta["config_hash"] = config_hash_of(meta)
    try:
        manifest = data_io.write_dataset(out, splits, meta, force=args.force)
    except FileExistsError as e:
        raise DataError(str(e)) from e
    counts = {k: v["count"] for k, v in manifest["splits"].items()}
    print(f"wrote {out}: {counts} (config {meta['config_hash']})")
    return 0


def _resolve_run_config(args, manifest) -> RunConfig:
    spec = task_spec(
        manifest["task"],
        manifest.get("seq_height"),
        manifest.get("seq_width"),
    )
    if args.config:
        with open(args.config) as f:
            run = RunConfig.from_json(f.read())
        if run.net.vocab_size != spec.vocab_size or run.net.seq_len != spec.seq_len:
            raise UsageError(
                f"config file expects vocab {run.net.vocab_size}/seq {run.net.seq_len}, "
                f"dataset has {spec.vocab_size}/{spec.seq_len}"
            )
    else:
        run = RunConfig(
            net=NetConfig(vocab_size=spec.vocab_size, seq_len=spec.seq_len,
                          hidden_d=64, n_layers=2, n_heads=8, variant="mixer"),
            schedule=RecursionSchedule(),
            train=TrainConfig(),
        )

    net_kw = {}
    if args.layers is not None:
        net_kw["n_layers"] = args.layers
    if args.width is not None:
        net_kw["hidden_d"] = args.width
    if args.heads is not None:
        net_kw["n_heads"] = args.heads
    if args.net is not None:
        net_kw["variant"] = args.net
    if net_kw:
        run = replace(run, net=replace(run.net, **net_kw))

    sched_kw = {}
    for flag, name in (("variant", "variant"), ("n", "n"), ("T", "T"), ("n_sup", "n_sup")):
        v = getattr(args, flag)
        if v is not None:
            sched_kw[name] = v
    if sched_kw:
        run = replace(run, schedule=replace(run.schedule, **sched_kw))

    train_kw = {}
    for flag, name in (
        ("batch_size", "batch_size"), ("lr", "lr"), ("embedding_lr", "embedding_lr"),
        ("warmup", "warmup_steps"), ("weight_decay", "weight_decay"),
        ("ema_decay", "ema_decay"), ("steps", "max_steps"), ("seed", "seed"),
        ("dtype", "dtype"), ("mem_limit", "mem_limit_gb"),
    ):
        v = getattr(args, flag)
        if v is not None:
            train_kw[name] = v
    if args.no_halting:
        train_kw["halting"] = False
    if train_kw:
        run = replace(run, train=replace(run.train, **train_kw))
    return replace(run, data_dir=args.data, out_dir=args.out, task=manifest["task"])


def cmd_train(args) -> int:
    out = _out_path(args.out)
    manifest, records = _load_dataset(args.data, "train")
    run = _resolve_run_config(args, manifest)
    data = data_io.records_to_arrays(records)
    os.makedirs(out, exist_ok=True)
    chash = run.config_hash()
    with open(os.path.join(out, "config.json"), "w") as f:
        f.write(run.to_json() + "\n")

    run_meta = {"config_hash": chash, "task": manifest["task"], "data_config_hash": manifest.get("config_hash")}
    if args.resume:
        state = ckpt.resume_train_state(args.resume, data)
        state.cfg.max_steps = run.train.max_steps
    else:
        nets = ("net_L", "net_H") if run.schedule.variant == "hrm" else ("net",)
        store = ParamStore(
            run.net,
            n_puzzle_ids=manifest.get("n_puzzle_ids", 1),
            halt_mode=run.schedule.halt_mode,
            nets=nets,
            seed=run.train.seed,
            dtype=run.train.dtype,
        )
        state = make_train_state(data, store, run.schedule, run.train)

    metrics_path = os.path.join(out, "metrics.jsonl")
    mode = "a" if args.resume else "w"
    final = os.path.join(out, "checkpoint.zip")
    with open(metrics_path, mode) as mf:
        while state.step < state.cfg.max_steps:
            try:
                rec = train_step(state)
            except TrainingDiverged as e:
                diag = os.path.join(out, "checkpoint-diverged.zip")
                ckpt.save_train_state(diag, e.state, run_meta)
                print(f"training diverged: {e}; diagnostic state in {diag}", file=sys.stderr)
                raise
            rec["config_hash"] = chash
            mf.write(json.dumps(rec, sort_keys=True) + "\n")
            if args.ckpt_every and state.step % args.ckpt_every == 0:
                ckpt.save_train_state(os.path.join(out, f"checkpoint-{state.step:07d}.zip"), state, run_meta)
    ckpt.save_train_state(final, state, run_meta)
    print(f"trained {state.step} steps -> {final} (config {chash})")
    return 0


def cmd_eval(args) -> int:
    manifest, records = _load_dataset(args.data, args.split)
    try:
        store, meta = ckpt.load_store(args.checkpoint, use_ema=not args.no_ema)
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read checkpoint {args.checkpoint}: {e}") from e
    spec = task_spec(manifest["task"], manifest.get("seq_height"), manifest.get("seq_width"))
    if store.cfg.vocab_size != spec.vocab_size or store.cfg.seq_len != spec.seq_len:
        raise DataError(
            f"checkpoint vocab/seq ({store.cfg.vocab_size}/{store.cfg.seq_len}) does not match "
            f"dataset ({spec.vocab_size}/{spec.seq_len})"
        )
    sched = RecursionSchedule(**meta["schedule"])
    grouped = manifest["task"] == "arc" and not args.no_vote and any(r.aug for r in records)
    if grouped:
        report = evaluation.eval_arc_voting(
            store, records, spec, sched, n_sup=args.n_sup, batch_size=args.batch_size
        )
    else:
        data = data_io.records_to_arrays(records)
        report = evaluation.eval_run(
            store, data, sched, n_sup=args.n_sup, batch_size=args.batch_size, task=manifest["task"]
        )
    obj = json.loads(report.to_json())
    obj["config_hash"] = meta.get("config_hash")
    obj["seed"] = meta.get("seed")
    obj["split"] = args.split
    obj["ema"] = not args.no_ema
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(_out_path(args.out), "w") as f:
            f.write(text)
    print(text, end="")
    if args.per_sample:
        data = data_io.records_to_arrays(records)
        preds, _ = evaluation.predict_tokens(store, data[0], data[2], sched, args.n_sup, args.batch_size)
        with open(_out_path(args.per_sample), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "base_id", "augmentation_id", "exact_match"])
            for i, r in enumerate(records):
                w.writerow([i, r.base_id, r.augmentation_id, int(np.array_equal(preds[i], r.target))])
    return 0


def _parse_cells(text: str):
    cells = []
    for part in filter(None, (s.strip() for s in text.split(";"))):
        bits = part.split(",")
        if len(bits) not in (4, 5):
            raise UsageError(f"cell {part!r}: expected variant,n,T,layers[,net]")
        variant, n, T, layers = bits[0], int(bits[1]), int(bits[2]), int(bits[3])
        net = bits[4] if len(bits) == 5 else "mixer"
        cells.append((variant, n, T, layers, net))
    return cells


def cmd_ablate(args) -> int:
    out = _out_path(args.out)
    os.makedirs(out, exist_ok=True)
    cells = _parse_cells(args.cells)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    manifest, train_records = _load_dataset(args.data, "train")
    _, test_records = _load_dataset(args.data, "test")
    spec = task_spec(manifest["task"], manifest.get("seq_height"), manifest.get("seq_width"))
    train_data = data_io.records_to_arrays(train_records)
    test_data = data_io.records_to_arrays(test_records)

    rows = []
    curves: dict[str, list[tuple[float, float]]] = {}
    for variant, n, T, layers, net in cells:
        label = f"{variant}-n{n}-T{T}-L{layers}-{net}"
        cfg = NetConfig(vocab_size=spec.vocab_size, seq_len=spec.seq_len,
                        hidden_d=args.width, n_layers=layers, n_heads=args.heads, variant=net)
        sched = RecursionSchedule(variant, n=n, T=T, n_sup=args.n_sup)
        nfp = 2 if variant == "hrm" else 1
        depth = effective_depth(T, n, layers)
        try:
            check_memory(cfg, sched, args.batch_size, args.mem_limit)
        except MemoryError as e:
            rows.append({"cell": label, "variant": variant, "n": n, "T": T, "depth": depth,
                         "test_exact_match": "", "params": "", "nfp": nfp, "note": f"skipped: {e}"})
            continue
        accs = []
        params_n = None
        for seed in seeds:
            nets = ("net_L", "net_H") if variant == "hrm" else ("net",)
            store = ParamStore(cfg, n_puzzle_ids=manifest.get("n_puzzle_ids", 1),
                               halt_mode=sched.halt_mode, nets=nets, seed=seed)
            params_n = store.n_elements
            tcfg = TrainConfig(batch_size=args.batch_size, lr=args.lr, warmup_steps=args.warmup,
                               weight_decay=0.1, max_steps=args.steps, seed=seed,
                               mem_limit_gb=args.mem_limit)
            state = make_train_state(train_data, store, sched, tcfg)
            pts = []
            while state.step < tcfg.max_steps:
                rec = train_step(state)
                pts.append((rec["step"], rec["loss"]))
            if seed == seeds[0]:
                curves[label] = pts
            eval_store = ParamStore(cfg, n_puzzle_ids=manifest.get("n_puzzle_ids", 1),
                                    halt_mode=sched.halt_mode, nets=nets, seed=seed)
            state.ema.copy_into(eval_store)
            report = evaluation.eval_run(eval_store, test_data, sched)
            accs.append(report.exact_match)
        rows.append({"cell": label, "variant": variant, "n": n, "T": T, "depth": depth,
                     "test_exact_match": f"{float(np.mean(accs)):.4f}", "params": params_n,
                     "nfp": nfp, "note": ""})

    cols = ["cell", "variant", "n", "T", "depth", "test_exact_match", "params", "nfp", "note"]
    with open(os.path.join(out, "table.csv"), "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    with open(os.path.join(out, "table.md"), "w") as f:
        f.write("| " + " | ".join(cols) + " |\n")
        f.write("|" + "---|" * len(cols) + "\n")
        for r in rows:
            f.write("| " + " | ".join(str(r[c]) for c in cols) + " |\n")
    svg_line_plot(curves, os.path.join(out, "loss_curves.svg"), title="training loss per cell")
    print(f"ablation table with {len(rows)} rows -> {out}")
    return 0


def cmd_inspect(args) -> int:
    try:
        arrays, meta = ckpt.load_arrays(args.checkpoint)
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read checkpoint {args.checkpoint}: {e}") from e
    print(json.dumps(meta, indent=2, sort_keys=True))
    n_params = sum(a.size for k, a in arrays.items() if k.startswith("param."))
    print(f"arrays: {len(arrays)}, learnable parameters: {n_params}")
    for name in sorted(arrays):
        a = arrays[name]
        print(f"  {name:40s} {str(a.dtype):10s} {a.shape}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "gen-data": cmd_gen_data,
            "train": cmd_train,
            "eval": cmd_eval,
            "ablate": cmd_ablate,
            "inspect-checkpoint": cmd_inspect,
        }[args.command]
        return handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
