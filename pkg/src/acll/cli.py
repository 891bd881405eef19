"""Config-driven experiment runner.

Usage::

    acll validate CONFIG
    acll run CONFIG [--seed N] [--out DIR]

Exit codes: 0 success, 1 runtime failure, 2 configuration error.

Output layout::

    <out>/summary.csv
    <out>/<strategy>/report.json
    <out>/<strategy>/cache_task<k>.jsonl    (acll only, one line per evaluation)
    <out>/<strategy>/trail_task<k>.jsonl    (acll only, one line per multiplier round)
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass

from .boopt import BoBudget
from .datagen import KINDS, PRESETS, generate_dataset, preset_tasks
from .dual import DualSearchConfig
from .errors import AcllError
from .lifelong import STRATEGY_KINDS, SequenceReport, Strategy, make_task_specs, run_sequence
from .net import TrainConfig

__all__ = ["ExperimentConfig", "validate_config", "load_config", "run_experiment", "main",
           "summary_rows", "SUMMARY_COLUMNS"]

SUMMARY_COLUMNS = ["strategy", "task", "chosen_theta", "size", "acc_post_task",
                   "acc_end_of_sequence", "avg_over_tasks"]

_TOP_KEYS = {"sequence", "n_per_split", "strategies", "network", "train", "finetune", "dual", "bo",
             "seed", "output_dir"}
_TRAIN_KEYS = {"epochs", "learning_rate", "batch_size", "optimizer", "momentum"}
_DUAL_KEYS = {"epsilon", "lambda_lo", "lambda_hi", "lambda_tol", "max_rounds", "lambda_floor",
              "refine_steps"}
_BO_KEYS = {"n_init", "n_iter", "ei_tol"}
_TASK_KEYS = {"name", "kind", "class_count", "n_per_split", "noise_std", "seed"}


class ConfigError(AcllError):
    pass


@dataclass
class ExperimentConfig:
    tasks: list
    strategies: list[Strategy]
    layer_dims: list[int]
    train: TrainConfig
    finetune: TrainConfig
    dual: DualSearchConfig
    seed: int
    output_dir: str


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_keys(obj, allowed, path, out):
    for k in obj:
        if k not in allowed:
            out.append((f"{path}.{k}" if path else k, "unknown key"))


def _check_train(obj, path, out):
    if not isinstance(obj, dict):
        out.append((path, "must be an object"))
        return
    _check_keys(obj, _TRAIN_KEYS, path, out)
    if "epochs" in obj and not (_is_int(obj["epochs"]) and obj["epochs"] >= 1):
        out.append((f"{path}.epochs", "must be an integer >= 1"))
    if "learning_rate" in obj and not (_is_num(obj["learning_rate"]) and obj["learning_rate"] > 0):
        out.append((f"{path}.learning_rate", "must be > 0"))
    if "batch_size" in obj and not (_is_int(obj["batch_size"]) and obj["batch_size"] >= 1):
        out.append((f"{path}.batch_size", "must be an integer >= 1"))
    if "optimizer" in obj and obj["optimizer"] not in ("plain-sgd", "momentum-sgd"):
        out.append((f"{path}.optimizer", "must be 'plain-sgd' or 'momentum-sgd'"))
    if "momentum" in obj and not (_is_num(obj["momentum"]) and 0 <= obj["momentum"] < 1):
        out.append((f"{path}.momentum", "must lie in [0, 1)"))


def _diagnose(cfg) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    if not isinstance(cfg, dict):
        return [("", "top level must be a JSON object")]
    _check_keys(cfg, _TOP_KEYS, "", out)

    seq = cfg.get("sequence")
    if seq is None:
        out.append(("sequence", "missing"))
    elif isinstance(seq, str):
        if seq not in PRESETS:
            out.append(("sequence", f"unknown preset; expected one of {sorted(PRESETS)}"))
    elif isinstance(seq, list) and seq:
        for i, t in enumerate(seq):
            p = f"sequence[{i}]"
            if not isinstance(t, dict):
                out.append((p, "must be an object"))
                continue
            _check_keys(t, _TASK_KEYS, p, out)
            if t.get("kind") not in KINDS:
                out.append((f"{p}.kind", f"must be one of {list(KINDS)}"))
            k = t.get("class_count")
            if not (_is_int(k) and k >= 2):
                out.append((f"{p}.class_count", "must be an integer >= 2"))
            n = t.get("n_per_split", cfg.get("n_per_split", 2000))
            if not (_is_int(n) and n >= (k if _is_int(k) else 2)):
                out.append((f"{p}.n_per_split", "must be an integer >= class_count"))
            if not (_is_num(t.get("noise_std", 0.0)) and t.get("noise_std", 0.0) >= 0):
                out.append((f"{p}.noise_std", "must be >= 0"))
            if "seed" in t and not _is_int(t["seed"]):
                out.append((f"{p}.seed", "must be an integer"))
    else:
        out.append(("sequence", "must be a preset name or a non-empty list of tasks"))
    if "n_per_split" in cfg and not (_is_int(cfg["n_per_split"]) and cfg["n_per_split"] >= 5):
        out.append(("n_per_split", "must be an integer >= 5"))

    strategies = cfg.get("strategies")
    if not isinstance(strategies, list) or not strategies:
        out.append(("strategies", "must be a non-empty list"))
    else:
        labels = []
        for i, s in enumerate(strategies):
            p = f"strategies[{i}]"
            if not isinstance(s, dict) or s.get("name") not in STRATEGY_KINDS:
                out.append((p, f"unknown strategy; expected one of {list(STRATEGY_KINDS)}"))
                continue
            _check_keys(s, {"name", "epsilon", "rate"}, p, out)
            if s["name"] == "acll" and "epsilon" in s and not (_is_num(s["epsilon"]) and s["epsilon"] >= 0):
                out.append((f"{p}.epsilon", "must be >= 0"))
            if s["name"] == "fixed" and not (_is_num(s.get("rate")) and 0 <= s["rate"] <= 1):
                out.append((f"{p}.rate", "fixed needs a rate in [0, 1]"))
            labels.append(json.dumps(s, sort_keys=True))
        if len(set(labels)) != len(labels):
            out.append(("strategies", "duplicate strategy"))

    net = cfg.get("network", {})
    if not isinstance(net, dict):
        out.append(("network", "must be an object"))
    else:
        _check_keys(net, {"layer_dims"}, "network", out)
        dims = net.get("layer_dims", [2, 64, 64])
        if not (isinstance(dims, list) and len(dims) >= 2 and all(_is_int(d) and d > 0 for d in dims)):
            out.append(("network.layer_dims", "must list >= 2 positive integers"))
        elif dims[0] != 2:
            out.append(("network.layer_dims", "input dimension must be 2"))

    for key in ("train", "finetune"):
        if key in cfg:
            _check_train(cfg[key], key, out)

    dual = cfg.get("dual", {})
    if not isinstance(dual, dict):
        out.append(("dual", "must be an object"))
    else:
        _check_keys(dual, _DUAL_KEYS, "dual", out)
        d = {**DualSearchConfig().__dict__, **dual}
        if not (_is_num(d["epsilon"]) and d["epsilon"] >= 0):
            out.append(("dual.epsilon", "must be >= 0"))
        if not (_is_num(d["lambda_lo"]) and _is_num(d["lambda_hi"]) and 0 <= d["lambda_lo"] < d["lambda_hi"]):
            out.append(("dual.lambda_hi", "need 0 <= lambda_lo < lambda_hi"))
        if not (_is_num(d["lambda_tol"]) and d["lambda_tol"] > 0):
            out.append(("dual.lambda_tol", "must be > 0"))
        if not (_is_int(d["max_rounds"]) and d["max_rounds"] >= 2):
            out.append(("dual.max_rounds", "must be an integer >= 2"))
        if not (_is_num(d["lambda_floor"]) and _is_num(d["lambda_hi"])
                and 0 < d["lambda_floor"] < d["lambda_hi"]):
            out.append(("dual.lambda_floor", "need 0 < lambda_floor < lambda_hi"))
        if not (_is_int(d["refine_steps"]) and d["refine_steps"] >= 0):
            out.append(("dual.refine_steps", "must be an integer >= 0"))

    bo = cfg.get("bo", {})
    if not isinstance(bo, dict):
        out.append(("bo", "must be an object"))
    else:
        _check_keys(bo, _BO_KEYS, "bo", out)
        if "n_init" in bo and not (_is_int(bo["n_init"]) and bo["n_init"] >= 2):
            out.append(("bo.n_init", "must be an integer >= 2"))
        if "n_iter" in bo and not (_is_int(bo["n_iter"]) and bo["n_iter"] >= 1):
            out.append(("bo.n_iter", "must be an integer >= 1"))
        if "ei_tol" in bo and not (_is_num(bo["ei_tol"]) and bo["ei_tol"] >= 0):
            out.append(("bo.ei_tol", "must be >= 0"))

    if "seed" in cfg and not _is_int(cfg["seed"]):
        out.append(("seed", "must be an integer"))
    if "output_dir" in cfg and not isinstance(cfg["output_dir"], str):
        out.append(("output_dir", "must be a string"))
    return out


def _line_of(text: str, path: str) -> int | None:
    """Best-effort line number of the last key named in ``path``."""
    keys = [k.split("[")[0] for k in path.split(".") if k]
    line = 0
    lines = text.splitlines()
    for key in keys:
        needle = f'"{key}"'
        for i in range(line, len(lines)):
            if needle in lines[i]:
                line = i
                break
    return line + 1 if keys else None


def _read(path) -> tuple[str, object]:
    with open(path) as fh:
        text = fh.read()
    try:
        return text, json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def validate_config(config_path) -> list[str]:
    """Every constraint violation as ``"<line>: <path>: <message>"``.

    An empty list means :func:`run_experiment` accepts the file.  A file
    that is not valid JSON yields a single diagnostic.
    """
    try:
        text, cfg = _read(config_path)
    except ConfigError as exc:
        return [str(exc)]
    out = []
    for path, msg in _diagnose(cfg):
        line = _line_of(text, path)
        out.append(f"{config_path}:{line}: {path}: {msg}" if line else f"{config_path}: {path}: {msg}")
    return out


def _train_cfg(obj: dict, epochs: int) -> TrainConfig:
    base = TrainConfig(epochs=epochs)
    return TrainConfig(obj.get("epochs", base.epochs), obj.get("learning_rate", base.learning_rate),
                       obj.get("batch_size", base.batch_size), 0,
                       obj.get("optimizer", base.optimizer), obj.get("momentum", base.momentum))


def load_config(config_path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every diagnostic."""
    diags = validate_config(config_path)
    if diags:
        raise ConfigError("\n".join(diags))
    _, cfg = _read(config_path)
    master = cfg.get("seed", 0) if seed is None else seed
    n_default = cfg.get("n_per_split", 2000)
    seq = cfg["sequence"]
    if isinstance(seq, str):
        datasets = preset_tasks(seq, n_default, master)
    else:
        datasets = [(t.get("name", f"{t['kind']}-{t['class_count']}"),
                     generate_dataset(t["kind"], t["class_count"], t.get("n_per_split", n_default),
                                      t.get("noise_std", 0.0), t.get("seed", master + i)))
                    for i, t in enumerate(seq)]
    dual = cfg.get("dual", {})
    bo = cfg.get("bo", {})
    dual_cfg = DualSearchConfig(**{**dual, "bo_budget": BoBudget(**bo)})
    strategies = []
    for s in cfg["strategies"]:
        if s["name"] == "acll":
            strategies.append(Strategy.acll(s.get("epsilon", dual_cfg.epsilon)))
        elif s["name"] == "fixed":
            strategies.append(Strategy.fixed(s["rate"]))
        else:
            strategies.append(Strategy(s["name"]))
    base_dir = os.path.dirname(os.path.abspath(config_path))
    output_dir = out or os.path.join(base_dir, cfg.get("output_dir", "runs"))
    return ExperimentConfig(datasets, strategies, cfg.get("network", {}).get("layer_dims", [2, 64, 64]),
                            _train_cfg(cfg.get("train", {}), 60),
                            _train_cfg(cfg.get("finetune", {}), 20), dual_cfg, master, output_dir)


def summary_rows(reports: list[SequenceReport]) -> list[dict]:
    """One row per (strategy, task); a pure projection of the reports."""
    rows = []
    for rep in reports:
        avg = rep.average_end_accuracy
        for t in rep.tasks:
            rows.append({
                "strategy": rep.strategy, "task": t.name,
                "chosen_theta": ";".join(repr(x) for x in t.theta),
                "size": repr(t.size), "acc_post_task": repr(t.acc_post_task),
                "acc_end_of_sequence": repr(t.acc_end_of_sequence), "avg_over_tasks": repr(avg),
            })
    return rows


def _write_reports(exp: ExperimentConfig, reports: list[SequenceReport]) -> None:
    os.makedirs(exp.output_dir, exist_ok=True)
    for rep in reports:
        sdir = os.path.join(exp.output_dir, rep.strategy)
        os.makedirs(sdir, exist_ok=True)
        with open(os.path.join(sdir, "report.json"), "w") as fh:
            fh.write(rep.to_json())
        for t in rep.tasks:
            if t.cache is not None:
                t.cache.dump(os.path.join(sdir, f"cache_task{t.task_id}.jsonl"))
                with open(os.path.join(sdir, f"trail_task{t.task_id}.jsonl"), "w") as fh:
                    fh.writelines(json.dumps(r, sort_keys=True) + "\n" for r in t.trail)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(summary_rows(reports))
    with open(os.path.join(exp.output_dir, "summary.csv"), "w") as fh:
        fh.write(buf.getvalue())


def run_experiment(config_path, seed: int | None = None, out: str | None = None,
                   stderr=None) -> int:
    """Run every configured strategy; returns the process exit status."""
    stderr = stderr or sys.stderr
    try:
        exp = load_config(config_path, seed, out)
    except ConfigError as exc:
        print(exc, file=stderr)
        return 2
    except OSError as exc:
        print(f"{config_path}: {exc}", file=stderr)
        return 2
    reports = []
    for strategy in exp.strategies:
        specs = make_task_specs(exp.tasks, exp.seed, exp.train, exp.finetune)
        try:
            reports.append(run_sequence(specs, strategy, exp.seed, exp.layer_dims, exp.dual))
        except Exception as exc:
            task = getattr(exc, "task_name", "?")
            print(f"strategy {strategy.label} failed on task {task}: {exc}", file=stderr)
            return 1
    _write_reports(exp, reports)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="acll", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_val = sub.add_parser("validate", help="check a config and list every problem")
    p_val.add_argument("config")
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            diags = validate_config(args.config)
        except OSError as exc:
            print(f"{args.config}: {exc}", file=sys.stderr)
            return 2
        for d in diags:
            print(d)
        return 2 if diags else 0
    return run_experiment(args.config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
