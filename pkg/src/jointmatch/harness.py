"""Training runs, ablation battery, sweeps and report rendering.

A run directory contains::

    config.snapshot   flat key = value config, seeds resolved
    telemetry.csv     one row per (step, model, class)
    report.json       config, evaluations, final test metrics, summaries
    checkpoints/      best_<model>.json and final_<model>.json
"""

import csv
import dataclasses
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .augment import AugmentSpec, Channel, featurize, parse_synonym_file
from .classifier import Optimizer, init, save_checkpoint
from .config import MODE_LABELS, MODES, ConfigError, config_to_dict, config_to_text
from .data import (SyntheticTaskSpec, build_text_inputs, few_shot_split,
                   load_text_corpus, make_synthetic)
from .metrics import accuracy, coefficient_of_variation, macro_f1, mean_std
from .numeric import rng_stream
from .thresholds import LearningStatus
from .trainer import ModelSide, NonFiniteLoss, TrainState, train_step

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TELEMETRY_COLUMNS = [
    "schema_version", "step", "model", "class", "passed_count", "correct_count",
    "tau_local", "p_tilde", "sup_loss", "unsup_loss", "agreement_rate",
]

STANDARD_GRIDS = {
    "delta": [0.0, 0.3, 0.5, 0.7, 0.9, 1.0],
    "lambda": [0.0, 0.25, 0.5, 0.9, 0.99],
    "tau": [0.25, 0.5, 0.75, 0.9, 0.95, 0.98, 0.99],
    "mu": [1, 3, 5, 10, 15, 20, 30],
    "n_labels": [5, 10, 15, 25, 100, 1000],
}
SWEEP_KEYS = {
    "delta": "disagreement_weight",
    "lambda": "ema_decay",
    "tau": "fixed_threshold",
    "mu": "unlabeled_data_ratio",
    "n_labels": "labels_per_class",
}


class TrainingDiverged(RuntimeError):
    def __init__(self, message, last_row=None):
        super().__init__(message)
        self.last_row = last_row


def build_data(cfg):
    """Dataset split and augmentation spec for ``cfg``."""
    seeds = cfg.resolved_seeds()
    weak = Channel(cfg.weak_replace_rate, 0.0, 0, 0.0, cfg.weak_noise_std)
    strong = Channel(cfg.strong_replace_rate, cfg.strong_dropout, cfg.strong_window,
                     cfg.strong_shuffle_rate, cfg.strong_noise_std)
    if cfg.task == "synthetic":
        spec = SyntheticTaskSpec(
            n_classes=cfg.n_classes, d_in=cfg.d_in, separation=cfg.separation,
            hard_classes=tuple(cfg.hard_classes), hard_separation=cfg.hard_separation,
            noise_std=cfg.noise_std, class_priors=cfg.class_priors,
            labels_per_class=cfg.labels_per_class,
            unlabeled_per_class=cfg.unlabeled_per_class,
            val_per_class=cfg.val_per_class,
            test_per_class=cfg.test_per_class if cfg.test_per_class is not None else 250,
            modes_per_class=cfg.modes_per_class, mode_spread=cfg.mode_spread)
        data = make_synthetic(spec, seeds["data"])
        aug = AugmentSpec(weak, strong, None, cfg.d_in).validate("synthetic")
        return data, aug
    raw = load_text_corpus(cfg.corpus_path, cfg.corpus_format, cfg.text_field,
                           cfg.label_field)
    if not cfg.synonyms_path:
        raise ConfigError("text task needs synonyms_path")
    syn = parse_synonym_file(cfg.synonyms_path)
    vocab, (tokens,), table = build_text_inputs([raw], syn)
    data = few_shot_split(tokens, raw.labels, raw.ids, len(raw.class_names),
                          cfg.labels_per_class, cfg.unlabeled_per_class,
                          cfg.val_per_class, seeds["data"], cfg.test_per_class,
                          raw.class_names)
    data.extras["vocab_size"] = len(vocab)
    aug = AugmentSpec(weak, strong, table, cfg.n_buckets).validate("text")
    return data, aug


def build_state(cfg, d_in, n_classes):
    seeds = cfg.resolved_seeds()

    def side(model_id, hidden, seed, stream):
        model = init([d_in, *hidden, n_classes], rng_stream(seed, stream),
                     cfg.activation, model_id)
        opt = Optimizer(cfg.optimizer, cfg.learning_rate, weight_decay=cfg.weight_decay)
        return ModelSide(model, opt, LearningStatus.initial(n_classes))

    f = side("F", cfg.hidden, seeds["model_f"], "model_f")
    g = None
    if not cfg.single_model:
        hidden_g = cfg.hidden if cfg.hidden_g is None else cfg.hidden_g
        g = side("G", hidden_g, seeds["model_g"], "model_g")
    return TrainState(f, g)


class EpochSampler:
    """Fixed-size batches drawn from successive random permutations."""

    def __init__(self, n, rng):
        if n < 1:
            raise ValueError("cannot sample from an empty split")
        self.n, self.rng = n, rng
        self.perm, self.pos = rng.permutation(n), 0

    def next(self, k):
        out = []
        while len(out) < k:
            if self.pos == self.n:
                self.perm, self.pos = self.rng.permutation(self.n), 0
            take = min(k - len(out), self.n - self.pos)
            out.extend(self.perm[self.pos:self.pos + take])
            self.pos += take
        return np.asarray(out, dtype=np.int64)


def _split_features(split, aug):
    return featurize(split.payload, aug.n_buckets)


def evaluate(state, X, y, n_classes):
    probs = [side.model.predict_proba(X) for side in state.sides]
    out = {}
    for side, p in zip(state.sides, probs):
        pred = np.argmax(p, axis=1)
        out[side.model.model_id.lower()] = {
            "accuracy": accuracy(y, pred), "macro_f1": macro_f1(y, pred, n_classes)}
    pred = np.argmax(np.mean(probs, axis=0), axis=1)
    out["ensemble"] = {"accuracy": accuracy(y, pred), "macro_f1": macro_f1(y, pred, n_classes)}
    return out


@dataclass
class RunResult:
    report: dict
    passed: np.ndarray = field(repr=False)    # (steps, models, C)
    correct: np.ndarray = field(repr=False)   # (steps, models, C)
    data: object = field(repr=False, default=None)
    state: object = field(repr=False, default=None)

    def window(self, frac=0.25):
        n = self.passed.shape[0]
        k = max(1, int(round(n * frac)))
        return slice(n - k, n)

    def class_counts_tail(self, frac=0.25):
        """Mean per-step passed count per class over the tail, summed over models."""
        return self.passed[self.window(frac)].sum(axis=1).mean(axis=0)

    def precision_tail(self, frac=0.25):
        w = self.window(frac)
        p = self.passed[w].sum()
        return float(self.correct[w].sum() / p) if p else float("nan")

    @property
    def test_accuracy(self):
        return self.report["test"]["ensemble"]["accuracy"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row_dict(row):
    return None if row is None else dict(zip(TELEMETRY_COLUMNS, row))


def train(cfg, out_dir=None, data=None, aug=None, progress=None):
    """Run training per ``cfg``; writes a run directory when ``out_dir`` is set."""
    cfg.validate()
    t0 = time.time()
    if data is None:
        data, aug = build_data(cfg)
    C = data.n_classes
    seeds = cfg.resolved_seeds()
    X_val = _split_features(data.validation, aug)
    X_test = _split_features(data.test, aug)
    d_in = X_val.shape[1]
    state = build_state(cfg, d_in, C)
    rngs = {name: rng_stream(seeds["augment"], name)
            for name in ("labeled_weak", "unlabeled_weak", "unlabeled_strong")}
    lab_sampler = EpochSampler(len(data.labeled), rng_stream(seeds["augment"], "sampling"))
    unl_sampler = EpochSampler(len(data.unlabeled),
                               rng_stream(seeds["augment"], "sampling_unlabeled"))
    B, uB = cfg.batch_size, cfg.batch_size * cfg.unlabeled_data_ratio
    n_models = len(state.sides)
    passed = np.zeros((cfg.steps, n_models, C), dtype=np.int64)
    correct = np.zeros((cfg.steps, n_models, C), dtype=np.int64)
    have_truth = data.hidden_labels is not None

    if out_dir:
        os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)
        with open(os.path.join(out_dir, "config.snapshot"), "w") as fh:
            fh.write(config_to_text(dataclasses.replace(
                cfg, seed_model_f=seeds["model_f"], seed_model_g=seeds["model_g"],
                seed_data=seeds["data"], seed_augment=seeds["augment"])))
        tele = open(os.path.join(out_dir, "telemetry.csv"), "w", newline="")
    else:
        tele = io.StringIO()
    writer = csv.writer(tele, lineterminator="\n")
    writer.writerow(TELEMETRY_COLUMNS)

    evals = [{"step": 0, "validation": evaluate(state, X_val, data.validation.labels, C)}]
    best = (evals[0]["validation"]["ensemble"]["accuracy"], 0,
            [s.model.copy() for s in state.sides])
    last_row = None
    try:
        for step in range(cfg.steps):
            li = lab_sampler.next(B)
            ui = unl_sampler.next(uB)
            try:
                state, res = train_step(state, data.labeled.take(li), data.labeled.labels[li],
                                        data.unlabeled.take(ui), cfg, aug, rngs)
            except NonFiniteLoss as exc:
                raise TrainingDiverged(str(exc), _row_dict(last_row)) from None
            truth = data.hidden_labels[ui] if have_truth else None
            for m, ms in enumerate(res.models):
                pl = ms.pseudo
                passed[step, m] = np.bincount(pl.hard_labels[pl.passed], minlength=C)
                if have_truth:
                    ok = pl.passed & (pl.hard_labels == truth)
                    correct[step, m] = np.bincount(pl.hard_labels[ok], minlength=C)
                for c in range(C):
                    last_row = [SCHEMA_VERSION, res.t, ms.model_id, c, int(passed[step, m, c]),
                                int(correct[step, m, c]) if have_truth else None,
                                float(ms.tau_local[c]), float(ms.p_tilde[c]),
                                float(ms.sup_loss), float(ms.unsup_loss), res.agreement_rate]
                    writer.writerow([_fmt(v) for v in last_row])
                if not (np.isfinite(ms.sup_loss) and np.isfinite(ms.unsup_loss)):
                    raise TrainingDiverged(
                        f"non-finite loss at step {res.t} (model {ms.model_id})",
                        _row_dict(last_row))
            if res.t % cfg.eval_every == 0 or res.t == cfg.steps:
                ev = evaluate(state, X_val, data.validation.labels, C)
                evals.append({"step": res.t, "validation": ev})
                if ev["ensemble"]["accuracy"] > best[0]:
                    best = (ev["ensemble"]["accuracy"], res.t,
                            [s.model.copy() for s in state.sides])
            if progress:
                progress(res)
    finally:
        tele.close()

    final_models = [s.model for s in state.sides]
    best_state = TrainState(*[ModelSide(m, None, None) for m in best[2]])
    test_best = evaluate(best_state, X_test, data.test.labels, C)
    test_final = evaluate(state, X_test, data.test.labels, C)
    if out_dir:
        for m in best[2]:
            save_checkpoint(m, os.path.join(out_dir, "checkpoints", f"best_{m.model_id}.json"))
        for m in final_models:
            save_checkpoint(m, os.path.join(out_dir, "checkpoints", f"final_{m.model_id}.json"))

    result = RunResult(None, passed, correct, data, state)
    tail = result.class_counts_tail() if cfg.steps else np.zeros(C)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(cfg),
        "seeds": seeds,
        "mode": cfg.mode_signature,
        "kernel_backend": _backend.BACKEND,
        "split_hash": data.split_hash(),
        "n_classes": C,
        "class_names": data.class_names,
        "evaluations": evals,
        "best_step": best[1],
        "test": test_best,
        "test_final": test_final,
        "pseudo_labels": {
            "has_truth": have_truth,
            "passed_total": passed.sum(axis=(0, 1)).tolist(),
            "correct_total": correct.sum(axis=(0, 1)).tolist() if have_truth else None,
            "tail_mean_passed_per_class": [float(x) for x in tail],
            "tail_cv": coefficient_of_variation(tail) if cfg.steps else None,
            "tail_precision": (result.precision_tail() if have_truth and cfg.steps
                               else None),
        },
        "wall_time_s": time.time() - t0,
    }
    result.report = report
    if out_dir:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    return result


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


ABLATION_ORDER = ["full", "no-adaptive", "no-cross", "no-disagree", "fixmatch"]


def ablate(cfg, out_dir=None, seeds=None):
    """Run the full model and each ablation with shared data and seeds.

    Returns ``{mode: [RunResult per seed]}``.
    """
    seeds = [cfg.seed] if seeds is None else list(seeds)
    results = {m: [] for m in ABLATION_ORDER}
    for s in seeds:
        base = dataclasses.replace(cfg, seed=s)
        data, aug = build_data(base)
        for mode in ABLATION_ORDER:
            run_cfg = base.with_mode(mode)
            sub = os.path.join(out_dir, f"{mode}_seed{s}") if out_dir else None
            results[mode].append(train(run_cfg, sub, data, aug))
    if out_dir:
        rows = ablation_table(results)
        with open(os.path.join(out_dir, "ablation.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            w.writerows([list(r.values()) for r in rows])
        with open(os.path.join(out_dir, "ablation.md"), "w") as fh:
            fh.write(markdown_table(rows))
    return results


def ablation_table(results):
    rows = []
    for mode in ABLATION_ORDER:
        runs = results[mode]
        acc = mean_std([r.test_accuracy for r in runs])
        f1 = mean_std([r.report["test"]["ensemble"]["macro_f1"] for r in runs])
        rows.append({"method": MODE_LABELS[mode], "mode": mode, "runs": len(runs),
                     "accuracy_mean": acc[0], "accuracy_std": acc[1],
                     "macro_f1_mean": f1[0], "macro_f1_std": f1[1],
                     "split_hash": runs[0].report["split_hash"] if runs else ""})
    return rows


def sweep(param, values, cfg, seeds=None, out_dir=None, mode=None):
    """One run per (value, seed); returns ``(results, aggregate_rows)``."""
    if param not in SWEEP_KEYS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from "
                          f"{', '.join(SWEEP_KEYS)}")
    key = SWEEP_KEYS[param]
    if mode:
        cfg = cfg.with_mode(mode)
    seeds = list(range(cfg.seed, cfg.seed + 5)) if seeds is None else list(seeds)
    ftype = type(getattr(cfg, key))
    results, rows = {}, []
    for v in values:
        v = ftype(v)
        point = dataclasses.replace(cfg, **{key: v})
        if param == "n_labels":
            # keep the pool large enough for the labeled draw
            point = dataclasses.replace(point, unlabeled_per_class=max(
                point.unlabeled_per_class, v))
        runs = []
        for s in seeds:
            run_cfg = dataclasses.replace(point, seed=s)
            sub = os.path.join(out_dir, f"{param}={v}_seed{s}") if out_dir else None
            runs.append(train(run_cfg, sub))
        results[v] = runs
        acc = mean_std([r.test_accuracy for r in runs])
        f1 = mean_std([r.report["test"]["ensemble"]["macro_f1"] for r in runs])
        rows.append({"param": param, "value": v, "runs": len(runs),
                     "accuracy_mean": acc[0], "accuracy_std": acc[1],
                     "macro_f1_mean": f1[0], "macro_f1_std": f1[1]})
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            w.writerows([[_fmt(x) for x in r.values()] for r in rows])
    return results, rows


def markdown_table(rows):
    if not rows:
        return ""
    cols = list(rows[0])
    out = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        cells = [f"{v:.4f}" if isinstance(v, float) else str(v) for v in r.values()]
        out.append("| " + " | ".join(cells) + " |")
    return "\n".join(out) + "\n"


def load_run(run_dir):
    with open(os.path.join(run_dir, "report.json")) as fh:
        report = json.load(fh)
    if report.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {report.get('schema_version')}")
    return report


def report(run_dirs, out_dir=None):
    """Summarize run directories into markdown plus CSV files.

    Runs are grouped by mode signature.  Per-step pseudo-label series
    (counts per class; precision when ground truth was recorded) are
    written as ``series_<run>.csv``.  Returns ``(markdown, rows, skipped)``.
    """
    rows, skipped, series = [], [], {}
    for d in run_dirs:
        try:
            rep = load_run(d)
        except (OSError, ValueError, KeyError) as exc:
            log.warning("skipping %s: %s", d, exc)
            skipped.append((d, str(exc)))
            continue
        t = rep["test"]["ensemble"]
        rows.append({"run": os.path.basename(os.path.normpath(d)), "mode": rep["mode"],
                     "seed": rep["seeds"]["model_f"], "accuracy": t["accuracy"],
                     "macro_f1": t["macro_f1"],
                     "tail_precision": rep["pseudo_labels"]["tail_precision"]})
        tpath = os.path.join(d, "telemetry.csv")
        if os.path.exists(tpath):
            series[rows[-1]["run"]] = _series(tpath, rep)
    groups = {}
    for r in rows:
        groups.setdefault(r["mode"], []).append(r)
    grouped = []
    for mode, rs in groups.items():
        acc = mean_std([r["accuracy"] for r in rs])
        f1 = mean_std([r["macro_f1"] for r in rs])
        grouped.append({"mode": mode, "runs": len(rs), "accuracy_mean": acc[0],
                        "accuracy_std": acc[1], "macro_f1_mean": f1[0],
                        "macro_f1_std": f1[1]})
    md = "## Runs\n\n" + markdown_table(rows) + "\n## By mode\n\n" + markdown_table(grouped)
    if skipped:
        md += "\n## Skipped\n\n" + "".join(f"- {d}: {why}\n" for d, why in skipped)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.md"), "w") as fh:
            fh.write(md)
        for name, rs in (("runs.csv", rows), ("by_mode.csv", grouped)):
            if rs:
                with open(os.path.join(out_dir, name), "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(list(rs[0]))
                    w.writerows([[_fmt(v) for v in r.values()] for r in rs])
        for run, (header, srows) in series.items():
            with open(os.path.join(out_dir, f"series_{run}.csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(srows)
    return md, rows, skipped


def _series(tpath, rep):
    """Per-step pseudo-label counts per class (models summed) and precision."""
    C = rep["n_classes"]
    counts, correct, has_truth = {}, {}, rep["pseudo_labels"]["has_truth"]
    with open(tpath, newline="") as fh:
        for row in csv.DictReader(fh):
            t = int(row["step"])
            counts.setdefault(t, [0] * C)[int(row["class"])] += int(row["passed_count"])
            if has_truth and row["correct_count"] != "":
                correct.setdefault(t, [0] * C)[int(row["class"])] += int(row["correct_count"])
    header = ["step"] + [f"passed_{c}" for c in range(C)] + ["passed_total"]
    if has_truth:
        header.append("precision")
    out = []
    for t in sorted(counts):
        tot = sum(counts[t])
        r = [t, *counts[t], tot]
        if has_truth:
            r.append(repr(sum(correct.get(t, [0])) / tot) if tot else "")
        out.append(r)
    return header, out


__all__ = ["train", "ablate", "sweep", "report", "build_data", "build_state",
           "evaluate", "RunResult", "TrainingDiverged", "STANDARD_GRIDS", "MODES"]
