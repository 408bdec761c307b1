"""Batch command-line front end.

Subcommands wire the library into the full workflow: gen-scene, gen-dataset,
train, eval-classifier, position, report. Every command is deterministic given
its configuration; randomness always flows from an explicit seed, never from
the wall clock. Options may come from a flat key=value config file (--config),
with command-line flags taking precedence.

Data goes to files and standard output; diagnostics go to standard error.
Exit status is 0 iff the command succeeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import channel, classifier, evaluation, positioning, raytracer, scenes
from .errors import ConfigError, DataError, Error


def load_config(path) -> dict[str, str]:
    """Flat key=value file; '#' starts a comment; keys use _ or - freely."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


class Resolver:
    """Option lookup: command-line flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace, config: dict[str, str]):
        self.args = args
        self.config = config

    def get(self, name: str, typ=str, default=None, required: bool = False):
        v = getattr(self.args, name, None)
        if v is None and name in self.config:
            raw = self.config[name]
            v = _parse_bool(raw) if typ is bool else typ(raw)
        if v is None:
            v = default
        if v is None and required:
            raise ConfigError(f"missing required option '{name.replace('_', '-')}'")
        return v


# ---------------------------------------------------------------------------
# gen-scene
# ---------------------------------------------------------------------------

def cmd_gen_scene(r: Resolver) -> int:
    kind = r.get("kind", str, required=True)
    common = dict(
        spacing=r.get("spacing", float, 250.0),
        lateral=r.get("lateral", float, 4.0),
        wall_loss_db=r.get("wall_loss_db", float, 6.0),
        gnb_height=r.get("gnb_height", float, 0.0),
    )
    if kind == "corridor":
        bundle = scenes.corridor(
            length=r.get("length", float, 500.0),
            width=r.get("width", float, 20.0),
            margin=r.get("margin", float, 50.0),
            **common,
        )
    elif kind == "grid":
        bundle = scenes.grid(
            blocks_x=r.get("blocks_x", int, 2),
            blocks_y=r.get("blocks_y", int, 2),
            block=r.get("block", float, 40.0),
            street=r.get("street", float, 20.0),
            **common,
        )
    elif kind == "manhattan-block":
        bundle = scenes.manhattan_block(
            block=r.get("block", float, 60.0),
            street=r.get("street", float, 20.0),
            **common,
        )
    else:
        raise ConfigError(f"unknown scene kind {kind!r}; choose from {scenes.SCENE_KINDS}")

    scene_out = r.get("scene_out", str, required=True)
    raytracer.save_scene(bundle.scene, scene_out)
    print(f"wrote {scene_out}: {len(bundle.scene.walls)} walls, "
          f"{len(bundle.scene.gnbs)} gnbs", file=sys.stderr)

    traj_out = r.get("trajectory_out", str)
    if traj_out:
        traj = scenes.sample_trajectory(
            bundle,
            epochs=r.get("epochs", int, 500),
            z=r.get("ue_height", float, 0.0),
            dt=r.get("dt", float, 1.0),
        )
        channel.write_trajectory_csv(traj, traj_out)
        print(f"wrote {traj_out}: {len(traj)} epochs", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# gen-dataset
# ---------------------------------------------------------------------------

def _noise_from(r: Resolver) -> channel.NoiseModel:
    return channel.NoiseModel(
        sigma_range=r.get("noise_sigma_range", float, 0.10),
        sigma_angle=r.get("noise_sigma_angle", float, 1.0),
        sigma_rss=r.get("noise_sigma_rss", float, 1.0),
        seed=r.get("seed", int, required=True),
    )


def _radio_from(r: Resolver) -> channel.RadioConfig:
    return channel.RadioConfig(
        carrier_hz=r.get("carrier_hz", float, 28e9),
        bandwidth_hz=r.get("bandwidth_hz", float, 400e6),
        tx_power_dbm=r.get("tx_power_dbm", float, 30.0),
    )


def cmd_gen_dataset(r: Resolver) -> int:
    scene = raytracer.load_scene(r.get("scene", str, required=True))
    trajectory = channel.read_trajectory_csv(r.get("trajectory", str, required=True))
    out = r.get("out", str, required=True)
    with_truth = not r.get("no_truth", bool, False)
    ds = channel.generate_dataset(
        scene, trajectory,
        radio=_radio_from(r),
        noise=_noise_from(r),
        max_order=r.get("max_order", int, 3),
        with_truth=with_truth,
    )
    channel.write_dataset_csv(ds.measurements, out, with_truth=with_truth)
    hist: dict[int, int] = {}
    for m in ds.measurements:
        hist[m.label] = hist.get(m.label, 0) + 1
    hist_s = ",".join(f"{k}:{hist[k]}" for k in sorted(hist))
    print(f"wrote {out}: rows={len(ds.measurements)} labels=[{hist_s}] "
          f"outage_pairs={len(ds.outages)}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# train / eval-classifier
# ---------------------------------------------------------------------------

def _params_from(r: Resolver) -> classifier.TreeParams:
    return classifier.TreeParams(
        max_depth=r.get("max_depth", int, 20),
        min_leaf_size=r.get("min_leaf_size", int, 5),
    )


def cmd_train(r: Resolver) -> int:
    rows = channel.read_dataset_csv(r.get("dataset", str, required=True))
    X = classifier.feature_matrix(rows)
    y = classifier.label_vector(rows)
    seed = r.get("seed", int, required=True)
    n_trees = r.get("n_trees", int, 14)
    params = _params_from(r)
    n_classes = int(y.max()) + 1

    (Xtr, ytr), (Xva, yva), (Xte, yte) = classifier.split_dataset(X, y, seed=seed)
    ens = classifier.train_bagged(Xtr, ytr, n_trees=n_trees, params=params,
                                  master_seed=seed, n_classes=n_classes)
    val_acc = classifier.accuracy_score(ens, Xva, yva)
    test_acc = classifier.accuracy_score(ens, Xte, yte)

    print(f"rows={len(y)} n_classes={n_classes}")
    print(f"split train={len(ytr)} val={len(yva)} test={len(yte)}")
    print(f"params n_trees={n_trees} max_depth={params.max_depth} "
          f"min_leaf_size={params.min_leaf_size} seed={seed}")
    print(f"validation_accuracy={val_acc:.6f}")
    print(f"test_accuracy={test_acc:.6f}")

    cv_k = r.get("cv_k", int, 5)
    if cv_k > 0:
        accs = classifier.cross_validate(Xtr, ytr, k=cv_k, n_trees=n_trees,
                                         params=params, seed=seed, n_classes=n_classes)
        print("cv_accuracies=" + ",".join(f"{a:.6f}" for a in accs))
        print(f"cv_mean={accs.mean():.6f} cv_std={accs.std():.6f}")

    cm = classifier.confusion(ens, Xva, yva)
    print("confusion_validation:")
    print(cm.format())

    model_out = r.get("model_out", str, required=True)
    classifier.save_ensemble(ens, model_out)
    print(f"wrote {model_out}", file=sys.stderr)
    return 0


def cmd_eval_classifier(r: Resolver) -> int:
    ens = classifier.load_ensemble(r.get("model", str, required=True))
    rows = channel.read_dataset_csv(r.get("dataset", str, required=True))
    X = classifier.feature_matrix(rows)
    y = classifier.label_vector(rows)
    cm = classifier.confusion(ens, X, y)
    print(f"rows={len(y)}")
    print(f"accuracy={cm.accuracy:.6f}")
    print("confusion:")
    print(cm.format())
    return 0


# ---------------------------------------------------------------------------
# position / report
# ---------------------------------------------------------------------------

FIXES_HEADER = "t,gnb_id,method,x_est,y_est,x_true,y_true,err_m"


def _write_fixes_csv(path, rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(FIXES_HEADER + "\n")
        for t, gnb_id, method, est, true_p, err in rows:
            f.write(f"{t!r},{gnb_id},{method},{est.x!r},{est.y!r},"
                    f"{true_p.x!r},{true_p.y!r},{err!r}\n")


def cmd_position(r: Resolver) -> int:
    ens = classifier.load_ensemble(r.get("model", str, required=True))
    scene = raytracer.load_scene(r.get("scene", str, required=True))
    rows = channel.read_dataset_csv(r.get("dataset", str, required=True))
    if any(m.truth is None for m in rows):
        raise DataError("positioning requires a dataset with truth columns")
    out_dir = Path(r.get("out_dir", str, required=True))
    out_dir.mkdir(parents=True, exist_ok=True)
    ue_height = r.get("ue_height", float, 0.0)
    mode_sel = r.get("mode", str, "both")
    if mode_sel not in ("both", "sbr", "los"):
        raise ConfigError(f"mode must be one of both|sbr|los, got {mode_sel!r}")
    modes = []
    if mode_sel in ("both", "los"):
        modes.append(("los", positioning.PipelineMode.LOS_PREFERRED, "LoS"))
    if mode_sel in ("both", "sbr"):
        modes.append(("sbr", positioning.PipelineMode.SBR_ONLY, "SBR"))
    with_baselines = r.get("with_baselines", bool, False)
    threshold_db = r.get("threshold_db", float, 10.0)

    epochs: dict[float, list[channel.Measurement]] = {}
    for m in rows:
        epochs.setdefault(m.t, []).append(m)
    n_ranks = min(2, len(scene.gnbs))

    fixes: dict[tuple, list[tuple]] = {}
    outages: dict[tuple, int] = {}
    base_fixes: dict[tuple, list[tuple]] = {}
    for t in sorted(epochs):
        ms = epochs[t]
        ue = ms[0].truth.ue
        ranked = channel.associated_gnbs(scene, ue, n_ranks)
        for rank, gnb in enumerate(ranked, start=1):
            epoch_ms = [m for m in ms if m.gnb_id == gnb.id]
            for tag, mode, _label in modes:
                key = (rank, tag)
                fixes.setdefault(key, [])
                outages.setdefault(key, 0)
                if not epoch_ms:
                    outages[key] += 1
                    continue
                result = positioning.pipeline_step(epoch_ms, ens, gnb, mode, ue_height)
                if isinstance(result, positioning.Outage):
                    outages[key] += 1
                    continue
                err = result.p.distance_to(ue)
                fixes[key].append((t, gnb.id, result.method.value, result.p, ue, err))
            if with_baselines and epoch_ms:
                for tag, fn in (
                    ("top2", lambda mm: positioning.strongest_two_position(mm, gnb.position)),
                    ("rssthr", lambda mm: positioning.strongest_two_position(
                        classifier.baseline_rss_filter(mm, threshold_db), gnb.position)),
                ):
                    key = (rank, tag)
                    base_fixes.setdefault(key, [])
                    try:
                        p = fn(epoch_ms)
                    except Error:
                        continue
                    base_fixes[key].append((t, gnb.id, tag, p, ue, p.distance_to(ue)))

    n_epochs = len(epochs)
    columns: dict[str, evaluation.ErrorStats] = {}
    columns_nofb: dict[str, evaluation.ErrorStats] = {}
    avail_lines = []
    for (rank, tag), rows_k in sorted(fixes.items()):
        label = f"gNB{rank}-{'LoS' if tag == 'los' else 'SBR'}"
        _write_fixes_csv(out_dir / f"fixes_gnb{rank}_{tag}.csv", rows_k)
        if rows_k:
            errs = [row[5] for row in rows_k]
            columns[label] = evaluation.error_stats(errs)
            (out_dir / f"cdf_gnb{rank}_{tag}.csv").write_text(
                evaluation.cdf_csv(errs), encoding="utf-8")
            keep = [row[5] for row in rows_k if row[2] != positioning.FixMethod.FALLBACK.value]
            if keep:
                columns_nofb[label] = evaluation.error_stats(keep)
        pct = 100.0 * len(rows_k) / n_epochs if n_epochs else 0.0
        avail_lines.append(f"availability {label}: fixes={len(rows_k)}/{n_epochs} "
                           f"({pct:.2f}%), outages={outages[(rank, tag)]}")
    for (rank, tag), rows_k in sorted(base_fixes.items()):
        label = f"gNB{rank}-{tag}"
        _write_fixes_csv(out_dir / f"fixes_gnb{rank}_{tag}.csv", rows_k)
        if rows_k:
            columns[label] = evaluation.error_stats([row[5] for row in rows_k])

    report_lines = ["positioning error statistics (all fixes)",
                    evaluation.format_stats_table(columns)]
    if columns_nofb:
        report_lines += ["", "positioning error statistics (excluding fallback fixes)",
                         evaluation.format_stats_table(columns_nofb)]
    report_lines += [""] + avail_lines
    report = "\n".join(report_lines) + "\n"
    (out_dir / "report.txt").write_text(report, encoding="utf-8")
    (out_dir / "stats.csv").write_text(evaluation.stats_csv(columns), encoding="utf-8")
    print(report, end="")
    return 0


def _read_fixes_errors(path) -> tuple[list[float], list[str]]:
    errors: list[float] = []
    methods: list[str] = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != FIXES_HEADER:
            raise DataError(f"fixes header must be {FIXES_HEADER}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                errors.append(float(parts[7]))
                methods.append(parts[2])
            except (IndexError, ValueError) as e:
                raise DataError(f"fixes line {lineno}: {e}") from e
    if not errors:
        raise DataError(f"no fixes in {path}")
    return errors, methods


def cmd_report(r: Resolver) -> int:
    fixes_path = r.get("fixes", str, required=True)
    errors, _ = _read_fixes_errors(fixes_path)
    stats = evaluation.error_stats(errors)
    compare_path = r.get("compare", str)
    if compare_path:
        other, _ = _read_fixes_errors(compare_path)
        cmp = evaluation.compare_runs(stats, evaluation.error_stats(other),
                                      label_a=Path(fixes_path).stem,
                                      label_b=Path(compare_path).stem)
        print(cmp.text)
    else:
        print(evaluation.format_stats_table({Path(fixes_path).stem: stats}))
    cdf_out = r.get("cdf_out", str)
    if cdf_out:
        Path(cdf_out).write_text(evaluation.cdf_csv(errors), encoding="utf-8")
        print(f"wrote {cdf_out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="master random seed (required where randomness is used)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mploc",
                                 description="multipath simulation, reflection-order "
                                             "classification, and positioning toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="write a built-in scene (and optional trajectory)")
    _add_common(p)
    p.add_argument("--kind", choices=scenes.SCENE_KINDS)
    p.add_argument("--length", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--blocks-x", dest="blocks_x", type=int)
    p.add_argument("--blocks-y", dest="blocks_y", type=int)
    p.add_argument("--block", type=float)
    p.add_argument("--street", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--lateral", type=float)
    p.add_argument("--wall-loss-db", dest="wall_loss_db", type=float)
    p.add_argument("--gnb-height", dest="gnb_height", type=float)
    p.add_argument("--scene-out", dest="scene_out")
    p.add_argument("--trajectory-out", dest="trajectory_out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--ue-height", dest="ue_height", type=float)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("gen-dataset", help="trace a trajectory and write labeled observations")
    _add_common(p)
    p.add_argument("--scene")
    p.add_argument("--trajectory")
    p.add_argument("--out")
    p.add_argument("--max-order", dest="max_order", type=int)
    p.add_argument("--noise-sigma-range", dest="noise_sigma_range", type=float)
    p.add_argument("--noise-sigma-angle", dest="noise_sigma_angle", type=float)
    p.add_argument("--noise-sigma-rss", dest="noise_sigma_rss", type=float)
    p.add_argument("--carrier-hz", dest="carrier_hz", type=float)
    p.add_argument("--bandwidth-hz", dest="bandwidth_hz", type=float)
    p.add_argument("--tx-power-dbm", dest="tx_power_dbm", type=float)
    p.add_argument("--no-truth", dest="no_truth", action="store_const", const=True)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train the bagged tree ensemble and write a model file")
    _add_common(p)
    p.add_argument("--dataset")
    p.add_argument("--model-out", dest="model_out")
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--min-leaf-size", dest="min_leaf_size", type=int)
    p.add_argument("--cv-k", dest="cv_k", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-classifier", help="score a saved model on a labeled dataset")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_eval_classifier)

    p = sub.add_parser("position", help="run the per-epoch positioning pipeline")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--scene")
    p.add_argument("--dataset")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--mode", choices=["both", "sbr", "los"])
    p.add_argument("--ue-height", dest="ue_height", type=float)
    p.add_argument("--with-baselines", dest="with_baselines", action="store_const", const=True)
    p.add_argument("--threshold-db", dest="threshold_db", type=float)
    p.set_defaults(func=cmd_position)

    p = sub.add_parser("report", help="summarize a fixes file (optionally compare two)")
    _add_common(p)
    p.add_argument("--fixes")
    p.add_argument("--compare")
    p.add_argument("--cdf-out", dest="cdf_out")
    p.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else {}
        return args.func(Resolver(args, config))
    except Error as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
