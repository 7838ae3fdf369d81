"""Command-line entry point.

Subcommands: ``synth`` writes a synthetic bundle tree, ``score`` runs the
transferability estimator over per-model bundle directories, ``baseline``
runs one of the reference estimators, ``eval`` correlates score files with
a performance table, ``validate`` checks bundle files.

Multi-model commands print one JSON object per line on stdout and, with
--out, additionally write one JSON file per model. Output files are written
atomically (temp file + rename). Exit codes: 0 success, 2 usage/IO/format
errors, 3 estimator-domain errors.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .baselines import assemble_baseline_set, gbc, leep, logme, transrate
from .errors import EstimatorError, FormatError
from .interchange import (
    CaseBundle,
    read_case_bundle,
    read_performance_table,
    validate_bundle,
    write_case_bundle,
    write_performance_table,
)
from .ranking import evaluate
from .sampling import SamplingConfig
from .scoring import ScoreConfig, score_model
from .synth import SynthSpec, generate_bank

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ESTIMATOR = 3

METRIC_FLAG_TO_NAME = {"w2": "w2", "kl": "kl", "bha": "bhattacharyya"}

# One flat key space shared by the config file and the tuning flags; a flag
# given on the command line always wins over the file.
_CONFIG_CASTS: dict[str, Callable[[str], object]] = {
    "seed": int,
    "metric": str,
    "scales": str,
    "rate": float,
    "per_class_max": int,
    "per_class_min": int,
    "global_base": int,
    "global_min": int,
    "pair_budget": int,
    "hse_s": float,
    "eps_floor": float,
    "transrate_eps": float,
    "gbc_shrinkage": float,
    "n_models": int,
    "n_cases": int,
    "n_classes": int,
    "channels": str,
    "noise_sigma": float,
    "out": str,
    "perf": str,
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    sampling: SamplingConfig
    scoring: ScoreConfig
    transrate_eps: float
    gbc_shrinkage: float


def _load_config_file(path: str) -> dict[str, object]:
    values: dict[str, object] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip().strip("\"'")
        cast = _CONFIG_CASTS.get(key)
        if cast is None:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = cast(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _setting(args: argparse.Namespace, filecfg: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in filecfg:
        return filecfg[key]
    return default


def _parse_scales(text: str) -> tuple[int, ...] | None:
    if text == "all":
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--scales expects 'all' or comma-separated integers: {exc}")


def _run_config(args: argparse.Namespace) -> RunConfig:
    filecfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    metric_flag = _setting(args, filecfg, "metric", "w2")
    metric = METRIC_FLAG_TO_NAME.get(metric_flag)
    if metric is None:
        raise UsageError(
            f"--metric must be one of {sorted(METRIC_FLAG_TO_NAME)}, got {metric_flag!r}"
        )
    sampling = SamplingConfig(
        rate=_setting(args, filecfg, "rate", 0.05),
        per_class_min=_setting(args, filecfg, "per_class_min", 10),
        per_class_max=_setting(args, filecfg, "per_class_max", 500),
        global_base=_setting(args, filecfg, "global_base", 300),
        global_min=_setting(args, filecfg, "global_min", 32),
        seed=_setting(args, filecfg, "seed", 42),
    )
    scoring = ScoreConfig(
        distance_metric=metric,
        pair_budget=_setting(args, filecfg, "pair_budget", 2016),
        hse_exponent=_setting(args, filecfg, "hse_s", 1.0),
        scales_used=_parse_scales(_setting(args, filecfg, "scales", "all")),
        epsilon_floor=_setting(args, filecfg, "eps_floor", 1e-12),
        seed=_setting(args, filecfg, "seed", 42),
    )
    return RunConfig(
        sampling=sampling,
        scoring=scoring,
        transrate_eps=_setting(args, filecfg, "transrate_eps", 1e-4),
        gbc_shrinkage=_setting(args, filecfg, "gbc_shrinkage", 1e-6),
    )


def _write_atomic_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_atomic_text(path: Path, text: str) -> None:
    _write_atomic_bytes(path, text.encode("utf-8"))


def _load_model_dir(path: str) -> tuple[str, list[CaseBundle]]:
    model_dir = Path(path)
    if not model_dir.is_dir():
        raise UsageError(f"not a directory: {path}")
    files = sorted(model_dir.glob("*.xfb"))
    if not files:
        raise UsageError(f"no .xfb bundles in {path}")
    bundles = []
    for f in files:
        try:
            bundles.append(read_case_bundle(f.read_bytes()))
        except FormatError as exc:
            raise FormatError(f"{f}: {exc}") from exc
    return model_dir.name, bundles


def _load_models(paths: Sequence[str]) -> list[tuple[str, list[CaseBundle]]]:
    loaded = [_load_model_dir(p) for p in paths]
    names = [name for name, _ in loaded]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise UsageError(f"duplicate model directory names: {dup}")
    return loaded


def _emit_model_json(obj: dict, out_dir: str | None) -> None:
    line = json.dumps(obj, sort_keys=False)
    print(line)
    if out_dir:
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        _write_atomic_text(directory / f"{obj['model_id']}.json", line + "\n")


def cmd_score(args: argparse.Namespace) -> int:
    config = _run_config(args)
    for model_id, bundles in _load_models(args.models):
        score = score_model(model_id, bundles, config.scoring)
        _emit_model_json(score.as_dict(), args.out)
    return EXIT_OK


def _baseline_scale_index(config: RunConfig) -> int:
    scales = config.scoring.scales_used
    if scales is None:
        return 1
    if len(scales) != 1:
        raise UsageError("baseline estimators use a single scale; pass --scales N")
    return scales[0]


def cmd_baseline(args: argparse.Namespace) -> int:
    config = _run_config(args)
    scale_index = _baseline_scale_index(config)
    for model_id, bundles in _load_models(args.models):
        data = assemble_baseline_set(bundles, scale_index=scale_index)
        if args.estimator == "leep":
            value = leep(data)
        elif args.estimator == "logme":
            value = logme(data)
        elif args.estimator == "gbc":
            value = gbc(data, shrinkage=config.gbc_shrinkage)
        else:
            value = transrate(data, eps=config.transrate_eps)
        _emit_model_json(
            {
                "model_id": model_id,
                "estimator": args.estimator,
                "transferability": value,
            },
            args.out,
        )
    return EXIT_OK


def _read_estimates(path: str) -> dict[str, float]:
    source = Path(path)
    if source.is_dir():
        files = sorted(source.glob("*.json"))
        if not files:
            raise UsageError(f"no .json score files in {path}")
        lines = [f.read_text(encoding="utf-8") for f in files]
    else:
        lines = [ln for ln in source.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise UsageError(f"no score objects in {path}")
    estimates: dict[str, float] = {}
    for chunk in lines:
        try:
            obj = json.loads(chunk)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad score JSON: {exc}") from exc
        if not isinstance(obj, dict) or "model_id" not in obj or "transferability" not in obj:
            raise FormatError(
                f"{path}: score objects need model_id and transferability fields"
            )
        model_id = obj["model_id"]
        if model_id in estimates:
            raise FormatError(f"{path}: duplicate scores for model {model_id!r}")
        estimates[model_id] = float(obj["transferability"])
    return estimates


def cmd_eval(args: argparse.Namespace) -> int:
    estimates = _read_estimates(args.scores)
    with open(args.perf, "r", encoding="utf-8", newline="") as fh:
        records = read_performance_table(fh)
    table = {r.model_id: r.dice for r in records}
    missing = sorted(set(estimates) - set(table))
    if missing:
        raise UsageError(f"models missing from performance table: {missing}")
    performances = {m: table[m] for m in estimates}
    report = evaluate(estimates, performances)
    text = json.dumps(report.as_dict())
    print(text)
    if args.out:
        out_path = Path(args.out)
        if out_path.parent != Path(""):
            out_path.parent.mkdir(parents=True, exist_ok=True)
        _write_atomic_text(out_path, text + "\n")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    filecfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    n_models = _setting(args, filecfg, "n_models", 6)
    channels_text = _setting(args, filecfg, "channels", "16,32")
    try:
        channels = tuple(int(c) for c in str(channels_text).split(","))
    except ValueError as exc:
        raise UsageError(f"--channels expects comma-separated integers: {exc}")
    quality = {f"model_{i:02d}": i / max(n_models - 1, 1) for i in range(n_models)}
    try:
        spec = SynthSpec(
            n_models=n_models,
            n_cases=_setting(args, filecfg, "n_cases", 8),
            n_classes=_setting(args, filecfg, "n_classes", 2),
            channels_per_scale=channels,
            quality=quality,
            noise_sigma=_setting(args, filecfg, "noise_sigma", 0.05),
            seed=_setting(args, filecfg, "seed", 42),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    bank, performance = generate_bank(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for model_id, bundles in bank.items():
        model_dir = out / model_id
        model_dir.mkdir(parents=True, exist_ok=True)
        for bundle in bundles:
            buf = io.BytesIO()
            write_case_bundle(bundle, buf)
            _write_atomic_bytes(model_dir / f"{bundle.case_id}.xfb", buf.getvalue())
    buf = io.StringIO()
    write_performance_table(performance, buf)
    _write_atomic_text(out / "performance.csv", buf.getvalue())
    return EXIT_OK


def _iter_bundle_files(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            found = sorted(path.rglob("*.xfb"))
            if not found:
                raise UsageError(f"no .xfb bundles under {p}")
            files.extend(found)
        elif path.is_file():
            files.append(path)
        else:
            raise UsageError(f"no such file or directory: {p}")
    return files


def cmd_validate(args: argparse.Namespace) -> int:
    problems = 0
    for path in _iter_bundle_files(args.paths):
        try:
            bundle = read_case_bundle(path.read_bytes())
        except (FormatError, OSError) as exc:
            print(f"{path}: error: {exc}")
            problems += 1
            continue
        diags = validate_bundle(bundle)
        if diags:
            problems += 1
            for d in diags:
                print(f"{path}: {d.code} at {d.location}: {d.message}")
        else:
            print(f"{path}: ok")
    return EXIT_USAGE if problems else EXIT_OK


def _add_tuning_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value settings file; flags override it")
    parser.add_argument("--seed", type=int, help="base seed for all derived streams")
    parser.add_argument(
        "--metric", choices=sorted(METRIC_FLAG_TO_NAME), help="class-distance metric"
    )
    parser.add_argument("--scales", help="'all' or comma-separated 1-based indices")
    parser.add_argument("--rate", type=float, help="per-class sampling rate")
    parser.add_argument("--per-class-max", type=int, dest="per_class_max")
    parser.add_argument("--per-class-min", type=int, dest="per_class_min")
    parser.add_argument("--global-base", type=int, dest="global_base")
    parser.add_argument("--global-min", type=int, dest="global_min")
    parser.add_argument("--pair-budget", type=int, dest="pair_budget")
    parser.add_argument(
        "--hse-s", type=float, dest="hse_s", help="hyperspherical energy exponent"
    )
    parser.add_argument("--eps-floor", type=float, dest="eps_floor")
    parser.add_argument("--transrate-eps", type=float, dest="transrate_eps")
    parser.add_argument("--gbc-shrinkage", type=float, dest="gbc_shrinkage")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xferfv",
        description="Transferability scoring for pre-trained segmentation models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score models from bundle directories")
    p_score.add_argument("--models", nargs="+", required=True, metavar="DIR")
    p_score.add_argument("--out", help="directory for per-model JSON files")
    _add_tuning_flags(p_score)
    p_score.set_defaults(func=cmd_score)

    p_base = sub.add_parser("baseline", help="run a reference estimator")
    p_base.add_argument("estimator", choices=["leep", "logme", "gbc", "transrate"])
    p_base.add_argument("--models", nargs="+", required=True, metavar="DIR")
    p_base.add_argument("--out", help="directory for per-model JSON files")
    _add_tuning_flags(p_base)
    p_base.set_defaults(func=cmd_baseline)

    p_eval = sub.add_parser("eval", help="correlate scores with performance")
    p_eval.add_argument(
        "--scores", required=True, help="score-file directory, JSONL file, or JSON file"
    )
    p_eval.add_argument("--perf", required=True, help="performance CSV (model_id,dice)")
    p_eval.add_argument("--out", help="path for the report JSON")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="write a synthetic bundle bank")
    p_synth.add_argument("--out", required=True, help="bank output directory")
    p_synth.add_argument("--n-models", type=int, dest="n_models")
    p_synth.add_argument("--n-cases", type=int, dest="n_cases")
    p_synth.add_argument("--n-classes", type=int, dest="n_classes")
    p_synth.add_argument("--channels", help="comma-separated channels per scale")
    p_synth.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p_synth.add_argument("--config", help="key = value settings file; flags override it")
    p_synth.add_argument("--seed", type=int)
    p_synth.set_defaults(func=cmd_synth)

    p_val = sub.add_parser("validate", help="check bundle files")
    p_val.add_argument("paths", nargs="+", help=".xfb files or directories")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EstimatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
