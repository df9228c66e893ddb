"""Command-line front end: synth, extract, train, store-add, classify and the benchmarks."""

import argparse
import logging
import os
import sys
from typing import Any, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError
from tabulate import tabulate

from amc_config import CONFIG_KEYS, MissAction, Settings, load_settings
from amc_errors import EXIT_ARGUMENT, EXIT_DATA, EXIT_OK, AmcError, ConfigurationError
from amc_evaluation import accuracy_frame, accuracy_table, run_accuracy_benchmark, run_timing_benchmark
from amc_featstore import (
    FeatureStore,
    MatchPolicy,
    OutcomeKind,
    classify_pipeline,
    default_tolerances,
    ingest_dataset,
    load,
    persist,
    store_summary,
)
from amc_features import extract_batch
from amc_io import (
    RunManifest,
    dataset_from_frame,
    features_frame,
    read_dataset,
    read_manifest,
    read_waveform_inputs,
    waveform_filename,
    write_arff,
    write_features_csv,
    write_manifest,
    write_waveforms,
)
from amc_svm import KernelSpec, load_model, save_model, train_multiclass, training_summary
from amc_synthesis import SCHEMES, SchemeLabel, realize_batch

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = "amc.log"
DEFAULT_TIMING_COUNTS = "100,1000,10000,100000"

# (flag, config key, type); None defaults so only given flags override the config file
OVERRIDE_FLAGS = [
    ("--sample-rate", "sample_rate", float),
    ("--carrier", "carrier", float),
    ("--message-freq", "message_freq", float),
    ("--num-samples", "num_samples", int),
    ("--am-depth", "am_depth", float),
    ("--fm-index", "fm_index", float),
    ("--symbol-rate", "symbol_rate", float),
    ("--fsk-deviation", "fsk_deviation", float),
    ("--seed", "rng_seed", int),
    ("--edge-trim", "edge_trim", int),
    ("--threshold", "amplitude_threshold", float),
    ("--svm-c", "svm_c", float),
    ("--svm-tol", "svm_tol", float),
    ("--kernel-degree", "kernel_degree", int),
    ("--kernel-offset", "kernel_offset", float),
    ("--max-passes", "max_passes", int),
    ("--tolerance-scale", "tolerance_scale", float),
    ("--tolerances", "tolerances", str),
    ("--train-count", "train_count", int),
    ("--test-count", "test_count", int),
    ("--snr-list", "snr_list", str),
]


class AmcArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with the argument exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGUMENT, f"{self.prog}: error: {message}\n")


def scheme_list(text: str) -> List[SchemeLabel]:
    """Comma-separated scheme labels, or ``all`` for the eleven canonical schemes."""
    if text.strip().lower() == "all":
        return list(SCHEMES)
    try:
        return [SchemeLabel.parse(part) for part in text.split(",") if part.strip()]
    except ConfigurationError as e:
        raise argparse.ArgumentTypeError(str(e))


def int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"counts must be positive, got '{text}'")
    return values


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("--no-progress", action="store_true", help="Hide progress bars")
    for flag, key, kind in OVERRIDE_FLAGS:
        common.add_argument(flag, dest=key, type=kind, default=None)
    common.add_argument(
        "--miss-action", dest="miss_action", choices=[m.value for m in MissAction], default=None
    )
    common.add_argument(
        "--insert-on-classify", dest="insert_on_classify", action="store_const", const=True, default=None
    )
    return common


def build_parser() -> AmcArgumentParser:
    parser = AmcArgumentParser(
        prog="amc", description="Database-assisted automatic modulation classification"
    )
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True, parser_class=AmcArgumentParser)

    p = sub.add_parser("synth", parents=[common], help="Generate waveform batches")
    p.add_argument("--schemes", type=scheme_list, default=None, help="Comma-separated labels or 'all'")
    p.add_argument("--count", type=int, default=10, help="Realizations per (scheme, SNR)")
    p.add_argument("--out", default=None, help="Output directory")
    p.add_argument("--replay", default=None, help="Regenerate the batch described by a manifest")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("extract", parents=[common], help="Extract features from waveform batches")
    p.add_argument("--input", dest="inputs", nargs="+", required=True, help="Batch files or directories")
    p.add_argument("--out", default="features.csv", help="Feature CSV path")
    p.add_argument("--arff", default=None, help="Also write an ARFF file")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="Train the one-vs-one SVM")
    p.add_argument("--features", required=True, help="Feature CSV or ARFF")
    p.add_argument("--model-out", default="model.amcsvm", help="Model file path")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("store-add", parents=[common], help="Add labeled features to a store file")
    p.add_argument("--features", required=True, help="Feature CSV or ARFF")
    p.add_argument("--store", required=True, help="AMCDB1 store file, created if missing")
    p.set_defaults(handler=cmd_store_add)

    p = sub.add_parser("classify", parents=[common], help="Classify waveforms against store and model")
    p.add_argument("--model", default=None, help="Model file (required unless the miss action is strict)")
    p.add_argument("--store", required=True, help="AMCDB1 store file")
    p.add_argument("--input", dest="inputs", nargs="+", required=True, help="Batch files or directories")
    p.add_argument("--report", default=None, help="Outcome CSV path")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("bench-accuracy", parents=[common], help="Accuracy vs SNR benchmark")
    p.add_argument("--out", default="bench_accuracy", help="Output directory")
    p.set_defaults(handler=cmd_bench_accuracy)

    p = sub.add_parser("bench-timing", parents=[common], help="Match latency vs known-signal count")
    p.add_argument("--counts", type=int_list, default=int_list(DEFAULT_TIMING_COUNTS))
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--out", default="timing.csv", help="Latency CSV path")
    p.set_defaults(handler=cmd_bench_timing)
    return parser


def setup_logging(verbose: bool = False) -> None:
    level_name = os.getenv("AMC_LOG_LEVEL", "INFO").upper()
    level = logging.DEBUG if verbose else getattr(logging, level_name, logging.INFO)
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[logging.FileHandler(LOG_FILE), logging.StreamHandler()],
    )


def settings_from_args(args: argparse.Namespace) -> Settings:
    overrides = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    return load_settings(args.config, overrides)


def _directory_of(path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    return directory


def _manifest(command: str, settings: Settings, **fields: Any) -> RunManifest:
    return RunManifest(command=command, config=settings.model_dump(mode="json"), **fields)


# Commands. Each returns an exit code and writes a manifest next to its artifacts.

def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    if args.replay:
        previous = read_manifest(args.replay)
        settings = Settings(**previous.config)
        params = previous.parameters
        schemes = [SchemeLabel(s) for s in params["schemes"]]
        snr_list = [float(s) for s in params["snr_list"]]
        count = int(params["count"])
        out = args.out or os.path.dirname(os.path.abspath(args.replay))
        logger.info(f"Replaying synth run from {args.replay}")
    else:
        schemes = args.schemes or list(SCHEMES)
        snr_list = list(settings.experiment.snr_list)
        count = args.count
        out = args.out or "waveforms"
    if count < 1:
        raise ConfigurationError("count >= 1", f"count={count}")
    os.makedirs(out, exist_ok=True)

    manifest = _manifest(
        "synth",
        settings,
        parameters={"schemes": [s.value for s in schemes], "snr_list": snr_list, "count": count},
    )
    base = settings.synth.rng_seed
    for scheme in schemes:
        for snr in snr_list:
            batch = realize_batch([scheme], [snr], count, settings.synth, base, not args.no_progress)
            base += count
            path = os.path.join(out, waveform_filename(scheme, snr))
            write_waveforms(path, batch)
            manifest.seeds.extend(w.seed for w in batch)
            manifest.artifacts.append(path)
    logger.info(f"Wrote {len(manifest.seeds)} waveforms in {len(manifest.artifacts)} files to {out}")
    write_manifest(out, manifest)
    return EXIT_OK


def cmd_extract(args: argparse.Namespace, settings: Settings) -> int:
    waveforms = read_waveform_inputs(args.inputs)
    pairs = extract_batch(waveforms, settings.features, not args.no_progress)
    frame = features_frame(pairs)
    write_features_csv(args.out, frame)
    artifacts = [args.out]
    if args.arff:
        write_arff(args.arff, dataset_from_frame(frame))
        artifacts.append(args.arff)

    seeds = [int(s) for s in frame["seed"].dropna()]
    manifest = _manifest(
        "extract", settings, seeds=seeds, artifacts=artifacts, parameters={"inputs": list(args.inputs)}
    )
    write_manifest(_directory_of(args.out), manifest)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    ds = read_dataset(args.features)
    svm = settings.svm
    model = train_multiclass(
        ds,
        svm.c,
        KernelSpec(svm.kernel_degree, svm.kernel_offset),
        svm.tol,
        svm.max_passes,
        seed=settings.synth.rng_seed,
        progress=not args.no_progress,
    )
    save_model(model, args.model_out)
    print(tabulate(training_summary(model), headers=["pair", "support vectors", "bias"], tablefmt="grid"))
    logger.info(f"Model with {len(model.binary_models)} pair models saved to {args.model_out}")

    manifest = _manifest(
        "train",
        settings,
        seeds=[s for s in ds.seeds if s is not None],
        artifacts=[args.model_out],
        parameters={"features": args.features, "classes": list(model.class_list)},
    )
    write_manifest(_directory_of(args.model_out), manifest)
    return EXIT_OK


def cmd_store_add(args: argparse.Namespace, settings: Settings) -> int:
    ds = read_dataset(args.features)
    if os.path.exists(args.store):
        store = load(args.store)
    else:
        tolerances = settings.store.tolerances or default_tolerances(ds, settings.store.tolerance_scale)
        store = FeatureStore(tolerances)
        logger.info(f"Creating store {args.store} with tolerances {tolerances}")
    try:
        ids = ingest_dataset(store, ds)
        persist(store, args.store)
        print(tabulate(store_summary(store), headers=["label", "records"], tablefmt="grid"))
        total = len(store)
    finally:
        store.close()

    manifest = _manifest(
        "store-add",
        settings,
        seeds=[s for s in ds.seeds if s is not None],
        artifacts=[args.store],
        parameters={"features": args.features, "added": len(ids), "total": total},
    )
    write_manifest(_directory_of(args.store), manifest)
    return EXIT_OK


def _open_store(path: str, settings: Settings) -> FeatureStore:
    if os.path.exists(path):
        return load(path)
    if settings.store.tolerances is None:
        raise ConfigurationError("store file exists or tolerances are configured", f"missing {path}")
    logger.info(f"Store {path} not found, starting empty")
    return FeatureStore(settings.store.tolerances)


def cmd_classify(args: argparse.Namespace, settings: Settings) -> int:
    policy_cfg = settings.store
    if policy_cfg.miss_action is MissAction.CLASSIFY_FALLBACK and not args.model:
        raise ConfigurationError("classifier fallback needs --model")
    model = load_model(args.model) if args.model else None
    waveforms = read_waveform_inputs(args.inputs)

    store = _open_store(args.store, settings)
    try:
        policy = MatchPolicy(
            tolerances=policy_cfg.tolerances or store.tolerances,
            miss_action=policy_cfg.miss_action,
            insert_on_classify=policy_cfg.insert_on_classify,
        )
        rows = []
        for index, w in enumerate(waveforms):
            outcome = classify_pipeline(store, model, w, policy, settings.features)
            rows.append(
                {
                    "index": index,
                    "source": w.scheme.value,
                    "seed": w.seed,
                    "kind": outcome.kind.value,
                    "label": outcome.label,
                    "matched_id": outcome.matched_id,
                    "inserted_id": outcome.inserted_id,
                    "elapsed_us": outcome.elapsed / 1e3,
                }
            )
        inserted = sum(r["inserted_id"] is not None for r in rows)
        if inserted:
            persist(store, args.store)
            logger.info(f"Inserted {inserted} classified records into {args.store}")
    finally:
        store.close()

    report = pd.DataFrame(
        rows, columns=["index", "source", "seed", "kind", "label", "matched_id", "inserted_id", "elapsed_us"]
    )
    for column in ("seed", "matched_id", "inserted_id"):
        report[column] = report[column].astype("Int64")
    shown = report.astype(object).where(report.notna(), "")
    print(tabulate(shown.values.tolist(), headers=list(report.columns), tablefmt="grid", floatfmt=".1f"))
    counts = {kind.value: int((report["kind"] == kind.value).sum()) for kind in OutcomeKind}
    logger.info(f"Outcomes: {counts}")

    artifacts = [args.store]
    if args.report:
        report.to_csv(args.report, index=False)
        artifacts.append(args.report)
    manifest = _manifest(
        "classify",
        settings,
        seeds=[w.seed for w in waveforms if w.seed is not None],
        artifacts=artifacts,
        parameters={"model": args.model, "inputs": list(args.inputs), "outcomes": counts},
    )
    write_manifest(_directory_of(args.report or args.store), manifest)
    return EXIT_OK


def cmd_bench_accuracy(args: argparse.Namespace, settings: Settings) -> int:
    os.makedirs(args.out, exist_ok=True)
    run = run_accuracy_benchmark(settings, progress=not args.no_progress)
    artifacts = []
    for snr, matrix in sorted(run.matrices.items()):
        print(f"\nConfusion matrix, SNR = {snr:g} dB (rows true, columns predicted)")
        print(matrix.table())
        path = os.path.join(args.out, f"confusion_{snr:g}dB.csv")
        matrix.to_frame().to_csv(path)
        artifacts.append(path)

    frame = accuracy_frame(run.matrices)
    print("\nCorrect detection rate (%)")
    print(accuracy_table(frame))
    for snr, matrix in sorted(run.matrices.items()):
        print(f"Overall accuracy at {snr:g} dB: {100.0 * matrix.overall_accuracy():.2f}%")
    path = os.path.join(args.out, "accuracy.csv")
    frame.to_csv(path, index=False)
    artifacts.append(path)

    seeds: List[int] = []
    for snr in sorted(run.matrices):
        seeds.extend(run.train_seeds[snr])
        seeds.extend(run.test_seeds[snr])
    manifest = _manifest(
        "bench-accuracy",
        settings,
        seeds=sorted(set(seeds)),
        artifacts=artifacts,
        parameters={"snr_list": list(settings.experiment.snr_list)},
    )
    write_manifest(args.out, manifest)
    return EXIT_OK


def cmd_bench_timing(args: argparse.Namespace, settings: Settings) -> int:
    if args.queries < 1:
        raise ConfigurationError("queries >= 1", f"queries={args.queries}")
    if not args.tolerance > 0:
        raise ConfigurationError("tolerance > 0", f"tolerance={args.tolerance}")
    frame = run_timing_benchmark(
        args.counts,
        queries=args.queries,
        tolerance=args.tolerance,
        seed=settings.synth.rng_seed,
        workdir=_directory_of(args.out),
        progress=not args.no_progress,
    )
    frame.to_csv(args.out, index=False)
    print(tabulate(frame.values.tolist(), headers=list(frame.columns), tablefmt="grid", floatfmt=".3f"))

    manifest = _manifest(
        "bench-timing",
        settings,
        seeds=[settings.synth.rng_seed],
        artifacts=[args.out],
        parameters={"counts": list(args.counts), "queries": args.queries, "tolerance": args.tolerance},
    )
    write_manifest(_directory_of(args.out), manifest)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        settings = settings_from_args(args)
        return args.handler(args, settings)
    except AmcError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_ARGUMENT
    except OSError as e:
        logger.error(f"I/O error: {str(e)}")
        return EXIT_DATA
