"""Command-line frontend: one executable, one subcommand per pipeline stage.

Every subcommand accepts --config PATH (JSON whose keys mirror the flag
names, with flags given on the command line taking precedence) and --threads
(numba thread cap; results never depend on it). Any input path may be a
directory, which batches over the contained `.svlv` volumes and mirrors
outputs by filename.

Exit codes: 0 success, 1 validation error, 2 I/O error. Errors also emit one
machine-readable JSON line on stderr. Output files are written to a temp
name and atomically renamed, so failures never leave partial outputs.

The SVLS_LOG environment variable (error|warn|info|debug) controls log
verbosity; resolved run parameters are logged at info level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import engine, tensor_io
from .calibration import calibrate_report
from .kernel import svls_weights
from .loss import cross_entropy, softmax
from .phantom import KINDS, PhantomSpec, generate_labels, generate_miscalibrated, generate_rater_set
from .seg_metrics import SegmentationScores, dice_masks, score_segmentation, surface_dice_masks
from .smoothing import RaterSet, label_smooth, moh_fuse, msvls_fuse, svls_smooth
from .volume import LabelVolume, argmax_labels, one_hot_encode

log = logging.getLogger("svls")

VOLUME_SUFFIX = ".svlv"

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class CliError(ValueError):
    """Bad flags or flag combinations (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# defaults applied after config merging; help strings repeat them for --help
_DEFAULTS = {
    "kernel": {"sigma": 1.0, "format": "json"},
    "encode": {"sigma": 1.0},
    "fuse": {"sigma": 1.0},
    "loss": {"pred_kind": "probs"},
    "evaluate": {
        "sd_tolerance": 2.0,
        "ece_bins": 15,
        "tace_threshold": 1e-3,
        "tace_ranges": 15,
        "foreground_only": False,
        "composite": False,
        "region_merge": None,
    },
    "phantom": {"classes": 2, "jitter": 0, "strength": 0.0, "seed": 0, "raters": None},
}


def build_parser() -> _Parser:
    parser = _Parser(prog="svls", description="Soft-label generation and calibration evaluation toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--config", default=argparse.SUPPRESS, metavar="PATH",
                       help="JSON config whose keys mirror the flags; flags win (default: none)")
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS, metavar="N",
                       help="numba thread cap; outputs do not depend on it (default: available cores)")

    p = sub.add_parser("kernel", help="dump the smoothing stencil taps")
    p.add_argument("--rank", type=int, choices=(2, 3), required=True, help="stencil rank (no default)")
    p.add_argument("--sigma", type=float, default=argparse.SUPPRESS,
                   help="Gaussian bandwidth in voxels (default: 1.0)")
    p.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS,
                   help="output format (default: json)")
    common(p)

    p = sub.add_parser("encode", help="turn a label volume into soft labels")
    p.add_argument("--in", dest="in_path", required=True, metavar="PATH",
                   help="label volume or directory of volumes (no default)")
    p.add_argument("--method", choices=("onehot", "ls", "svls"), required=True,
                   help="soft-label method (no default)")
    p.add_argument("--alpha", type=float, default=argparse.SUPPRESS,
                   help="smoothing weight in [0,1]; required for ls, no default")
    p.add_argument("--sigma", type=float, default=argparse.SUPPRESS,
                   help="Gaussian bandwidth in voxels, svls only (default: 1.0)")
    p.add_argument("--out", required=True, metavar="PATH", help="output volume or directory (no default)")
    common(p)

    p = sub.add_parser("fuse", help="fuse multiple rater annotations into soft labels")
    p.add_argument("--in", dest="in_paths", required=True, nargs="+", metavar="PATH",
                   help="rater label volumes; a directory expands to its volumes (no default)")
    p.add_argument("--method", choices=("msvls", "moh"), required=True, help="fusion method (no default)")
    p.add_argument("--sigma", type=float, default=argparse.SUPPRESS,
                   help="Gaussian bandwidth in voxels, msvls only (default: 1.0)")
    p.add_argument("--out", required=True, metavar="PATH", help="output volume (no default)")
    common(p)

    p = sub.add_parser("loss", help="cross-entropy of predictions against a soft target")
    p.add_argument("--target", required=True, metavar="PATH", help="target probability volume (no default)")
    p.add_argument("--pred", required=True, metavar="PATH", help="predicted volume (no default)")
    p.add_argument("--pred-kind", choices=("probs", "logits"), default=argparse.SUPPRESS,
                   help="how to interpret the prediction payload (default: probs)")
    p.add_argument("--out", required=True, metavar="PATH", help="JSON report path (no default)")
    common(p)

    p = sub.add_parser("evaluate", help="segmentation and calibration metrics")
    p.add_argument("--ref", required=True, metavar="PATH", help="reference label volume (no default)")
    p.add_argument("--pred", required=True, metavar="PATH", help="predicted probability volume (no default)")
    p.add_argument("--sd-tolerance", type=float, default=argparse.SUPPRESS, metavar="MM",
                   help="surface DSC tolerance in mm (default: 2.0)")
    p.add_argument("--ece-bins", type=int, default=argparse.SUPPRESS,
                   help="equal-width confidence bins (default: 15)")
    p.add_argument("--tace-threshold", type=float, default=argparse.SUPPRESS,
                   help="per-class probability floor (default: 1e-3)")
    p.add_argument("--tace-ranges", type=int, default=argparse.SUPPRESS,
                   help="adaptive equal-count ranges per class (default: 15)")
    p.add_argument("--foreground-only", action="store_true", default=argparse.SUPPRESS,
                   help="restrict reliability/ECE to voxels with nonzero reference (default: off)")
    p.add_argument("--region-merge", default=argparse.SUPPRESS, metavar="MAP",
                   help="JSON file mapping region name -> class id list; adds merged-mask rows (default: none)")
    p.add_argument("--composite", action="store_true", default=argparse.SUPPRESS,
                   help="add a 'comp' row: unweighted mean over non-background classes (default: off)")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory (no default)")
    common(p)

    p = sub.add_parser("phantom", help="generate synthetic label volumes")
    p.add_argument("--kind", choices=KINDS, required=True, help="phantom kind (no default)")
    p.add_argument("--dims", required=True, metavar="X,Y[,Z]", help="volume extents (no default)")
    p.add_argument("--classes", type=int, default=argparse.SUPPRESS, help="class count (default: 2)")
    p.add_argument("--raters", type=int, default=argparse.SUPPRESS, metavar="D",
                   help="emit D jittered rater volumes into the output directory (default: none)")
    p.add_argument("--jitter", type=int, default=argparse.SUPPRESS, metavar="J",
                   help="max per-rater translation in voxels (default: 0)")
    p.add_argument("--strength", type=float, default=argparse.SUPPRESS,
                   help="miscalibration strength, miscalibrated_pred only (default: 0.0)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default: 0)")
    p.add_argument("--out", required=True, metavar="PATH", help="output path (no default)")
    common(p)

    return parser


def _resolve(ns: argparse.Namespace, command: str) -> dict:
    """Merge explicit flags over config-file values over built-in defaults."""
    given = dict(vars(ns))
    given.pop("command", None)
    config = {}
    config_path = given.pop("config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliError(f"unparseable config {config_path}: {exc}")
        if not isinstance(config, dict):
            raise CliError(f"config {config_path} must hold a JSON object")
    plan = dict(_DEFAULTS.get(command, {}))
    for key, value in config.items():
        plan[key.replace("-", "_")] = value
    plan.update(given)
    plan.setdefault("threads", os.cpu_count() or 1)
    _reject_exclusive_flags(command, given, plan)
    log.info("run plan %s: %s", command, json.dumps(plan, sort_keys=True, default=str))
    return plan


def _reject_exclusive_flags(command: str, given: dict, plan: dict) -> None:
    """Explicit flags that contradict the chosen method fail at parse time."""
    method = plan.get("method")
    if command == "encode":
        if "alpha" in given and method != "ls":
            raise CliError(f"--alpha only applies to method ls, not {method}")
        if "sigma" in given and method != "svls":
            raise CliError(f"--sigma only applies to method svls, not {method}")
    if command == "fuse" and "sigma" in given and method != "msvls":
        raise CliError(f"--sigma only applies to method msvls, not {method}")
    if command == "phantom":
        if "strength" in given and plan.get("kind") != "miscalibrated_pred":
            raise CliError("--strength only applies to kind miscalibrated_pred")
        if "jitter" in given and not plan.get("raters"):
            raise CliError("--jitter requires --raters")


def _volume_files(directory: str) -> list[str]:
    names = sorted(n for n in os.listdir(directory) if n.endswith(VOLUME_SUFFIX))
    if not names:
        raise CliError(f"directory {directory} contains no {VOLUME_SUFFIX} volumes")
    return [os.path.join(directory, n) for n in names]


def _iter_in_out(in_path: str, out_path: str):
    """Yield (input file, output file) pairs, mirroring filenames for directories."""
    if os.path.isdir(in_path):
        os.makedirs(out_path, exist_ok=True)
        for src in _volume_files(in_path):
            yield src, os.path.join(out_path, os.path.basename(src))
    else:
        yield in_path, out_path


def run_kernel(plan: dict) -> int:
    k = svls_weights(plan["rank"], plan["sigma"])
    if plan["format"] == "json":
        doc = {
            "rank": k.rank,
            "sigma": k.sigma,
            "taps": [float(t) for t in k.taps.ravel()],
            "center": float(k.taps[(1,) * k.rank]),
            "total_weight": k.total_weight,
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"rank {k.rank} sigma {k.sigma} total_weight {k.total_weight!r}")
        for block in k.taps.reshape(-1, 3, 3):
            for row in block:
                print("  " + " ".join(f"{v:.9f}" for v in row))
            print()
    return 0


def run_encode(plan: dict) -> int:
    method = plan["method"]
    if method == "ls" and plan.get("alpha") is None:
        raise CliError("--alpha is required for method ls")
    kernel = None
    for src, dst in _iter_in_out(plan["in_path"], plan["out"]):
        labels = tensor_io.read_volume(src)
        if not isinstance(labels, LabelVolume):
            raise CliError(f"{src} is not a label volume")
        provenance = {"method": method, "source": os.path.basename(src)}
        if method == "onehot":
            soft = one_hot_encode(labels)
        elif method == "ls":
            soft = label_smooth(labels, plan["alpha"])
            provenance["alpha"] = plan["alpha"]
        else:
            if kernel is None or kernel.rank != labels.rank:
                kernel = svls_weights(labels.rank, plan["sigma"])
            soft = svls_smooth(labels, kernel)
            provenance["sigma"] = plan["sigma"]
        tensor_io.write_volume(soft, dst, provenance=provenance)
        log.info("encoded %s -> %s", src, dst)
    return 0


def run_fuse(plan: dict) -> int:
    paths = []
    for p in plan["in_paths"]:
        paths.extend(_volume_files(p) if os.path.isdir(p) else [p])
    volumes = [tensor_io.read_volume(p) for p in paths]
    for p, v in zip(paths, volumes):
        if not isinstance(v, LabelVolume):
            raise CliError(f"{p} is not a label volume")
    raters = RaterSet(tuple(volumes))
    provenance = {
        "method": plan["method"],
        "rater_files": [os.path.basename(p) for p in paths],
    }
    if plan["method"] == "msvls":
        kernel = svls_weights(raters.raters[0].rank, plan["sigma"])
        fused = msvls_fuse(raters, kernel)
        provenance["sigma"] = plan["sigma"]
    else:
        fused = moh_fuse(raters)
    tensor_io.write_volume(fused, plan["out"], provenance=provenance)
    return 0


def run_loss(plan: dict) -> int:
    for src, dst in _iter_in_out(plan["pred"], plan["out"]):
        target_path = plan["target"]
        if os.path.isdir(target_path):
            target_path = os.path.join(target_path, os.path.basename(src))
        target = tensor_io.read_volume(target_path)
        if plan["pred_kind"] == "logits":
            predicted = softmax(tensor_io.read_logits(src))
        else:
            predicted = tensor_io.read_volume(src)
        if dst.endswith(VOLUME_SUFFIX):
            dst = dst[: -len(VOLUME_SUFFIX)] + ".json"
        report = cross_entropy(target, predicted)
        tensor_io.write_report(report, dst, format="json")
        log.info("loss %s vs %s: %.6f nats", src, target_path, report.total)
    return 0


def _merged_scores(scores: SegmentationScores, reference, hard_pred, plan: dict) -> SegmentationScores:
    dsc = dict(scores.per_class_dsc)
    sd = dict(scores.per_class_sd)
    if plan.get("region_merge"):
        with open(plan["region_merge"], "r", encoding="utf-8") as fh:
            regions = json.load(fh)
        for name, ids in regions.items():
            ids = [int(i) for i in ids]
            mask_t = np.isin(reference.data, ids)
            mask_p = np.isin(hard_pred.data, ids)
            dsc[name] = dice_masks(mask_t, mask_p)
            sd[name] = surface_dice_masks(mask_t, mask_p, reference.spacing, scores.tolerance_mm)
    if plan.get("composite"):
        foreground = [c for c in scores.per_class_dsc if isinstance(c, int) and c != 0]
        if foreground:
            dsc["comp"] = float(np.mean([scores.per_class_dsc[c] for c in foreground]))
            sd["comp"] = float(np.mean([scores.per_class_sd[c] for c in foreground]))
    return SegmentationScores(dsc, sd, scores.tolerance_mm)


def run_evaluate(plan: dict) -> int:
    batching = os.path.isdir(plan["pred"])
    for src, dst in _iter_in_out(plan["pred"], plan["out"]):
        ref_path = plan["ref"]
        if os.path.isdir(ref_path):
            ref_path = os.path.join(ref_path, os.path.basename(src))
        reference = tensor_io.read_volume(ref_path)
        predicted = tensor_io.read_volume(src)
        if isinstance(predicted, LabelVolume):
            raise CliError(f"{src} holds labels; evaluate needs a probability volume")
        out_dir = dst[: -len(VOLUME_SUFFIX)] if batching else plan["out"]
        os.makedirs(out_dir, exist_ok=True)

        hard = argmax_labels(predicted)
        scores = score_segmentation(reference, hard, tolerance_mm=plan["sd_tolerance"])
        scores = _merged_scores(scores, reference, hard, plan)
        calib = calibrate_report(
            reference,
            predicted,
            num_bins=plan["ece_bins"],
            tace_threshold=plan["tace_threshold"],
            tace_ranges=plan["tace_ranges"],
            foreground_only=plan["foreground_only"],
        )
        tensor_io.write_report(calib, os.path.join(out_dir, "calibration.json"), format="json")
        tensor_io.write_report(calib, os.path.join(out_dir, "reliability.csv"), format="csv")
        tensor_io.write_report(scores, os.path.join(out_dir, "segmentation.json"), format="json")
        tensor_io.write_report(scores, os.path.join(out_dir, "segmentation.csv"), format="csv")
        log.info("evaluated %s vs %s -> %s", src, ref_path, out_dir)
    return 0


def run_phantom(plan: dict) -> int:
    dims = tuple(int(d) for d in str(plan["dims"]).split(","))
    spec = PhantomSpec(
        kind=plan["kind"],
        dims=dims,
        num_classes=plan["classes"],
        seed=plan["seed"],
        strength=plan["strength"],
    )
    base_provenance = {"method": "phantom", "kind": spec.kind, "seed": spec.seed}
    if plan.get("raters"):
        raters = generate_rater_set(spec, plan["raters"], plan["jitter"])
        os.makedirs(plan["out"], exist_ok=True)
        for j, rater in enumerate(raters.raters):
            path = os.path.join(plan["out"], f"rater{j:02d}{VOLUME_SUFFIX}")
            tensor_io.write_volume(rater, path, provenance={**base_provenance, "rater": j, "jitter": plan["jitter"]})
        return 0
    if spec.kind == "miscalibrated_pred":
        labels = generate_labels(spec)
        predicted = generate_miscalibrated(labels, spec.strength, seed=spec.seed)
        os.makedirs(plan["out"], exist_ok=True)
        tensor_io.write_volume(labels, os.path.join(plan["out"], "labels" + VOLUME_SUFFIX),
                               provenance=base_provenance)
        tensor_io.write_volume(predicted, os.path.join(plan["out"], "pred" + VOLUME_SUFFIX),
                               provenance={**base_provenance, "strength": spec.strength})
        return 0
    tensor_io.write_volume(generate_labels(spec), plan["out"], provenance=base_provenance)
    return 0


_HANDLERS = {
    "kernel": run_kernel,
    "encode": run_encode,
    "fuse": run_fuse,
    "loss": run_loss,
    "evaluate": run_evaluate,
    "phantom": run_phantom,
}


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("SVLS_LOG", "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not getattr(ns, "command", None):
            raise CliError("a subcommand is required (see svls --help)")
        plan = _resolve(ns, ns.command)
        engine.set_thread_count(int(plan["threads"]))
        return _HANDLERS[ns.command](plan)
    except (CliError, tensor_io.VolumeFormatError, ValueError) as exc:
        _emit_error("validation", str(exc))
        return 1
    except OSError as exc:
        _emit_error("io", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
