# shadowformer/tasks/synth.py

from pathlib import Path
from typing import Dict

from shadowformer.schemas.run_config import SynthConfig
from shadowformer.services.retinex import generate_dataset, manifest_path, read_manifest
from shadowformer.utils.logging import log_info, log_success


def run_synth(synth: SynthConfig, seed: int, out_dir: Path, workers: int = 1) -> Dict[str, object]:
    """Write the train split (seeds seed .. seed+n-1) and the held-out test split (the seeds after)."""

    log_info(f"synthesizing {synth.n} train + {synth.n_test} test triplets of {synth.size}x{synth.size} into {out_dir}")
    options = dict(feather=synth.feather, illum_jitter=synth.illum_jitter, workers=workers)

    train = generate_dataset(synth.n, synth.size, synth.size, seed, out_dir, split="train", **options)
    test = generate_dataset(synth.n_test, synth.size, synth.size, seed + synth.n, out_dir, split="test", **options)

    # summary comes from the manifests as written
    written = read_manifest(manifest_path(out_dir, "train")) + read_manifest(manifest_path(out_dir, "test"))
    if len(written) != len(train) + len(test):
        raise OSError(f"manifests in {out_dir} list {len(written)} triplets, expected {len(train) + len(test)}")
    coverage = [e.coverage for e in written]
    summary = {
        "out": str(out_dir),
        "train": len(train),
        "test": len(test),
        "mean_coverage": sum(coverage) / len(coverage) if coverage else 0.0,
    }
    log_success(f"wrote {len(train)} train and {len(test)} test triplets (mean shadow coverage {summary['mean_coverage']:.3f})")
    return summary
