# shadowformer/tasks/evaluate.py

from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from shadowformer.config import dataset_spec
from shadowformer.datasets.layouts import load_triplet, scan
from shadowformer.exceptions import ConfigError
from shadowformer.models.shadowformer import ShadowFormer, infer, set_sigma
from shadowformer.schemas.dataset import TripletRecord
from shadowformer.schemas.metrics_report import MetricsReport
from shadowformer.schemas.run_config import RunConfig
from shadowformer.services.checkpoint import load_model
from shadowformer.services.imaging import PathLike, load_image, load_mask, save_image
from shadowformer.services.metrics import evaluate_dataset, evaluate_pairs
from shadowformer.utils.logging import log_info, log_success, log_warning

RESULTS_DIR = "results"
REPORT_TEXT = "report.txt"
REPORT_CSV = "report.csv"


# =============================================================================
# INFERENCE
# =============================================================================

def predict_records(model: ShadowFormer, records: Sequence[TripletRecord], out_dir: Path) -> List[Path]:
    """Write one `{id}.png` result per record."""

    paths = []
    for record in records:
        shadow, mask, _ = load_triplet(record)
        paths.append(save_image(infer(model, shadow, mask), out_dir / f"{record.id}.png"))
    log_info(f"wrote {len(paths)} results to {out_dir}")
    return paths


def predict_files(model: ShadowFormer, pairs: Sequence[Tuple[PathLike, PathLike]], out_dir: Path) -> List[Path]:
    """Run loose (image, mask) files through the model; results keep the image stem."""

    paths = []
    for image_path, mask_path in pairs:
        image = load_image(image_path)
        if image.shape[0] == 1:
            image = image.expand(3, -1, -1).clone()
        result = infer(model, image, load_mask(mask_path))
        paths.append(save_image(result, out_dir / f"{Path(image_path).stem}.png"))
    return paths


def evaluate_model(model: ShadowFormer, records: Sequence[TripletRecord], cfg: RunConfig) -> MetricsReport:
    """In-memory evaluation without writing result images."""

    items = []
    for record in records:
        shadow, mask, gt = load_triplet(record)
        items.append((infer(model, shadow, mask), gt, mask))
    return evaluate_pairs(items, convention=cfg.eval.rmse_mode, resolution=cfg.eval.resolution)


# =============================================================================
# EVAL COMMAND
# =============================================================================

def write_report(report: MetricsReport, out_dir: Path, label: str = "") -> Tuple[Path, Path]:
    text_path, csv_path = out_dir / REPORT_TEXT, out_dir / REPORT_CSV
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        text_path.write_text(report.format_table(label), encoding="utf-8")
        csv_path.write_text(report.to_csv(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc}") from exc
    return text_path, csv_path


def run_eval(
    cfg: RunConfig,
    workers: int = 1,
    checkpoint: Optional[Path] = None,
    sigma: Optional[float] = None,
) -> MetricsReport:
    """Evaluate `--results` images, or run a checkpoint over the test split first."""

    spec = dataset_spec(cfg, "test")
    checkpoint = checkpoint or cfg.eval.checkpoint
    results_dir = cfg.eval.results

    if checkpoint is not None:
        if results_dir is not None:
            log_warning(f"--checkpoint given, ignoring --results {results_dir}")
        model, _ = load_model(checkpoint)
        if sigma is not None:
            set_sigma(model, sigma)
        results_dir = cfg.out / RESULTS_DIR
        predict_records(model, scan(spec), results_dir)
    elif results_dir is None:
        raise ConfigError("eval needs --results DIR or --checkpoint FILE")

    report = evaluate_dataset(
        results_dir,
        spec,
        convention=cfg.eval.rmse_mode,
        resolution=cfg.eval.resolution,
        workers=workers,
    )
    write_report(report, cfg.out, label=Path(results_dir).name)
    log_success(f"evaluated {report.n_images} images, report in {cfg.out}")
    return report
