# shadowformer/tasks/ablate.py

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from shadowformer.config import dataset_spec
from shadowformer.datasets.layouts import scan
from shadowformer.schemas.metrics_report import MetricsReport, format_region_table
from shadowformer.schemas.model_config import ModelConfig
from shadowformer.schemas.run_config import RunConfig
from shadowformer.tasks.evaluate import evaluate_model
from shadowformer.tasks.train import train_loop
from shadowformer.utils.logging import log_info, log_success
from shadowformer.utils.model_helpers import apply_model_fields

ABLATION_TABLE = "ablation.txt"
ABLATION_CSV = "ablation.csv"

# number -> (row label, overrides on the run's model config)
ABLATION_VARIANTS: Dict[int, Tuple[str, Dict[str, object]]] = {
    1: ("(1) SA encoder/decoder", {"encoder_block": "sa"}),
    2: ("(2) CA-only bottleneck", {"bottleneck_block": "ca"}),
    3: ("(3) vanilla SA bottleneck", {"sigma": 0.0}),
    4: ("(4) full model", {}),
}


def ablation_configs(
    base: ModelConfig,
    variants: Sequence[int],
    sigma_sweep: Sequence[float] = (),
) -> List[Tuple[str, ModelConfig]]:
    """Labelled model configs for the requested variants, then one full model per sigma."""

    unknown = sorted(set(variants) - set(ABLATION_VARIANTS))
    if unknown:
        raise ValueError(f"unknown ablation variant(s) {unknown}; expected 1-4")

    configs = []
    for number in sorted(set(variants)):
        label, overrides = ABLATION_VARIANTS[number]
        full = {"encoder_block": "ca", "bottleneck_block": "sia", **overrides}
        configs.append((label, apply_model_fields(base, full, "model")))
    for sigma in sigma_sweep:
        full = {"encoder_block": "ca", "bottleneck_block": "sia", "sigma": sigma}
        configs.append((f"full, sigma={sigma:g}", apply_model_fields(base, full, "model")))
    return configs


def _slug(label: str) -> str:
    words = "".join(c if c.isalnum() else " " for c in label).split()
    return "_".join(words).lower()


def run_ablation(
    cfg: RunConfig,
    variants: Sequence[int] = (1, 2, 3, 4),
    sigma_sweep: Sequence[float] = (),
    out_dir: Optional[Path] = None,
) -> List[Tuple[str, MetricsReport]]:
    """Train and evaluate each variant on one seed and step budget; write a PSNR/SSIM table."""

    out_dir = out_dir or cfg.out
    train_records = scan(dataset_spec(cfg, "train"))
    test_records = scan(dataset_spec(cfg, "test"))

    rows: List[Tuple[str, MetricsReport]] = []
    for label, model_cfg in ablation_configs(cfg.model, variants, sigma_sweep):
        log_info(f"ablation: {label}")
        result = train_loop(train_records, cfg.train, model_cfg, out_dir / _slug(label))
        rows.append((label, evaluate_model(result.state.model, test_records, cfg)))

    table = format_region_table(rows, metrics=("psnr", "ssim"))
    csv_lines = ["variant,region,psnr,ssim,rmse,convention,n_images"]
    for label, report in rows:
        for region, m in report.regions.items():
            csv_lines.append(
                f"{label},{region},{m.psnr:.6f},{m.ssim:.6f},{m.rmse:.6f},{report.convention},{m.n_images}"
            )

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / ABLATION_TABLE).write_text(table + "\n", encoding="utf-8")
        (out_dir / ABLATION_CSV).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write ablation table to {out_dir}: {exc}") from exc

    log_success(f"ablation finished: {len(rows)} variants, table in {out_dir / ABLATION_TABLE}")
    return rows
