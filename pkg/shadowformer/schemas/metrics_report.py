# shadowformer/schemas/metrics_report.py

from typing import Dict, List, Literal, Sequence, Tuple

from pydantic import BaseModel, ConfigDict

RmseConvention = Literal["mae", "rms"]

REGIONS: Tuple[str, ...] = ("S", "NS", "ALL")
REGION_TITLES: Dict[str, str] = {
    "S": "Shadow Region (S)",
    "NS": "Non-Shadow Region (NS)",
    "ALL": "All Image (ALL)",
}
METRIC_FORMATS: Dict[str, str] = {"psnr": "{:.2f}", "ssim": "{:.3f}", "rmse": "{:.2f}"}
METRIC_TITLES: Dict[str, str] = {"psnr": "PSNR", "ssim": "SSIM", "rmse": "RMSE"}


class RegionMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    psnr: float
    ssim: float
    rmse: float
    n_images: int


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    regions: Dict[str, RegionMetrics]
    n_images: int
    convention: RmseConvention

    def combine(self, other: "MetricsReport") -> "MetricsReport":
        """Image-count-weighted merge of two reports over disjoint image sets."""

        if other.convention != self.convention:
            raise ValueError(f"cannot combine {self.convention} and {other.convention} reports")

        regions: Dict[str, RegionMetrics] = {}
        for region in REGIONS:
            a, b = self.regions[region], other.regions[region]
            n = a.n_images + b.n_images
            if n == 0:
                regions[region] = a
                continue
            regions[region] = RegionMetrics(
                psnr=(a.psnr * a.n_images + b.psnr * b.n_images) / n,
                ssim=(a.ssim * a.n_images + b.ssim * b.n_images) / n,
                rmse=(a.rmse * a.n_images + b.rmse * b.n_images) / n,
                n_images=n,
            )
        return MetricsReport(regions=regions, n_images=self.n_images + other.n_images, convention=self.convention)

    def format_table(self, label: str = "") -> str:
        table = format_region_table([(label, self)], metrics=("psnr", "ssim", "rmse"))
        return f"{table}\nrmse convention: {self.convention}, images: {self.n_images}\n"

    def to_csv(self) -> str:
        lines = ["region,psnr,ssim,rmse,convention,n_images"]
        for region in REGIONS:
            m = self.regions[region]
            lines.append(f"{region},{m.psnr:.6f},{m.ssim:.6f},{m.rmse:.6f},{self.convention},{m.n_images}")
        return "\n".join(lines) + "\n"


def format_region_table(rows: List[Tuple[str, MetricsReport]], metrics: Sequence[str]) -> str:
    """Aligned plain-text table: one line per row, columns grouped S | NS | ALL."""

    cell = 8
    label_width = max([len(label) for label, _ in rows] + [4])
    group_width = max(cell * len(metrics), max(len(t) for t in REGION_TITLES.values()))

    header_1 = " " * label_width + "".join(f" | {REGION_TITLES[r]:^{group_width}}" for r in REGIONS)
    names = "".join(f"{METRIC_TITLES[m]:>{cell}}" for m in metrics)
    header_2 = " " * label_width + "".join(f" | {names:>{group_width}}" for _ in REGIONS)
    lines = [header_1, header_2, "-" * len(header_2)]

    for label, report in rows:
        line = f"{label:<{label_width}}"
        for region in REGIONS:
            values = report.regions[region]
            cells = "".join(f"{METRIC_FORMATS[m].format(getattr(values, m)):>{cell}}" for m in metrics)
            line += f" | {cells:>{group_width}}"
        lines.append(line)
    return "\n".join(lines)
