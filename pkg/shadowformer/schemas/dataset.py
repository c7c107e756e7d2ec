# shadowformer/schemas/dataset.py

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict

Layout = Literal["istd", "istd_plus", "srd", "synthetic"]
Split = Literal["train", "test"]

LAYOUTS = ("istd", "istd_plus", "srd", "synthetic")


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    root: Path
    layout: Layout = "istd"
    split: Split = "train"
    # SRD ships without masks; predicted masks live in their own tree
    mask_root: Optional[Path] = None


class TripletRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    shadow_path: Path
    mask_path: Path
    shadowfree_path: Path
    layout: Layout = "istd"


class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    seed: int
    coverage: float

    def to_line(self) -> str:
        return f"{self.index},{self.seed},{self.coverage:.6f}"
