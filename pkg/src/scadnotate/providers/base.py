"""Provider-boundary data types and the abstract provider interface."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

from ..blocks import BlockAssignment
from ..render import BinaryMask

DEFAULT_SEEDS = (1, 2, 3, 4)
PROMPT_TEMPLATE = "{category}, realistic"


@dataclass(frozen=True)
class SynthesisRequest:
    depth_image: bytes  # 8-bit grayscale PNG
    prompt: str
    n_images: int = 4
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    control_strength: float = 1.0
    steps: int = 20
    resolution: int = 512

    def __post_init__(self):
        if self.n_images != len(self.seeds):
            raise ValueError("n_images must equal the number of seeds")


@dataclass(frozen=True)
class Detection:
    label: str
    box: tuple[int, int, int, int]  # x0, y0, x1, y1 pixels, half-open
    confidence: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate detection box {self.box}")


@dataclass
class SegmentMask:
    mask: BinaryMask
    source_box: tuple[int, int, int, int]
    label: str


@dataclass(frozen=True)
class LabelList:
    category: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("label list must not be empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("label list contains duplicates")


@dataclass
class SynonymMap:
    mapping: dict[str, Optional[str]] = field(default_factory=dict)

    def apply(self, label: str) -> str:
        mapped = self.mapping.get(label)
        return mapped if mapped is not None else label


@dataclass(frozen=True)
class OracleConfig:
    seed: int = 0
    confidence_range: tuple[float, float] = (0.5, 0.9)
    confidence_jitter: float = 0.0
    pixel_noise_rate: float = 0.0
    detection_dropout: float = 0.0

    def __post_init__(self):
        lo, hi = self.confidence_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("confidence_range must satisfy 0 < lo <= hi <= 1")


@dataclass
class SceneContext:
    """Ground-truth side channel consumed by the oracle provider only.

    Real providers look at image pixels; the oracle instead reads the per-view
    block masks and ground-truth labels the pipeline rendered, which is what
    makes offline end-to-end runs deterministic.
    """

    view: int
    gt: BlockAssignment
    block_masks: dict[int, BinaryMask]


class Provider(ABC):
    """Uniform boundary over synthesis, detection, segmentation, and labels."""

    kind: str = "abstract"

    @abstractmethod
    def synthesize(self, req: SynthesisRequest) -> list[bytes]: ...

    @abstractmethod
    def detect(self, image: bytes, labels: LabelList,
               scene: Optional[SceneContext] = None) -> list[Detection]: ...

    @abstractmethod
    def segment(self, image: bytes, box: tuple[int, int, int, int], label: str,
                scene: Optional[SceneContext] = None) -> SegmentMask: ...

    @abstractmethod
    def suggest_labels(self, category: str) -> LabelList: ...

    @abstractmethod
    def map_synonyms(self, predicted: list[str], ground_truth: list[str]) -> SynonymMap: ...

    def close(self) -> None:
        pass
