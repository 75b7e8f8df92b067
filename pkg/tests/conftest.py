"""Shared fixtures: corpus access, closed-form membership oracles, and the
synthetic cuboid-airplane generator used by the end-to-end suites."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

CORPUS_DIR = Path(__file__).parent / "corpus"
GOLDEN_DIR = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def corpus_paths() -> list[Path]:
    paths = sorted(CORPUS_DIR.glob("*.scad"))
    assert len(paths) == 30
    return paths


# --- closed-form membership oracles (independent of the geometry kernel) ---


def rot_xyz_deg(rx: float, ry: float, rz: float) -> np.ndarray:
    rx, ry, rz = map(math.radians, (rx, ry, rz))
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


def oriented_box_contains(pts: np.ndarray, size, rotation: np.ndarray,
                          translation) -> np.ndarray:
    """Membership oracle for a centered box under rotation + translation."""
    half = np.asarray(size, dtype=float) / 2.0
    local = (np.asarray(pts) - np.asarray(translation, dtype=float)) @ rotation
    return np.all(np.abs(local) <= half, axis=-1)


def quadric_ellipsoid_contains(pts: np.ndarray, semi_axes, rotation: np.ndarray,
                               translation) -> np.ndarray:
    """x^2/a^2 + y^2/b^2 + z^2/c^2 <= 1 oracle in the rotated frame."""
    semi = np.asarray(semi_axes, dtype=float)
    local = (np.asarray(pts) - np.asarray(translation, dtype=float)) @ rotation
    return np.sum((local / semi) ** 2, axis=-1) <= 1.0


def sphere_contains(pts: np.ndarray, r: float, center=(0, 0, 0)) -> np.ndarray:
    d = np.asarray(pts) - np.asarray(center, dtype=float)
    return np.sum(d * d, axis=-1) <= r * r


# --- synthetic 4-part cuboid airplane programs ---

AIRPLANE_LABELS = ("body", "wings", "tail", "engine")


def airplane_records(seed: int) -> list[dict]:
    """Five cuboid records (two engines) with all four parts camera-visible."""
    rng = np.random.default_rng(seed)

    def j(base: float, frac: float = 0.15) -> float:
        return float(base * (1 + rng.uniform(-frac, frac)))

    body_len = j(8.0)
    wing_span = j(7.0)
    records = [
        {
            "kind": "cuboid",
            "size": [body_len, j(1.3), j(1.3)],
            "rotation": {"euler_deg": [0, 0, 0]},
            "translation": [0, 0, 0],
            "gt_labels": ["body"],
        },
        {
            "kind": "cuboid",
            "size": [j(1.6), wing_span, j(0.35)],
            "rotation": {"euler_deg": [0, 0, 0]},
            "translation": [j(0.5), 0, j(0.9)],
            "gt_labels": ["wings"],
        },
        {
            "kind": "cuboid",
            "size": [j(0.7), j(2.6), j(0.3)],
            "rotation": {"euler_deg": [0, 0, 0]},
            "translation": [-body_len / 2 + j(0.4), 0, j(1.1)],
            "gt_labels": ["tail"],
        },
        {
            "kind": "cuboid",
            "size": [j(1.3), j(0.8), j(0.8)],
            "rotation": {"euler_deg": [0, 0, 0]},
            "translation": [j(2.2), wing_span / 4, j(-0.15)],
            "gt_labels": ["engine"],
        },
        {
            "kind": "cuboid",
            "size": [j(1.3), j(0.8), j(0.8)],
            "rotation": {"euler_deg": [0, 0, 0]},
            "translation": [j(2.2), -wing_span / 4, j(-0.15)],
            "gt_labels": ["engine"],
        },
    ]
    return records
