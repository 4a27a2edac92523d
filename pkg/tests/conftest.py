import numpy as np
import pytest

from wallspace.geometry import RoomSpec


@pytest.fixture
def room() -> RoomSpec:
    return RoomSpec()


def perimeter_samples(room: RoomSpec, step_m: float = 0.001) -> np.ndarray:
    """(N, 2) floor coordinates of the perimeter sampled every ``step_m``."""
    w, d = room.width_m, room.depth_m
    n_front = int(round(w / step_m))
    n_side = int(round(d / step_m))
    front = np.stack([np.arange(n_front) * step_m, np.zeros(n_front)], axis=1)
    right = np.stack([np.full(n_side, w), np.arange(n_side) * step_m], axis=1)
    back = np.stack([w - np.arange(n_front) * step_m, np.full(n_front, d)], axis=1)
    left = np.stack([np.zeros(n_side), d - np.arange(n_side) * step_m], axis=1)
    return np.concatenate([front, right, back, left], axis=0)


def brute_force_clearance(points: np.ndarray, samples: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Min distance from each floor point to the sampled perimeter.

    Plain pairwise distances, chunked. float32 keeps the memory traffic
    tolerable; its worst-case error here (~1e-5 m) is far below the 1 mm
    comparisons this oracle backs.
    """
    pts = points.astype(np.float32)
    smp = samples.astype(np.float32)
    sx, sy = smp[:, 0][None, :], smp[:, 1][None, :]
    out = np.empty(len(points))
    buf = np.empty((chunk, len(smp)), dtype=np.float32)
    buf2 = np.empty_like(buf)
    for i in range(0, len(pts), chunk):
        block = pts[i : i + chunk]
        n = len(block)
        a, b = buf[:n], buf2[:n]
        np.subtract(block[:, 0][:, None], sx, out=a)
        np.square(a, out=a)
        np.subtract(block[:, 1][:, None], sy, out=b)
        np.square(b, out=b)
        np.add(a, b, out=a)
        out[i : i + n] = np.sqrt(a.min(axis=1))
    return out
