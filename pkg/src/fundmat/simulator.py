"""Synthetic two-view scenes: cube of points, two camera motions, Gaussian pixel noise.

Camera 1 sits ``camera_distance`` meters in front of the cube center and
looks at it.  Motion k places camera 2 at t_k in camera-1 coordinates with
orientation R_k, i.e. X_2 = R_k (X_1 - t_k).

Random numbers come from numpy's counter-based Philox generator; Gaussian
noise uses the Box-Muller transform on its uniforms.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .epipolar import Matches, algebraic_cost
from .errors import DegenerateDataError, SolverFailure

log = logging.getLogger(__name__)

_SCENE_STREAM = 0
_NOISE_STREAM = 1


class CameraBehindScene(RuntimeError):
    pass


@dataclass(frozen=True)
class MotionSpec:
    R: np.ndarray
    t: np.ndarray


@dataclass(frozen=True)
class SceneConfig:
    n_points: int = 50
    cube_side: float = 10.0
    camera_distance: float = 15.0
    focal: float = 700.0
    resolution: tuple[int, int] = (640, 480)
    principal_point: tuple[float, float] = (320.0, 240.0)
    margin: float = 200.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_points, self.cube_side, self.camera_distance, self.focal) <= 0:
            raise ValueError("scene parameters must be positive")
        w, h = self.resolution
        cx, cy = self.principal_point
        if not (0 < cx < w and 0 < cy < h):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array([[self.focal, 0.0, cx], [0.0, self.focal, cy], [0.0, 0.0, 1.0]])


def rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def motion(k: int) -> MotionSpec:
    """The two test motions: rotation about y by pi/3 or pi/6, translation (20,0,5) or (6,0,0)."""
    if k not in (1, 2):
        raise ValueError(f"motion must be 1 or 2, got {k}")
    theta = math.pi / 3 if k == 1 else math.pi / 6
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    t = np.array([20.0, 0.0, 5.0]) if k == 1 else np.array([6.0, 0.0, 0.0])
    return MotionSpec(R, t)


def cameras(mot: MotionSpec, cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """World-to-image projection matrices of both cameras (cube centered at the origin)."""
    c = np.array([0.0, 0.0, cfg.camera_distance])
    P1 = cfg.K @ np.hstack([np.eye(3), c[:, None]])
    P2 = cfg.K @ np.hstack([mot.R, (mot.R @ (c - mot.t))[:, None]])
    return P1, P2


def ground_truth_f(mot: MotionSpec, cfg: SceneConfig) -> np.ndarray:
    """F = K^-T [t_rel]x R_rel K^-1 for the pair, unit Frobenius norm."""
    R_rel = mot.R
    t_rel = -mot.R @ mot.t
    tx = np.array([[0, -t_rel[2], t_rel[1]], [t_rel[2], 0, -t_rel[0]], [-t_rel[1], t_rel[0], 0]])
    Kinv = np.linalg.inv(cfg.K)
    F = Kinv.T @ tx @ R_rel @ Kinv
    return F / np.linalg.norm(F)


def _cube(rng, n, side):
    return (rng.random((n, 3)) - 0.5) * side


def make_scene(cfg: SceneConfig) -> np.ndarray:
    """n_points uniform samples in the cube of side cube_side centered at the origin."""
    return _cube(rng_for(cfg.seed, _SCENE_STREAM), cfg.n_points, cfg.cube_side)


def _project(P, X):
    x = np.hstack([X, np.ones((X.shape[0], 1))]) @ P.T
    return x[:, :2] / x[:, 2:], x[:, 2]


def _visible(pix, depth, cfg):
    w, h = cfg.resolution
    m = cfg.margin
    return ((depth > 0) & (pix[:, 0] >= -m) & (pix[:, 0] <= w + m)
            & (pix[:, 1] >= -m) & (pix[:, 1] <= h + m))


def project_matches(points: np.ndarray, mot: MotionSpec, cfg: SceneConfig,
                    max_retries: int = 100) -> tuple[Matches, np.ndarray]:
    """Exact projections into both images; points outside either view are resampled.

    Returns the matches and the (possibly resampled) 3D points.
    """
    P1, P2 = cameras(mot, cfg)
    X = np.array(points, dtype=float)
    rng = None
    for attempt in range(max_retries + 1):
        x1, d1 = _project(P1, X)
        x2, d2 = _project(P2, X)
        bad = ~(_visible(x1, d1, cfg) & _visible(x2, d2, cfg))
        if not bad.any():
            return Matches.from_pixels(x1, x2), X
        if attempt == max_retries:
            break
        if rng is None:
            rng = rng_for(cfg.seed, 2 + _NOISE_STREAM)
        X[bad] = _cube(rng, int(bad.sum()), cfg.cube_side)
    raise CameraBehindScene(f"{int(bad.sum())} points still invisible after {max_retries} resamplings")


def gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal samples by Box-Muller."""
    size = int(np.prod(shape))
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # in (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:size].reshape(shape)


def add_noise(matches: Matches, sigma: float, seed: int) -> Matches:
    """Add independent N(0, sigma^2) to every pixel coordinate; sigma is a standard deviation."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return matches
    noise = sigma * gaussian(rng_for(seed, _NOISE_STREAM), (len(matches), 4))
    return Matches.from_pixels(matches.x1 + noise[:, :2], matches.x2 + noise[:, 2:])


def synthesize(motion_k: int, n_points: int, sigma: float, seed: int,
               cfg: SceneConfig | None = None) -> Matches:
    """One noisy trial: scene, projection and noise all derived from ``seed``."""
    cfg = replace(cfg or SceneConfig(), n_points=n_points, seed=seed)
    mot = motion(motion_k)
    matches, _ = project_matches(make_scene(cfg), mot, cfg)
    return add_noise(matches, sigma, seed)


# --- Monte-Carlo sweeps ------------------------------------------------------

SWEEP_COLUMNS = ("grid_value", "method", "mean_e_init", "mean_e_ba", "mean_iters",
                 "failures", "trials")
METHODS = ("EightPoint", "Global")
NOISE_GRID = tuple(0.25 * k for k in range(9))
POINT_GRID = tuple(range(10, 101, 10))


@dataclass
class SweepCell:
    grid_value: float
    method: str
    e_init: list[float] = field(default_factory=list)
    e_ba: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    failures: int = 0
    trials: int = 0

    def _mean(self, xs):
        # accumulated in trial order for reproducibility
        if not xs:
            return float("nan")
        total = 0.0
        for v in xs:
            total += v
        return total / len(xs)

    @property
    def mean_e_init(self) -> float:
        return self._mean(self.e_init)

    @property
    def mean_e_ba(self) -> float:
        return self._mean(self.e_ba)

    @property
    def mean_iters(self) -> float:
        return self._mean([float(i) for i in self.iterations])


@dataclass
class SweepResult:
    kind: str
    motion: int
    cells: list[SweepCell]

    def cell(self, grid_value, method) -> SweepCell:
        for c in self.cells:
            if c.grid_value == grid_value and c.method == method:
                return c
        raise KeyError((grid_value, method))

    def series(self, method: str, column: str) -> tuple[np.ndarray, np.ndarray]:
        cells = [c for c in self.cells if c.method == method]
        return (np.array([c.grid_value for c in cells]),
                np.array([getattr(c, column) for c in cells]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for c in self.cells:
            w.writerow([format_grid(c.grid_value), c.method, f"{c.mean_e_init:.6g}",
                        f"{c.mean_e_ba:.6g}", f"{c.mean_iters:.6g}", c.failures, c.trials])
        return buf.getvalue()


def format_grid(v: float) -> str:
    return f"{v:g}"


def run_trial(matches: Matches, method: str, ba_opts: dict | None = None,
              global_opts: dict | None = None):
    from .multiview import assess
    return assess(matches, method, ba_opts=ba_opts, global_opts=global_opts)


def run_sweep(kind: str, motion_k: int, grid=None, trials: int = 100, base_seed: int = 0,
              n_points: int = 50, sigma: float = 0.5, methods=METHODS,
              ba_opts: dict | None = None, global_opts: dict | None = None,
              cfg: SceneConfig | None = None, progress=None) -> SweepResult:
    """Monte-Carlo sweep over noise level ("noise") or point count ("points").

    Trial i uses seed base_seed + i for the scene and the noise, so every
    grid value sees the same scenes.  Failed trials are counted and left
    out of the means.
    """
    kind = kind.lower()
    if kind not in ("noise", "points"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    if grid is None:
        grid = NOISE_GRID if kind == "noise" else POINT_GRID
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    cells = []
    for value in grid:
        row = {m: SweepCell(value, m) for m in methods}
        for i in range(trials):
            seed = base_seed + i
            npts = int(value) if kind == "points" else n_points
            sig = float(value) if kind == "noise" else sigma
            matches = synthesize(motion_k, npts, sig, seed, cfg)
            for m in methods:
                cell = row[m]
                cell.trials += 1
                try:
                    rep = run_trial(matches, m, ba_opts, global_opts)
                except (DegenerateDataError, SolverFailure, np.linalg.LinAlgError) as exc:
                    log.warning("trial %d (%s=%s, %s) failed: %s", i, kind, value, m, exc)
                    cell.failures += 1
                    continue
                cell.e_init.append(rep.e_init)
                cell.e_ba.append(rep.e_ba)
                cell.iterations.append(rep.iterations)
            if progress:
                progress(value, i)
        cells.extend(row[m] for m in methods)
    return SweepResult(kind, motion_k, cells)


def noise_free_check(motion_k: int, n_points: int, seed: int = 0) -> float:
    """Algebraic cost of the ground-truth F on exact matches (should vanish)."""
    cfg = SceneConfig(n_points=n_points, seed=seed)
    mot = motion(motion_k)
    matches, _ = project_matches(make_scene(cfg), mot, cfg)
    return algebraic_cost(ground_truth_f(mot, cfg), matches)
