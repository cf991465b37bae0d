"""Synthetic urban-grid scenes: geometry, aerial rasters, pathloss, mobility.

Scenes are axis-aligned building rectangles on an integer-meter grid inside
a width_m x height_m area.  The aerial raster is 5 channels at 1 m/pixel:
RGB top-down view plus one-hot-blob masks for the user and base station.
Pathloss is log-distance with a fixed per-building blockage penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, FileFormatError, SceneGenerationError

RASTER_PX = 128
BLOB_HALF = 1  # masks are (2*BLOB_HALF+1)^2 = 3x3 blobs

# log-distance pathloss constants
PL0_DB = 40.0
REF_DIST_M = 1.0
PATHLOSS_EXP = 2.2
BLOCK_LOSS_DB = 15.0

GROUND_RGB = (0.62, 0.71, 0.55)

LOS_TAG = "los"
NLOS_TAG = "nlos"

LOS_MAX_COVERAGE = 0.10
NLOS_MIN_COVERAGE = 0.30


@dataclass(frozen=True)
class Building:
    x: float
    y: float
    w: float
    h: float
    rgb: tuple[float, float, float]
    height_class: int

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def overlaps(self, other: "Building") -> bool:
        return not (
            self.x + self.w <= other.x
            or other.x + other.w <= self.x
            or self.y + self.h <= other.y
            or other.y + other.h <= self.y
        )


@dataclass(frozen=True)
class Scene:
    width_m: float
    height_m: float
    buildings: tuple[Building, ...]
    bs_pos: tuple[float, float]
    scenario_tag: str

    def coverage_fraction(self) -> float:
        area = sum(b.w * b.h for b in self.buildings)
        return area / (self.width_m * self.height_m)

    def point_free(self, px: float, py: float) -> bool:
        if not (0.0 <= px <= self.width_m and 0.0 <= py <= self.height_m):
            return False
        return not any(b.contains(px, py) for b in self.buildings)

    def check_invariants(self) -> None:
        for b in self.buildings:
            if b.x < 0 or b.y < 0 or b.x + b.w > self.width_m or b.y + b.h > self.height_m:
                raise SceneGenerationError("building outside scene bounds")
        if any(b.contains(*self.bs_pos) for b in self.buildings):
            raise SceneGenerationError("BS position inside a building")
        cov = self.coverage_fraction()
        if self.scenario_tag == LOS_TAG and cov > LOS_MAX_COVERAGE:
            raise SceneGenerationError(f"LoS coverage {cov:.3f} > {LOS_MAX_COVERAGE}")
        if self.scenario_tag == NLOS_TAG and cov < NLOS_MIN_COVERAGE:
            raise SceneGenerationError(f"NLoS coverage {cov:.3f} < {NLOS_MIN_COVERAGE}")


@dataclass(frozen=True)
class UserState:
    pos: tuple[float, float]
    waypoint: tuple[float, float]
    speed: float


@dataclass(frozen=True)
class SceneParams:
    scenario_tag: str = LOS_TAG
    width_m: float = 128.0
    height_m: float = 128.0
    count_min: int = 5
    count_max: int = 8
    side_min: int = 6
    side_max: int = 12


def nlos_params(count: int = 14) -> SceneParams:
    """Dense parameter set reaching the >=30% coverage requirement.

    Few large blocks rather than many small ones: links then cross 0-2
    buildings, keeping the blocked SNR range decision-relevant instead of
    uniformly dead.
    """
    return SceneParams(
        scenario_tag=NLOS_TAG, count_min=count, count_max=count,
        side_min=18, side_max=30,
    )


_PALETTE = [
    (0.45, 0.45, 0.50),
    (0.55, 0.40, 0.35),
    (0.35, 0.40, 0.55),
    (0.60, 0.55, 0.45),
    (0.50, 0.50, 0.40),
]


def generate_scene(params: SceneParams, seed: int) -> Scene:
    """Place non-overlapping integer-grid buildings and a BS; deterministic per seed."""
    from . import rng

    gen = rng.stream(seed, "scene-gen")
    max_restarts = 50
    for _ in range(max_restarts):
        n = int(gen.integers(params.count_min, params.count_max + 1))
        buildings: list[Building] = []
        for _ in range(n):
            placed = False
            for _ in range(200):
                w = int(gen.integers(params.side_min, params.side_max + 1))
                h = int(gen.integers(params.side_min, params.side_max + 1))
                x = int(gen.integers(1, int(params.width_m) - w))
                y = int(gen.integers(1, int(params.height_m) - h))
                cand = Building(
                    float(x), float(y), float(w), float(h),
                    _PALETTE[int(gen.integers(len(_PALETTE)))],
                    int(gen.integers(1, 4)),
                )
                if not any(cand.overlaps(b) for b in buildings):
                    buildings.append(cand)
                    placed = True
                    break
            if not placed:
                break

        bs = None
        for _ in range(1000):
            cand_bs = (float(gen.uniform(2, params.width_m - 2)),
                       float(gen.uniform(2, params.height_m - 2)))
            if not any(b.contains(*cand_bs) for b in buildings):
                bs = cand_bs
                break
        if bs is None:
            raise SceneGenerationError(
                "could not place BS outside buildings within 1000 attempts")

        scene = Scene(params.width_m, params.height_m, tuple(buildings), bs,
                      params.scenario_tag)
        try:
            scene.check_invariants()
        except SceneGenerationError:
            continue
        return scene
    raise SceneGenerationError(
        f"coverage constraint for tag '{params.scenario_tag}' unsatisfiable "
        f"with count range [{params.count_min}, {params.count_max}]")


# ---------------------------------------------------------------- rasters

def _pixel_of(pos_m: float) -> int:
    return int(np.floor(pos_m))


def rasterize_buildings(scene: Scene, res: int = RASTER_PX) -> np.ndarray:
    """(3, res, res) RGB plane: buildings over ground color, 1 m/pixel."""
    rgb = np.empty((3, res, res), dtype=np.float64)
    for c in range(3):
        rgb[c].fill(GROUND_RGB[c])
    for b in scene.buildings:
        # pixel centers (j+0.5, i+0.5) inside the rectangle
        c0 = max(0, int(np.ceil(b.x - 0.5)))
        c1 = min(res, int(np.ceil(b.x + b.w - 0.5)))
        r0 = max(0, int(np.ceil(b.y - 0.5)))
        r1 = min(res, int(np.ceil(b.y + b.h - 0.5)))
        for c in range(3):
            rgb[c, r0:r1, c0:c1] = b.rgb[c]
    return rgb


def _mask_plane(pos: tuple[float, float], res: int) -> np.ndarray:
    m = np.zeros((res, res), dtype=np.float64)
    cj = min(max(_pixel_of(pos[0]), 0), res - 1)
    ci = min(max(_pixel_of(pos[1]), 0), res - 1)
    m[max(0, ci - BLOB_HALF):ci + BLOB_HALF + 1,
      max(0, cj - BLOB_HALF):cj + BLOB_HALF + 1] = 1.0
    return m


def render_aerial(scene: Scene, user: UserState,
                  base_rgb: np.ndarray | None = None) -> np.ndarray:
    """5-channel raster (RGB, user mask, BS mask), shape (5, 128, 128).

    Pass a precomputed base_rgb (from rasterize_buildings) to skip redrawing
    static geometry every slot.
    """
    res = RASTER_PX
    if base_rgb is None:
        base_rgb = rasterize_buildings(scene, res)
    out = np.empty((5, res, res), dtype=np.float64)
    out[:3] = base_rgb
    out[3] = _mask_plane(user.pos, res)
    out[4] = _mask_plane(scene.bs_pos, res)
    return out


# ---------------------------------------------------------------- pathloss

def _segment_hits_rect(p0, p1, b: Building) -> bool:
    """Liang-Barsky: does the open segment p0-p1 pass through the rectangle?"""
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, x0 - b.x),
        (dx, b.x + b.w - x0),
        (-dy, y0 - b.y),
        (dy, b.y + b.h - y0),
    ):
        if p == 0.0:
            if q < 0.0:
                return False
        else:
            t = q / p
            if p < 0.0:
                if t > t1:
                    return False
                t0 = max(t0, t)
            else:
                if t < t0:
                    return False
                t1 = min(t1, t)
    return t0 < t1


def count_blockages(scene: Scene, p0, p1) -> int:
    return sum(_segment_hits_rect(p0, p1, b) for b in scene.buildings)


def pathloss_db(scene: Scene, bs: tuple[float, float], user: tuple[float, float]) -> float:
    """Log-distance pathloss plus 15 dB per building crossed by the link."""
    d = float(np.hypot(bs[0] - user[0], bs[1] - user[1]))
    n_block = count_blockages(scene, bs, user)
    return (PL0_DB
            + 10.0 * PATHLOSS_EXP * np.log10(max(d, REF_DIST_M) / REF_DIST_M)
            + n_block * BLOCK_LOSS_DB)


# ---------------------------------------------------------------- mobility

def random_free_point(scene: Scene, gen: np.random.Generator,
                      margin: float = 1.0) -> tuple[float, float]:
    for _ in range(10_000):
        p = (float(gen.uniform(margin, scene.width_m - margin)),
             float(gen.uniform(margin, scene.height_m - margin)))
        if scene.point_free(*p):
            return p
    raise SceneGenerationError("no free point found for user placement")


def init_user(scene: Scene, gen: np.random.Generator, speed: float = 1.0) -> UserState:
    return UserState(random_free_point(scene, gen),
                     random_free_point(scene, gen), speed)


def step_mobility(scene: Scene, user: UserState, dt: float,
                  gen: np.random.Generator) -> UserState:
    """Random-waypoint step: advance toward the waypoint, redraw on arrival."""
    if dt <= 0:
        raise ContractError("dt must be positive")
    px, py = user.pos
    wx, wy = user.waypoint
    dist = float(np.hypot(wx - px, wy - py))
    step = user.speed * dt
    if dist <= step or dist == 0.0:
        new_wp = random_free_point(scene, gen)
        return replace(user, pos=(wx, wy), waypoint=new_wp)
    f = step / dist
    return replace(user, pos=(px + f * (wx - px), py + f * (wy - py)))


# ---------------------------------------------------------------- file format

SCENE_HEADER = "eiw-scene v1"


def save_scene(scene: Scene, path: str) -> None:
    """Line-oriented text format; see header comment written to the file."""
    lines = [
        SCENE_HEADER,
        "# building records: x y w h r g b height_class; then bs x y; then tag",
        f"size {scene.width_m:.17g} {scene.height_m:.17g}",
    ]
    for b in scene.buildings:
        lines.append(
            "building "
            f"{b.x:.17g} {b.y:.17g} {b.w:.17g} {b.h:.17g} "
            f"{b.rgb[0]:.17g} {b.rgb[1]:.17g} {b.rgb[2]:.17g} {b.height_class}")
    lines.append(f"bs {scene.bs_pos[0]:.17g} {scene.bs_pos[1]:.17g}")
    lines.append(f"tag {scene.scenario_tag}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_scene(path: str) -> Scene:
    with open(path, encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != SCENE_HEADER:
        raise FileFormatError(f"{path}: missing '{SCENE_HEADER}' header")
    width = height = None
    buildings: list[Building] = []
    bs = None
    tag = None
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "size":
            width, height = float(parts[1]), float(parts[2])
        elif parts[0] == "building":
            vals = [float(v) for v in parts[1:8]]
            buildings.append(Building(vals[0], vals[1], vals[2], vals[3],
                                      (vals[4], vals[5], vals[6]), int(parts[8])))
        elif parts[0] == "bs":
            bs = (float(parts[1]), float(parts[2]))
        elif parts[0] == "tag":
            tag = parts[1]
        else:
            raise FileFormatError(f"{path}: unknown record '{parts[0]}'")
    if width is None or bs is None or tag is None:
        raise FileFormatError(f"{path}: incomplete scene file")
    return Scene(width, height, tuple(buildings), bs, tag)
