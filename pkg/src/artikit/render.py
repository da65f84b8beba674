"""Minimal deterministic rasterizer: orthographic, z-buffered, flat Lambertian."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


BACKGROUND = 255
LIGHT_DIR = np.array([0.4, 0.8, 0.6]) / np.linalg.norm([0.4, 0.8, 0.6])
AMBIENT = 0.2
DEFAULT_ALBEDO = (0.75, 0.75, 0.75)


@dataclass(frozen=True)
class Camera:
    """Orthographic camera orbiting ``target``; angles in degrees, y up."""

    azimuth: float = 30.0
    elevation: float = 20.0
    scale: float = 2.0  # world width covered by the image
    width: int = 512
    height: int = 512
    target: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, up, toward-camera) unit vectors."""
        az, el = np.radians(self.azimuth), np.radians(self.elevation)
        d = np.array([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])
        world_up = np.array([0.0, 1.0, 0.0])
        right = np.cross(-d, world_up)
        if np.linalg.norm(right) < 1e-12:  # looking straight up or down
            right = np.array([1.0, 0.0, 0.0])
        right /= np.linalg.norm(right)
        up = np.cross(right, -d)
        return right, up, d

    def project(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pixel x, pixel y (continuous, y down) and depth (larger is nearer)."""
        right, up, d = self.basis()
        rel = np.asarray(points, dtype=float) - np.asarray(self.target)
        px = (rel @ right / self.scale + 0.5) * self.width
        py = (0.5 - rel @ up / self.scale) * self.height
        return px, py, rel @ d


@dataclass(frozen=True, eq=False)
class Image:
    width: int
    height: int
    rgb: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        rgb = np.asarray(self.rgb, dtype=np.uint8)
        if rgb.shape != (self.height, self.width, 3):
            raise ValueError(f"buffer shape {rgb.shape} != {(self.height, self.width, 3)}")
        object.__setattr__(self, "rgb", rgb)

    @classmethod
    def blank(cls, width: int, height: int, value: int = BACKGROUND) -> Image:
        return cls(width, height, np.full((height, width, 3), value, dtype=np.uint8))

    def to_ppm(self) -> bytes:
        return b"P6\n%d %d\n255\n" % (self.width, self.height) + self.rgb.tobytes()

    def write_ppm(self, path) -> None:
        Path(path).write_bytes(self.to_ppm())

    def write_png(self, path) -> None:
        from PIL import Image as PILImage

        PILImage.fromarray(self.rgb, "RGB").save(path)


def read_ppm(path) -> Image:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValueError("only binary 8-bit PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    rgb = np.frombuffer(data[pos:pos + 3 * w * h], dtype=np.uint8).reshape(h, w, 3)
    return Image(w, h, rgb.copy())


def rasterize(meshes, colors=None, camera: Camera | None = None) -> Image:
    """Render meshes over a white background; ``colors`` holds one rgb albedo in [0,1] per mesh."""
    camera = camera or Camera()
    W, H = camera.width, camera.height
    color = np.full((H, W, 3), float(BACKGROUND))
    zbuf = np.full((H, W), -np.inf)
    _, _, toward = camera.basis()
    for idx, mesh in enumerate(meshes):
        if mesh.is_empty:
            continue
        albedo = np.asarray(colors[idx] if colors is not None else DEFAULT_ALBEDO, dtype=float)
        px, py, depth = camera.project(mesh.vertices)
        tris = mesh.triangles
        normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        for f, (a, b, c) in enumerate(mesh.faces):
            n = normals[f]
            nn = np.linalg.norm(n)
            if nn == 0:
                continue
            n = n / nn
            if n @ toward < 0:
                n = -n
            shade = AMBIENT + (1.0 - AMBIENT) * max(0.0, float(n @ LIGHT_DIR))
            xs, ys = px[[a, b, c]], py[[a, b, c]]
            twice_area = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (xs[2] - xs[0])
            if twice_area == 0:  # edge-on
                continue
            x0 = max(int(np.ceil(xs.min() - 0.5)), 0)
            x1 = min(int(np.floor(xs.max() - 0.5)), W - 1)
            y0 = max(int(np.ceil(ys.min() - 0.5)), 0)
            y1 = min(int(np.floor(ys.max() - 0.5)), H - 1)
            if x0 > x1 or y0 > y1:
                continue
            gx, gy = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)
            e0 = (xs[1] - xs[0]) * (gy - ys[0]) - (ys[1] - ys[0]) * (gx - xs[0])
            e1 = (xs[2] - xs[1]) * (gy - ys[1]) - (ys[2] - ys[1]) * (gx - xs[1])
            e2 = (xs[0] - xs[2]) * (gy - ys[2]) - (ys[0] - ys[2]) * (gx - xs[2])
            inside = ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))
            if not np.any(inside):
                continue
            zs = depth[[a, b, c]]
            z = (e1 * zs[0] + e2 * zs[1] + e0 * zs[2]) / twice_area
            block = zbuf[y0:y1 + 1, x0:x1 + 1]
            win = inside & (z > block)
            block[win] = z[win]
            color[y0:y1 + 1, x0:x1 + 1][win] = 255.0 * albedo * shade
    return Image(W, H, np.rint(color).astype(np.uint8))
