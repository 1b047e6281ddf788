"""3D scalar volumes: MetaImage-style I/O, trilinear sampling, synthetic phantoms."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import mesh as meshmod

ELEMENT_TYPES = {
    "MET_UCHAR": np.uint8,
    "MET_SHORT": np.int16,
    "MET_FLOAT": np.float32,
}
ELEMENT_NAMES = {np.dtype(v): k for k, v in ELEMENT_TYPES.items()}


class VolumeError(Exception):
    pass


@dataclass(frozen=True)
class Volume3:
    """Dense 3D scalar grid with physical spacing.

    ``data`` is indexed [x, y, z]; the on-disk payload is x-fastest
    little-endian, i.e. Fortran order of this array.
    """

    data: np.ndarray          # shape (nx, ny, nz), dtype uint8/int16/float32
    spacing: np.ndarray       # (3,) mm per voxel, > 0
    origin: np.ndarray        # (3,) mm

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data))
        object.__setattr__(self, "spacing", np.asarray(self.spacing, dtype=np.float64))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        if self.data.ndim != 3:
            raise VolumeError(f"data must be 3D, got shape {self.data.shape}")
        if self.data.dtype not in ELEMENT_NAMES and self.data.dtype != np.float64:
            # float64 is allowed in memory (analysis volumes); on-disk dtypes
            # are checked in write_volume
            raise VolumeError(f"unsupported element kind {self.data.dtype}")
        if self.spacing.shape != (3,) or np.any(self.spacing <= 0):
            raise VolumeError("spacing must be 3 strictly positive reals")
        if self.origin.shape != (3,):
            raise VolumeError("origin must have 3 components")
        self.data.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def world(self, p) -> np.ndarray:
        """Voxel index (possibly fractional) -> world mm."""
        return self.origin + np.asarray(p, dtype=np.float64) * self.spacing

    def voxel(self, p) -> np.ndarray:
        """World mm -> fractional voxel index."""
        return (np.asarray(p, dtype=np.float64) - self.origin) / self.spacing

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """World-space bounding box of voxel centers (min, max)."""
        return self.origin.copy(), self.world(np.array(self.dims) - 1.0)


def read_volume(path: str) -> Volume3:
    """Read a MetaImage-style header (.mhd) plus raw payload."""
    header: dict[str, str] = {}
    with open(path, "r") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise VolumeError(f"malformed header line: {line!r}")
            key, val = line.split("=", 1)
            header[key.strip()] = val.strip()

    for req in ("NDims", "DimSize", "ElementType", "ElementDataFile"):
        if req not in header:
            raise VolumeError(f"missing header key {req}")
    if header["NDims"] != "3":
        raise VolumeError(f"NDims must be 3, got {header['NDims']}")
    try:
        dims = tuple(int(t) for t in header["DimSize"].split())
    except ValueError as e:
        raise VolumeError(f"bad DimSize: {header['DimSize']!r}") from e
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise VolumeError(f"bad DimSize: {header['DimSize']!r}")
    spacing = np.array([float(t) for t in header.get("ElementSpacing", "1 1 1").split()])
    origin = np.array([float(t) for t in header.get("Offset", "0 0 0").split()])
    etype = header["ElementType"]
    if etype not in ELEMENT_TYPES:
        raise VolumeError(f"unsupported ElementType {etype}")
    dtype = np.dtype(ELEMENT_TYPES[etype]).newbyteorder("<")

    datafile = header["ElementDataFile"]
    if datafile == "LOCAL":
        raise VolumeError("LOCAL payloads not supported; use a separate raw file")
    raw_path = os.path.join(os.path.dirname(os.path.abspath(path)), datafile)
    payload = np.fromfile(raw_path, dtype=dtype)
    n = dims[0] * dims[1] * dims[2]
    if payload.size != n:
        raise VolumeError(
            f"payload has {payload.size} elements, header declares {n}"
        )
    data = payload.astype(dtype.newbyteorder("=")).reshape(dims, order="F")
    return Volume3(data=data, spacing=spacing, origin=origin)


def write_volume(v: Volume3, path: str) -> None:
    """Write .mhd header + sibling .raw payload (little-endian, x-fastest)."""
    if not path.endswith(".mhd"):
        path = path + ".mhd"
    raw_name = os.path.basename(path)[:-4] + ".raw"
    raw_path = os.path.join(os.path.dirname(os.path.abspath(path)), raw_name)
    if v.data.dtype not in ELEMENT_NAMES:
        raise VolumeError(
            f"{v.data.dtype} volumes cannot be written; cast to float32 first")
    dims = v.dims
    lines = [
        "NDims = 3",
        f"DimSize = {dims[0]} {dims[1]} {dims[2]}",
        f"ElementSpacing = {v.spacing[0]:.17g} {v.spacing[1]:.17g} {v.spacing[2]:.17g}",
        f"Offset = {v.origin[0]:.17g} {v.origin[1]:.17g} {v.origin[2]:.17g}",
        f"ElementType = {ELEMENT_NAMES[v.data.dtype]}",
        f"ElementDataFile = {raw_name}",
    ]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    v.data.ravel(order="F").astype(v.data.dtype.newbyteorder("<")).tofile(raw_path)


def trilinear_sample(v: Volume3, points) -> np.ndarray:
    """Trilinear interpolation at world points, clamped at the grid boundary.

    ``points``: (3,) or (n, 3) world mm. Returns scalar or (n,) float64.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    q = (pts - v.origin) / v.spacing
    dims = np.array(v.dims)
    q = np.clip(q, 0.0, dims - 1.0)
    i0 = np.clip(np.floor(q).astype(np.int64), 0, np.maximum(dims - 2, 0))
    f = q - i0
    i1 = np.minimum(i0 + 1, dims - 1)
    d = v.data.astype(np.float64)
    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    x1, y1, z1 = i1[:, 0], i1[:, 1], i1[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c000 = d[x0, y0, z0]; c100 = d[x1, y0, z0]
    c010 = d[x0, y1, z0]; c110 = d[x1, y1, z0]
    c001 = d[x0, y0, z1]; c101 = d[x1, y0, z1]
    c011 = d[x0, y1, z1]; c111 = d[x1, y1, z1]
    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    if np.asarray(points).ndim == 1:
        return float(out[0])
    return out


# ---------------------------------------------------------------------------
# Synthetic phantoms

PHANTOM_KEYS = (
    "seed", "dims", "spacing", "radius_a", "radius_b", "cartilage_thickness_mm",
    "superellipse_power", "perturb_amp", "gap_mm", "intensity_bone",
    "intensity_cartilage", "intensity_background", "noise_sigma",
    "lesion_count", "lesion_radius_mm", "mesh_subdivisions",
)

LABEL_BACKGROUND = 0
LABEL_BONE_A = 1
LABEL_CARTILAGE_A = 2
LABEL_BONE_B = 3
LABEL_CARTILAGE_B = 4


@dataclass
class PhantomSpec:
    """Two-object phantom: each object has an inner bone and outer cartilage surface.

    Object 0 sits above object 1 along z, separated by ``gap_mm`` between
    the facing cartilage rims.
    """

    seed: int = 0
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (0.5, 0.5, 0.5)
    radius_a: float = 8.0          # object 0 bone radius, mm
    radius_b: float = 7.0          # object 1 bone radius, mm
    cartilage_thickness_mm: float = 2.0
    superellipse_power: float = 2.5
    perturb_amp: float = 0.06      # relative band-limited radial perturbation
    gap_mm: float = 1.5
    intensity_bone: float = 20.0
    intensity_cartilage: float = 80.0
    intensity_background: float = 40.0
    noise_sigma: float = 0.0
    lesion_count: int = 0
    lesion_radius_mm: float = 2.0
    mesh_subdivisions: int = 3

    def to_file(self, path: str) -> None:
        with open(path, "w") as f:
            for k in PHANTOM_KEYS:
                val = getattr(self, k)
                if isinstance(val, tuple):
                    val = " ".join(str(x) for x in val)
                f.write(f"{k} = {val}\n")

    @classmethod
    def from_file(cls, path: str) -> "PhantomSpec":
        kv = {}
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
        spec = cls()
        for k, v in kv.items():
            if k not in PHANTOM_KEYS:
                raise VolumeError(f"unknown phantom key {k}")
            cur = getattr(spec, k)
            if isinstance(cur, tuple):
                parts = v.split()
                setattr(spec, k, tuple(type(cur[0])(p) for p in parts))
            else:
                setattr(spec, k, type(cur)(v))
        return spec


@dataclass
class Phantom:
    volume: Volume3
    truth_surfaces: list   # (object id, surface id, TriangleMesh); surface 0=bone, 1=cartilage
    labels: Volume3        # uint8 label volume (LABEL_* constants)
    lesion_mask: Volume3 | None = None
    spec: PhantomSpec | None = None


class _RadialShape:
    """Star-shaped surface: radius as a band-limited function of direction."""

    def __init__(self, center, base_radius, power, perturb_amp, rng, z_scale=1.0):
        self.center = np.asarray(center, dtype=np.float64)
        self.base_radius = base_radius
        self.power = power
        self.z_scale = z_scale
        # low-order directional cosine bumps, seeded
        self.freqs = rng.uniform(1.0, 3.0, size=(4, 3))
        self.phases = rng.uniform(0.0, 2 * np.pi, size=4)
        self.amps = perturb_amp * rng.uniform(0.3, 1.0, size=4)
        self.amps /= max(1.0, self.amps.sum() / max(perturb_amp, 1e-12))

    def radius(self, dirs: np.ndarray) -> np.ndarray:
        """Radius along unit directions (n, 3)."""
        d = np.atleast_2d(dirs)
        # superellipsoid-style directional modulation
        p = self.power
        aniso = np.abs(d[:, 0]) ** p + np.abs(d[:, 1]) ** p + (np.abs(d[:, 2]) / self.z_scale) ** p
        r = self.base_radius / np.maximum(aniso, 1e-9) ** (1.0 / p)
        pert = np.zeros(len(d))
        for k in range(len(self.amps)):
            pert += self.amps[k] * np.cos(d @ self.freqs[k] * np.pi + self.phases[k])
        return r * (1.0 + pert)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        """Radial signed distance (negative inside). Approximate but smooth."""
        p = np.atleast_2d(pts) - self.center
        rho = np.linalg.norm(p, axis=1)
        safe = np.maximum(rho, 1e-9)
        dirs = p / safe[:, None]
        return rho - self.radius(dirs)

    def mesh(self, subdivisions: int) -> "meshmod.TriangleMesh":
        verts, faces = meshmod.icosphere(subdivisions)
        r = self.radius(verts)
        return meshmod.TriangleMesh(vertices=self.center + verts * r[:, None], faces=faces)


def _object_shapes(spec: PhantomSpec, rng_geom: np.random.Generator):
    dims = np.array(spec.dims)
    spacing = np.array(spec.spacing)
    extent = (dims - 1) * spacing
    cx, cy = extent[0] / 2, extent[1] / 2
    ra_out = spec.radius_a + spec.cartilage_thickness_mm
    rb_out = spec.radius_b + spec.cartilage_thickness_mm
    # facing along z: object 0 on top, object 1 below
    mid = extent[2] / 2
    c0 = np.array([cx, cy, mid + ra_out + spec.gap_mm / 2])
    c1 = np.array([cx, cy, mid - rb_out - spec.gap_mm / 2])
    shapes = []
    for center, r_bone in ((c0, spec.radius_a), (c1, spec.radius_b)):
        bone = _RadialShape(center, r_bone, spec.superellipse_power,
                            spec.perturb_amp, rng_geom)
        outer = _RadialShape(center, r_bone + spec.cartilage_thickness_mm,
                             spec.superellipse_power, 0.0, rng_geom)
        # cartilage follows the bone's perturbation so thickness stays near-constant
        outer.freqs, outer.phases, outer.amps = bone.freqs, bone.phases, bone.amps * (
            r_bone / (r_bone + spec.cartilage_thickness_mm))
        shapes.append((bone, outer))
    return shapes


def make_phantom(spec: PhantomSpec) -> Phantom:
    """Render a two-object phantom with analytic truth surfaces.

    Deterministic given ``spec.seed``. Raises if the two objects overlap.
    """
    rng = np.random.default_rng(spec.seed)
    rng_geom = np.random.default_rng(spec.seed + 1)
    shapes = _object_shapes(spec, rng_geom)
    if spec.gap_mm < 0:
        raise VolumeError("gap_mm must be >= 0")

    dims = spec.dims
    spacing = np.array(spec.spacing)
    origin = np.zeros(3)
    xs = np.arange(dims[0]) * spacing[0]
    ys = np.arange(dims[1]) * spacing[1]
    zs = np.arange(dims[2]) * spacing[2]
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    blend = float(np.min(spacing))  # 1-voxel partial-volume shell
    img = np.full(len(pts), spec.intensity_background, dtype=np.float64)
    labels = np.zeros(len(pts), dtype=np.uint8)

    def smoothstep(sd):
        # 1 inside, 0 outside, linear ramp across the blend shell
        return np.clip(0.5 - sd / blend, 0.0, 1.0)

    sd_bone, sd_outer = [], []
    for bone, outer in shapes:
        sd_bone.append(bone.signed_distance(pts))
        sd_outer.append(outer.signed_distance(pts))
    if np.any((sd_outer[0] < 0) & (sd_outer[1] < 0)):
        raise VolumeError("phantom objects overlap; increase gap_mm or shrink radii")

    truth = []
    for obj, (bone, outer) in enumerate(shapes):
        in_outer = smoothstep(sd_outer[obj])
        in_bone = smoothstep(sd_bone[obj])
        # background -> cartilage -> bone as we move inward
        img = img * (1 - in_outer) + spec.intensity_cartilage * in_outer
        img = img * (1 - in_bone) + spec.intensity_bone * in_bone
        lab_bone = LABEL_BONE_A if obj == 0 else LABEL_BONE_B
        lab_cart = LABEL_CARTILAGE_A if obj == 0 else LABEL_CARTILAGE_B
        labels[(sd_outer[obj] < 0) & (sd_bone[obj] >= 0)] = lab_cart
        labels[sd_bone[obj] < 0] = lab_bone
        truth.append((obj, 0, bone.mesh(spec.mesh_subdivisions)))
        truth.append((obj, 1, outer.mesh(spec.mesh_subdivisions)))

    lesion_mask = None
    if spec.lesion_count > 0:
        lm = np.zeros(len(pts), dtype=np.uint8)
        placed = 0
        attempts = 0
        centers = []
        while placed < spec.lesion_count and attempts < 200:
            attempts += 1
            obj = int(rng.integers(0, 2))
            bone, outer = shapes[obj]
            # sample a rim point on the facing side of the cartilage surface
            theta = rng.uniform(0, 2 * np.pi)
            zsign = -1.0 if obj == 0 else 1.0  # facing the other object
            tilt = rng.uniform(0.55, 0.95)
            d = np.array([np.cos(theta) * np.sqrt(1 - tilt**2),
                          np.sin(theta) * np.sqrt(1 - tilt**2),
                          zsign * tilt])
            d /= np.linalg.norm(d)
            center = outer.center + d * outer.radius(d[None, :])[0]
            if centers and min(np.linalg.norm(center - c) for c in centers) < 2.5 * spec.lesion_radius_mm:
                continue
            dist = np.linalg.norm(pts - center, axis=1)
            hit = (dist < spec.lesion_radius_mm) & (labels == (LABEL_CARTILAGE_A if obj == 0 else LABEL_CARTILAGE_B))
            if hit.sum() == 0:
                continue
            lm[hit] = 1
            img[hit] = spec.intensity_background
            centers.append(center)
            placed += 1
        if placed < spec.lesion_count:
            raise VolumeError("could not place requested lesion count")
        lesion_mask = Volume3(lm.reshape(dims), spacing, origin)

    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)

    vol = Volume3(img.reshape(dims).astype(np.float32), spacing, origin)
    labvol = Volume3(labels.reshape(dims), spacing, origin)
    return Phantom(volume=vol, truth_surfaces=truth, labels=labvol,
                   lesion_mask=lesion_mask, spec=spec)
