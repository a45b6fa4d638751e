"""Built-in Phantom Library

Ready-made analytic phantoms: a modified Shepp-Logan background scaled to
the [-0.02, 0.04] display regime, the original Shepp-Logan head, and the
metal configurations used by the demo configs (a single disk, two disks, a
quarter disk, metal next to bone, and several metal shapes inside the
Shepp-Logan head).

Public Functions:
    shepp_logan_background: Shepp-Logan ellipses, modified or original values
    shepp_logan: Shepp-Logan phantom without metal
    shepp_logan_original: Original-contrast Shepp-Logan phantom, values up to 2
    single_disk: One metal disk in a water disk
    two_disks: Two metal disks in a water disk
    quarter_disk: A metal quarter disk with its corner at the origin
    metal_and_bone: One metal disk and two bone disks
    shepp_logan_with_metals: Shepp-Logan head with metal objects of several shapes
    builtin_phantom: Look up a phantom by name
    builtin_names: Names accepted by builtin_phantom
"""

import math
from typing import Callable

from .exceptions import ConfigurationError
from .phantom_models import Disk, Ellipse, MetalRegion, Phantom, Polygon, Sector


# Attenuation of the water-like body, bone and metal at the reference energy
WATER_VALUE = 0.02
BONE_VALUE = 2.0
METAL_VALUE = 2.0
SCATTER_METAL_VALUE = 50.0
# Spectral slope of metal (per unit energy); alpha * delta = -2 at delta = 0.02
METAL_ALPHA = -100.0

# Modified Shepp-Logan: (value, a, b, x0, y0, angle in degrees)
MODIFIED_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)
# Original Shepp-Logan contrasts: skull 2, brain 1.02, features of +-0.01..0.02
ORIGINAL_SHEPP_LOGAN_VALUES = (2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01)
SHEPP_LOGAN_SCALE = WATER_VALUE


def _water_body(radius: float = 0.8) -> Disk:
    return Disk(center=(0.0, 0.0), radius=radius, value=WATER_VALUE, hull=True)


def shepp_logan_background(scale: float = SHEPP_LOGAN_SCALE, variant: str = 'modified') -> list[Ellipse]:
    """Shepp-Logan ellipses; the outer skull ellipse is the hull.

    `variant` picks the modified (high-contrast brain) or the original
    value column; the ellipse geometry is shared.
    """
    if variant not in ('modified', 'original'):
        raise ConfigurationError(
            message=f"Unknown Shepp-Logan variant '{variant}'. Available: modified, original",
            config_key="phantom"
        )
    values = (row[0] for row in MODIFIED_SHEPP_LOGAN) if variant == 'modified' else ORIGINAL_SHEPP_LOGAN_VALUES
    return [
        Ellipse(
            center=(x0, y0),
            axes=(a, b),
            angle=math.radians(deg),
            value=value * scale,
            hull=(k == 0)
        )
        for k, (value, (_, a, b, x0, y0, deg)) in enumerate(zip(values, MODIFIED_SHEPP_LOGAN))
    ]


def shepp_logan() -> Phantom:
    return Phantom(name="shepp-logan", background=shepp_logan_background())


def shepp_logan_original() -> Phantom:
    """Unscaled original Shepp-Logan head, values up to 2."""
    return Phantom(name="shepp-logan-original", background=shepp_logan_background(scale=1.0, variant='original'))


def single_disk(alpha: float = METAL_ALPHA) -> Phantom:
    """A strictly convex metal region: no streaks expected."""
    metal = MetalRegion(
        label="disk",
        primitives=[Disk(center=(0.25, 0.1), radius=0.1, value=METAL_VALUE)],
        alpha=[alpha]
    )
    return Phantom(name="single-disk", background=[_water_body()], metals=[metal])


def two_disks(alpha: float = METAL_ALPHA, separation: float = 0.6, radius: float = 0.1) -> Phantom:
    """Two metal disks on the x-axis; their four common tangents are the streaks."""
    half = separation / 2.0
    metal = MetalRegion(
        label="pair",
        primitives=[
            Disk(center=(-half, 0.0), radius=radius, value=METAL_VALUE),
            Disk(center=(half, 0.0), radius=radius, value=METAL_VALUE),
        ],
        alpha=[alpha, alpha]
    )
    return Phantom(name="two-disks", background=[_water_body()], metals=[metal])


def quarter_disk(alpha: float = METAL_ALPHA, radius: float = 0.3) -> Phantom:
    """Quarter disk in the first quadrant; its straight edges lie on the axes."""
    metal = MetalRegion(
        label="quarter",
        primitives=[Sector(center=(0.0, 0.0), radius=radius, start=0.0, end=math.pi / 2, value=METAL_VALUE)],
        alpha=[alpha]
    )
    return Phantom(name="quarter-disk", background=[_water_body()], metals=[metal])


def metal_and_bone(alpha: float = METAL_ALPHA) -> Phantom:
    """A dense metal disk on the left and two bone disks on the right."""
    metal = MetalRegion(
        label="implant",
        primitives=[Disk(center=(-0.3, 0.0), radius=0.1, value=SCATTER_METAL_VALUE)],
        alpha=[alpha]
    )
    bones = [
        Disk(center=(0.3, 0.25), radius=0.1, value=BONE_VALUE),
        Disk(center=(0.3, -0.25), radius=0.1, value=BONE_VALUE),
    ]
    return Phantom(name="metal-and-bone", background=[_water_body(), *bones], metals=[metal])


def shepp_logan_with_metals(alpha: float = METAL_ALPHA) -> Phantom:
    """Shepp-Logan head with a disk, a square, an ellipse and a quarter disk of metal."""
    half = 0.05
    cx, cy = 0.35, -0.35
    implants = MetalRegion(
        label="implants",
        primitives=[
            Disk(center=(-0.35, -0.35), radius=0.05, value=METAL_VALUE),
            Polygon(
                vertices=[(cx - half, cy - half), (cx + half, cy - half), (cx + half, cy + half), (cx - half, cy + half)],
                value=METAL_VALUE
            ),
            Ellipse(center=(0.3, 0.5), axes=(0.07, 0.035), angle=0.5, value=METAL_VALUE),
            Sector(center=(-0.35, 0.45), radius=0.08, start=0.0, end=math.pi / 2, value=METAL_VALUE),
        ],
        alpha=[alpha] * 4
    )
    return Phantom(name="shepp-logan-with-metals", background=shepp_logan_background(), metals=[implants])


_BUILTINS: dict[str, Callable[[], Phantom]] = {
    'shepp_logan': shepp_logan,
    'shepp_logan_original': shepp_logan_original,
    'single_disk': single_disk,
    'two_disks': two_disks,
    'quarter_disk': quarter_disk,
    'metal_and_bone': metal_and_bone,
    'shepp_logan_with_metals': shepp_logan_with_metals,
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def builtin_phantom(name: str) -> Phantom:
    """Build a library phantom by name (dashes and underscores are equivalent).

    Raises:
        ConfigurationError: If the name is unknown
    """
    key = name.strip().replace('-', '_')
    if key not in _BUILTINS:
        raise ConfigurationError(
            message=f"Unknown built-in phantom '{name}'. Available: {', '.join(builtin_names())}",
            config_key="phantom",
            source="builtin"
        )
    return _BUILTINS[key]()
