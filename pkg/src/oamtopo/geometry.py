"""Array topologies: construction, validation, element positions, projection.

Every topology is an immutable :class:`ArrayTopology`. Element positions follow a
fixed ring-major ordering (ring or sub-UCA first, then element index) so that
channel and beamforming matrices built elsewhere index consistently.
"""

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.spatial.distance import pdist, squareform

from .errors import GeometryError, DomainError

DEFAULT_CARRIER_HZ = 5.8e9
DEFAULT_MIN_SPACING = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ / 2.0
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# slack for positions landing exactly on the aperture boundary
_RADIUS_TOL = 1e-9
_SPACING_TOL = 1e-12


class Family(str, enum.Enum):
    UCA = "UCA"
    CUCA = "CUCA"
    FUCA = "FUCA"
    URA = "URA"
    RLA = "RLA"
    SPIRAL = "SPIRAL"
    QFUCA_LAYOUT = "QFUCA_LAYOUT"

    @property
    def transmits(self):
        """Whether the family supports the OAM transmission scheme."""
        return self in (Family.UCA, Family.CUCA, Family.FUCA)


AUXILIARY_FAMILIES = (Family.URA, Family.RLA, Family.SPIRAL, Family.QFUCA_LAYOUT)


@dataclass(frozen=True)
class Region:
    """Disk-shaped feasible moving region in a plane ``z = plane_offset``."""

    radius: float
    plane_offset: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"region radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class RingSpec:
    """One uniform circular ring.

    `rotation` is the absolute azimuth of the ring's first element; for rings
    generated from a common rotation step sigma, ring n (1-based) carries n*sigma.
    """

    radius: float
    element_count: int
    rotation: float = 0.0

    def azimuths(self):
        return 2.0 * np.pi * np.arange(self.element_count) / self.element_count + self.rotation


@dataclass(frozen=True)
class FucaSpec:
    """Fractal UCA: `subarray_count` sub-UCAs centred on a primary circle."""

    subarray_count: int
    elements_per_subarray: int
    primary_radius: float
    secondary_radius: float
    subarray_rotation: float = 0.0

    @property
    def aperture(self):
        return self.primary_radius + self.secondary_radius

    @property
    def degenerate(self):
        """A single sub-UCA at the origin, i.e. a plain UCA."""
        return self.subarray_count == 1 and self.primary_radius == 0.0

    def center_azimuth(self, n):
        return 2.0 * np.pi * n / self.subarray_count

    def center(self, n):
        phi = self.center_azimuth(n)
        return np.array([self.primary_radius * np.cos(phi), self.primary_radius * np.sin(phi)])

    def local_azimuths(self, n):
        K = self.elements_per_subarray
        return 2.0 * np.pi * np.arange(K) / K + (n + 1) * self.subarray_rotation


@dataclass(frozen=True)
class Subarray:
    """A uniform circular group of elements: the unit OAM modes are defined on."""

    center: tuple
    radius: float
    azimuths: np.ndarray = field(compare=False, repr=False)

    @property
    def element_count(self):
        return len(self.azimuths)

    @property
    def rotation(self):
        return float(self.azimuths[0])

    def positions_xy(self):
        return np.column_stack([
            self.center[0] + self.radius * np.cos(self.azimuths),
            self.center[1] + self.radius * np.sin(self.azimuths),
        ])


@dataclass(frozen=True)
class Violation:
    constraint: str
    indices: tuple
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def constraints(self):
        return sorted({v.constraint for v in self.violations})

    def to_dict(self):
        return {
            "valid": self.ok,
            "violations": [
                {"constraint": v.constraint, "indices": list(v.indices), "detail": v.detail}
                for v in self.violations
            ],
        }


@dataclass(frozen=True)
class ArrayTopology:
    """Tagged geometric description of an array; positions derive from it."""

    family: Family
    region: Region
    rings: tuple = ()
    fuca: Optional[FucaSpec] = None
    aux: tuple = ()
    _xy: np.ndarray = field(default=None, compare=False, repr=False)
    _groups: tuple = field(default=(), compare=False, repr=False)

    @property
    def element_count(self):
        return len(self._xy)

    @property
    def subarrays(self):
        """Ring-major tuple of :class:`Subarray`; empty for auxiliary layouts."""
        return tuple(g for g in self._groups if isinstance(g, Subarray))

    @property
    def group_sizes(self):
        if self.family.transmits:
            return tuple(s.element_count for s in self.subarrays)
        return tuple(n for n in self._groups)

    @property
    def ring_count(self):
        return len(self.subarrays)

    @property
    def elements_per_ring(self):
        """Common per-ring element count, or None if rings differ."""
        counts = {s.element_count for s in self.subarrays}
        return counts.pop() if len(counts) == 1 else None

    @property
    def aperture(self):
        return float(np.max(np.hypot(self._xy[:, 0], self._xy[:, 1]))) if len(self._xy) else 0.0

    @property
    def label(self):
        n = self.element_count
        if self.family is Family.UCA:
            return f"UCA-{n}"
        if self.family is Family.CUCA:
            K = self.elements_per_ring
            return f"CUCA {self.ring_count}x{K if K else '?'}"
        if self.family is Family.FUCA:
            return f"FUCA {self.fuca.subarray_count}x{self.fuca.elements_per_subarray}"
        if self.family is Family.URA:
            s = int(round(math.sqrt(n)))
            return f"URA {s}x{s}"
        if self.family is Family.QFUCA_LAYOUT:
            return f"QFUCA-{n}"
        return f"{self.family.value}-{n}"

    def parameters(self):
        """JSON-ready parameter dictionary of the family."""
        if self.family in (Family.UCA, Family.CUCA):
            return {"rings": [
                {"radius": r.radius, "element_count": r.element_count, "rotation": r.rotation}
                for r in self.rings
            ]}
        if self.family is Family.FUCA:
            f = self.fuca
            return {
                "subarray_count": f.subarray_count,
                "elements_per_subarray": f.elements_per_subarray,
                "primary_radius": f.primary_radius,
                "secondary_radius": f.secondary_radius,
                "subarray_rotation": f.subarray_rotation,
            }
        return dict(self.aux)

    def rotated(self, angle):
        """Copy rotated rigidly about the boresight axis by `angle` radians."""
        if self.family in (Family.UCA, Family.CUCA):
            rings = [RingSpec(r.radius, r.element_count, r.rotation + angle) for r in self.rings]
            return _assemble_rings(self.family, rings, self.region)
        if self.family is Family.FUCA:
            groups = tuple(
                Subarray(_rotate_point(g.center, angle), g.radius, g.azimuths + angle)
                for g in self._groups
            )
            xy = np.vstack([g.positions_xy() for g in groups])
            return ArrayTopology(Family.FUCA, self.region, fuca=self.fuca,
                                 aux=(("global_rotation", angle),), _xy=xy, _groups=groups)
        c, s = math.cos(angle), math.sin(angle)
        xy = self._xy @ np.array([[c, s], [-s, c]])
        return ArrayTopology(self.family, self.region, aux=self.aux, _xy=xy, _groups=self._groups)


def _rotate_point(p, angle):
    c, s = math.cos(angle), math.sin(angle)
    return (c * p[0] - s * p[1], s * p[0] + c * p[1])


def _assemble_rings(family, rings, region):
    groups = tuple(Subarray((0.0, 0.0), r.radius, r.azimuths()) for r in rings)
    xy = np.vstack([g.positions_xy() for g in groups]) if groups else np.zeros((0, 2))
    return ArrayTopology(family, region, rings=tuple(rings), _xy=xy, _groups=groups)


def element_positions(topology):
    """Element coordinates as an ``(n, 3)`` array, ring-major, z = region plane."""
    xy = topology._xy
    z = np.full((len(xy), 1), topology.region.plane_offset)
    return np.hstack([xy, z])


def validate(topology, min_spacing=DEFAULT_MIN_SPACING, max_radius=None, max_elements=None):
    """Check a topology against its constraints.

    Violations are returned as data; an empty report means the topology is valid.
    Constraint tags: ``distinct-radii`` and ``ring-parity`` for rings,
    ``fuca-radii`` for the sub-UCA/primary radius ordering, ``aperture``,
    ``spacing`` and ``budget`` for every family.
    """
    if max_radius is None:
        max_radius = topology.region.radius
    found = []

    if topology.family in (Family.UCA, Family.CUCA):
        radii = [r.radius for r in topology.rings]
        for i in range(len(radii)):
            if radii[i] <= 0:
                found.append(Violation("positive-radius", (i,), f"ring {i} radius {radii[i]}"))
            for j in range(i + 1, len(radii)):
                if math.isclose(radii[i], radii[j], rel_tol=0.0, abs_tol=1e-12):
                    found.append(Violation("distinct-radii", (i, j),
                                           f"rings {i} and {j} share radius {radii[i]}"))
        for i, r in enumerate(topology.rings):
            if r.element_count < 2 or r.element_count % 2:
                found.append(Violation("ring-parity", (i,),
                                       f"ring {i} has {r.element_count} elements; need even >= 2"))

    if topology.family is Family.FUCA:
        f = topology.fuca
        if not f.degenerate and not f.secondary_radius < f.primary_radius:
            found.append(Violation("fuca-radii", (),
                                   f"secondary radius {f.secondary_radius} must be < "
                                   f"primary radius {f.primary_radius}"))
        if f.secondary_radius <= 0:
            found.append(Violation("positive-radius", (), "secondary radius must be positive"))
        K = f.elements_per_subarray
        if K < 2 or K % 2:
            found.append(Violation("ring-parity", (), f"{K} elements per sub-UCA; need even >= 2"))

    xy = topology._xy
    r = np.hypot(xy[:, 0], xy[:, 1])
    outside = np.flatnonzero(r > max_radius + _RADIUS_TOL)
    if outside.size:
        found.append(Violation("aperture", tuple(int(i) for i in outside),
                               f"{outside.size} element(s) beyond radius {max_radius}"))

    if len(xy) > 1 and min_spacing > 0:
        dist = squareform(pdist(xy))
        ii, jj = np.nonzero(np.triu(dist < min_spacing - _SPACING_TOL, k=1))
        if ii.size:
            pairs = tuple((int(a), int(b)) for a, b in zip(ii, jj))
            found.append(Violation("spacing", pairs,
                                   f"{len(pairs)} pair(s) closer than {min_spacing:.6g} m "
                                   f"(min {dist[ii, jj].min():.6g} m)"))

    if max_elements is not None and len(xy) > max_elements:
        found.append(Violation("budget", (), f"{len(xy)} elements exceed budget {max_elements}"))

    return ValidationReport(tuple(found))


def _checked(topology, min_spacing, max_elements):
    report = validate(topology, min_spacing=min_spacing, max_elements=max_elements)
    if not report.ok:
        raise GeometryError(f"invalid {topology.label}: "
                            + "; ".join(v.detail for v in report.violations), report)
    return topology


def build_uca(element_count, radius, rotation=0.0, *, region=None,
              min_spacing=DEFAULT_MIN_SPACING, max_elements=None):
    """Single-ring UCA with elements at ``2 pi k / K + rotation``."""
    if element_count < 4 or element_count % 2:
        raise GeometryError(f"UCA needs an even element count >= 4, got {element_count}")
    if not radius > 0:
        raise GeometryError(f"UCA radius must be positive, got {radius}")
    region = region or Region(radius)
    top = _assemble_rings(Family.UCA, [RingSpec(radius, element_count, rotation)], region)
    return _checked(top, min_spacing, max_elements)


def build_cuca(rings, *, region=None, min_spacing=DEFAULT_MIN_SPACING, max_elements=None):
    """Concentric UCAs from a list of :class:`RingSpec` (kept in the given order)."""
    rings = [r if isinstance(r, RingSpec) else RingSpec(*r) for r in rings]
    if not rings:
        raise GeometryError("CUCA needs at least one ring")
    if len(rings) == 1:
        r = rings[0]
        return build_uca(r.element_count, r.radius, r.rotation, region=region,
                         min_spacing=min_spacing, max_elements=max_elements)
    region = region or Region(max(r.radius for r in rings))
    top = _assemble_rings(Family.CUCA, rings, region)
    return _checked(top, min_spacing, max_elements)


def uniform_radii(ring_count, aperture):
    """Ring radii reduced uniformly from the aperture towards the centre."""
    return [aperture * (ring_count - n) / ring_count for n in range(ring_count)]


def cuca_rings(radii, element_count, sigma=0.0):
    """RingSpecs sharing `element_count`, ring n (1-based) rotated by n*sigma."""
    return [RingSpec(float(R), int(element_count), (n + 1) * sigma) for n, R in enumerate(radii)]


def build_uniform_cuca(ring_count, element_count, aperture, sigma=0.0, **kwargs):
    """CUCA (or UCA for one ring) with uniformly reduced radii."""
    radii = uniform_radii(ring_count, aperture)
    kwargs.setdefault("region", Region(aperture))
    return build_cuca(cuca_rings(radii, element_count, sigma), **kwargs)


def build_fuca(spec, *, region=None, min_spacing=DEFAULT_MIN_SPACING, max_elements=None):
    """Fractal UCA: sub-UCA centres uniform on the primary circle, elements on each."""
    if spec.subarray_count < 1:
        raise GeometryError("FUCA needs at least one sub-UCA")
    if not spec.degenerate and not spec.secondary_radius < spec.primary_radius:
        raise GeometryError(f"FUCA secondary radius {spec.secondary_radius} must be smaller "
                            f"than primary radius {spec.primary_radius}")
    groups = tuple(
        Subarray(tuple(spec.center(n)), spec.secondary_radius, spec.local_azimuths(n))
        for n in range(spec.subarray_count)
    )
    xy = np.vstack([g.positions_xy() for g in groups])
    region = region or Region(spec.aperture)
    top = ArrayTopology(Family.FUCA, region, fuca=spec, _xy=xy, _groups=groups)
    return _checked(top, min_spacing, max_elements)


def standard_fuca_spec(subarray_count, elements_per_subarray, aperture, split=0.4):
    """FUCA with secondary radius ``split * aperture`` (0.8/1.2 m at a 2 m aperture)."""
    return FucaSpec(subarray_count, elements_per_subarray,
                    aperture * (1.0 - split), aperture * split)


def _default_arms(count):
    for arms in (4, 2):
        if count % arms == 0:
            return arms
    return count


def build_auxiliary(family, element_count, aperture, *, arms=None, region=None,
                    min_spacing=DEFAULT_MIN_SPACING, max_elements=None):
    """Layout-only families normalised to a common aperture radius.

    URA is the largest square grid inscribed in the aperture disk; RLA spaces
    elements evenly along `arms` radial arms ending at the aperture; SPIRAL puts
    element t at radius ``aperture * t / (count - 1)`` and angle t * golden angle;
    QFUCA_LAYOUT places four sub-UCAs of radius aperture/2 whose rims touch both
    the centre and the aperture edge.
    """
    family = Family(family)
    n = int(element_count)
    if n < 4:
        raise GeometryError(f"{family.value} needs at least 4 elements, got {n}")
    groups = ()
    aux = [("element_count", n), ("aperture", aperture)]
    if family is Family.URA:
        side = math.isqrt(n)
        if side * side != n:
            raise GeometryError(f"URA needs a perfect-square element count, got {n}")
        half = aperture / math.sqrt(2.0)
        axis = np.linspace(-half, half, side)
        gx, gy = np.meshgrid(axis, axis)
        xy = np.column_stack([gx.ravel(), gy.ravel()])
        groups = (side,) * side
    elif family is Family.RLA:
        arms = _default_arms(n) if arms is None else int(arms)
        if arms < 2 or n % arms:
            raise GeometryError(f"RLA needs >= 2 arms dividing {n}, got {arms}")
        per_arm = n // arms
        radii = aperture * np.arange(1, per_arm + 1) / per_arm
        angles = 2.0 * np.pi * np.arange(arms) / arms
        xy = np.vstack([np.column_stack([radii * np.cos(a), radii * np.sin(a)]) for a in angles])
        groups = (per_arm,) * arms
        aux.append(("arms", arms))
    elif family is Family.SPIRAL:
        t = np.arange(n)
        radii = aperture * t / (n - 1)
        xy = np.column_stack([radii * np.cos(t * GOLDEN_ANGLE), radii * np.sin(t * GOLDEN_ANGLE)])
        groups = (n,)
    elif family is Family.QFUCA_LAYOUT:
        subs = 4 if n % 4 == 0 and n >= 8 else 2
        if n % subs or (n // subs) % 2:
            raise GeometryError(f"QF-UCA layout needs an even count per sub-UCA, got {n}/{subs}")
        K = n // subs
        rows = []
        for s in range(subs):
            phi = 2.0 * np.pi * s / subs
            local = phi + np.pi * (2 * np.arange(K) + 1) / K
            cx, cy = 0.5 * aperture * math.cos(phi), 0.5 * aperture * math.sin(phi)
            rows.append(np.column_stack([cx + 0.5 * aperture * np.cos(local),
                                         cy + 0.5 * aperture * np.sin(local)]))
        xy = np.vstack(rows)
        groups = (K,) * subs
        aux.append(("subarrays", subs))
    else:
        raise GeometryError(f"{family.value} is not an auxiliary family")
    region = region or Region(aperture)
    top = ArrayTopology(family, region, aux=tuple(aux), _xy=xy, _groups=groups)
    return _checked(top, min_spacing, max_elements)


@dataclass(frozen=True)
class ProjectionGeometry:
    virtual_radius: float
    virtual_azimuth: float
    center_offset: float
    offset_azimuth: float


def fuca_projection(spec_tx, spec_rx, tx_subarray, rx_subarray, rx_element):
    """Virtual receive radius/azimuth of one element seen from a transmit sub-UCA.

    The transmit sub-UCA centre is projected orthogonally onto the receive plane
    (coaxial global axes); the virtual radius is the planar distance from that
    projected centre to the receive element and the virtual azimuth is the angle
    of the same vector. Indices are 0-based.
    """
    projected = spec_tx.center(tx_subarray)
    rx_center = spec_rx.center(rx_subarray)
    theta = spec_rx.local_azimuths(rx_subarray)[rx_element]
    offset = rx_center - projected
    rho = float(np.hypot(*offset))
    if rho < 1e-12:
        # coaxial pair: the projection collapses onto the physical ring
        return ProjectionGeometry(spec_rx.secondary_radius, float(theta), 0.0, 0.0)
    element = rx_center + spec_rx.secondary_radius * np.array([np.cos(theta), np.sin(theta)])
    vec = element - projected
    return ProjectionGeometry(float(np.hypot(*vec)), float(np.arctan2(vec[1], vec[0])),
                              rho, float(np.arctan2(offset[1], offset[0])))


# -- export / import ---------------------------------------------------------

def _fmt(x):
    return float(f"{x:.12g}")


def topology_to_dict(topology, min_spacing=DEFAULT_MIN_SPACING):
    pos = element_positions(topology)
    return {
        "family": topology.family.value,
        "label": topology.label,
        "parameters": topology.parameters(),
        "region": {"radius": topology.region.radius, "plane_offset": topology.region.plane_offset},
        "positions": [[_fmt(v) for v in row] for row in pos],
        "validation": validate(topology, min_spacing=min_spacing).to_dict(),
    }


def topology_from_dict(doc, min_spacing=DEFAULT_MIN_SPACING):
    """Rebuild a topology from :func:`topology_to_dict` output."""
    family = Family(doc["family"])
    params = doc.get("parameters", {})
    region = Region(**doc["region"]) if "region" in doc else None
    if family in (Family.UCA, Family.CUCA):
        rings = [RingSpec(r["radius"], r["element_count"], r.get("rotation", 0.0))
                 for r in params["rings"]]
        return build_cuca(rings, region=region, min_spacing=min_spacing)
    if family is Family.FUCA:
        return build_fuca(FucaSpec(**params), region=region, min_spacing=min_spacing)
    return build_auxiliary(family, params["element_count"], params["aperture"],
                           arms=params.get("arms"), region=region, min_spacing=min_spacing)


def ring_indices(topology):
    """(group, index-within-group) label for every element, ring-major."""
    out = []
    for g, size in enumerate(topology.group_sizes):
        out.extend((g, k) for k in range(size))
    return out


def positions_csv(topology):
    """CSV text with columns ``ring,index,x_m,y_m,z_m``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ring", "index", "x_m", "y_m", "z_m"])
    for (g, k), row in zip(ring_indices(topology), element_positions(topology)):
        writer.writerow([g, k] + [f"{v:.12g}" for v in row])
    return buf.getvalue()
