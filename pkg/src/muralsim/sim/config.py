"""Scenario files: one flat, diffable ``key = value`` text format.

A scenario pins every knob of a simulation run: rates, plant constants,
wind, sensor noise, link behaviour, camera placement, per-drone setup,
scripted events and the operator command schedule.  ``Scenario.default()``
carries the package defaults; ``write_scenario`` emits a complete file so
every effective value is visible in version control.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from muralsim.control import ControllerConfig


class ScenarioError(ValueError):
    pass


@dataclass
class WindConfig:
    mean_u: float = 0.0
    mean_v: float = 0.0
    mean_n: float = 0.0
    gust_amp: float = 0.0   # m/s, band-limited gusts
    gust_hz: float = 0.4


@dataclass
class SensorConfig:
    px_sigma: float = 0.0         # camera spot noise, px
    range_sigma: float = 0.0      # lidar range noise, m
    outlier_frac: float = 0.0     # lidar clutter fraction
    intensity_noise: float = 0.02
    lidar_max_range: float = 15.0
    lidar_rays: int = 181         # +-90 deg at 1 deg


@dataclass
class LinkConfig:
    latency_primary: float = 0.02   # s
    latency_backup: float = 0.06    # s, always > primary
    outages: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class CameraPlacement:
    """Tracking camera pose.  The default aims square at the wall
    (look point straight ahead), which keeps the marker-centroid beam
    geometry exact; oblique placements work but trade a sub-millimeter
    perspective bias."""

    u: float = 1.0
    v: float = 1.0
    n: float = 8.0
    look_u: float = 1.0
    look_v: float = 1.0
    focal_px: float = 2600.0
    image_w: int = 3840
    image_h: int = 2160


@dataclass
class DroneSetup:
    drone_id: str
    pattern_angle_deg: float = 0.0
    marker_spacing: float = 0.10
    start_u: float = 0.2
    start_v: float = 0.02
    start_n: float = 0.30
    cap: str = "thin"
    # "all" | "half1" | "half2" | "even" | "odd" | comma list of ids;
    # halves split the *ordered* plan, keeping each drone's work spatially
    # coherent (interleaving even/odd puts two drones on adjacent strokes)
    path_ids: str = "all"

    def select_ids(self, all_ids: list[int]) -> list[int]:
        if self.path_ids == "all":
            return list(all_ids)
        if self.path_ids == "half1":
            return all_ids[: (len(all_ids) + 1) // 2]
        if self.path_ids == "half2":
            return all_ids[(len(all_ids) + 1) // 2 :]
        if self.path_ids == "even":
            return [i for i in all_ids if i % 2 == 0]
        if self.path_ids == "odd":
            return [i for i in all_ids if i % 2 == 1]
        try:
            wanted = [int(x) for x in self.path_ids.split(",") if x.strip() != ""]
        except ValueError:
            raise ScenarioError(f"bad path selection {self.path_ids!r}") from None
        return [i for i in all_ids if i in set(wanted)]


@dataclass
class ScriptEntry:
    t: float
    drone_id: str
    event: str        # battery_low | paint_empty


@dataclass
class CommandEntry:
    t: float
    namespace: str
    verb: str
    args: list[float] = field(default_factory=list)


@dataclass
class OcclusionEntry:
    drone_id: str
    marker_index: int  # 0..2
    t0: float
    t1: float


@dataclass
class Scenario:
    seed: int = 42
    duration_s: float = 120.0
    tick_hz: float = 50.0
    camera_hz: float = 30.0
    lidar_hz: float = 10.0
    tau_s: float = 0.30            # first-order velocity time constant
    accel_limit: float = 6.0       # m/s^2
    canvas_cell: float = 0.005     # m
    marker_inset: float = 0.15     # calibration marker inset from wall edge, m
    battery_hover_rate: float = 1.0 / 1800.0   # fraction/s while airborne
    battery_cmd_rate: float = 1.0 / 3600.0     # fraction/s per m/s commanded
    battery_low_threshold: float = 0.20
    paint_capacity_g: float = 500.0
    flow_thin_gps: float = 4.0
    flow_wide_gps: float = 12.0
    sigma_per_n_thin: float = 0.085   # footprint sigma per meter of wall distance
    wide_aspect: float = 5.0          # vertical/horizontal footprint ratio
    spray_band: tuple[float, float] = (0.03, 0.45)  # usable wall distances, m
    spray_actuation_delay: float = 0.15             # s, physical cap lag
    swap_duration_s: float = 8.0
    yaw_wobble_rad: float = 0.0
    yaw_wobble_hz: float = 0.3
    wind: WindConfig = field(default_factory=WindConfig)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    camera: CameraPlacement = field(default_factory=CameraPlacement)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    drones: list[DroneSetup] = field(default_factory=list)
    script: list[ScriptEntry] = field(default_factory=list)
    commands: list[CommandEntry] = field(default_factory=list)
    occlusions: list[OcclusionEntry] = field(default_factory=list)

    def __post_init__(self):
        for name in ("tick_hz", "camera_hz", "lidar_hz", "tau_s", "canvas_cell"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be positive")
        if self.link.latency_backup <= self.link.latency_primary:
            raise ScenarioError("backup link latency must exceed primary latency")
        ids = [d.drone_id for d in self.drones]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate drone ids in scenario")

    @classmethod
    def default(cls, drones: int = 2) -> "Scenario":
        setups = []
        for k in range(drones):
            setups.append(DroneSetup(
                drone_id=f"d{k + 1}",
                pattern_angle_deg=(k * 90.0) % 180.0,
                start_u=0.2 + 0.4 * k,
                path_ids="all" if drones == 1 else ("half1" if k == 0 else "half2"),
            ))
        sc = cls(drones=setups)
        for k in range(drones):
            sc.commands.append(CommandEntry(t=1.0 + 0.2 * k, namespace=f"d{k + 1}",
                                            verb="takeoff"))
        return sc


_MAGIC = "muralscenario 1"

_SCALARS = [
    ("seed", int), ("duration_s", float), ("tick_hz", float), ("camera_hz", float),
    ("lidar_hz", float), ("tau_s", float), ("accel_limit", float), ("canvas_cell", float),
    ("marker_inset", float), ("battery_hover_rate", float), ("battery_cmd_rate", float),
    ("battery_low_threshold", float), ("paint_capacity_g", float),
    ("flow_thin_gps", float), ("flow_wide_gps", float), ("sigma_per_n_thin", float),
    ("wide_aspect", float), ("spray_actuation_delay", float), ("swap_duration_s", float),
    ("yaw_wobble_rad", float), ("yaw_wobble_hz", float),
]

_WIND = [("mean_u", float), ("mean_v", float), ("mean_n", float),
         ("gust_amp", float), ("gust_hz", float)]
_SENSORS = [("px_sigma", float), ("range_sigma", float), ("outlier_frac", float),
            ("intensity_noise", float), ("lidar_max_range", float), ("lidar_rays", int)]
_LINK = [("latency_primary", float), ("latency_backup", float)]
_CAMERA = [("u", float), ("v", float), ("n", float), ("look_u", float),
           ("look_v", float), ("focal_px", float), ("image_w", int), ("image_h", int)]
_CONTROLLER = [("v_draw", float), ("v_travel", float), ("kp_n", float), ("kd_n", float),
               ("kp_w", float), ("kd_w", float), ("wall_setpoint", float),
               ("spray_delay", float), ("v_max", float), ("fix_timeout", float)]
_DRONE = [("pattern_angle_deg", float), ("marker_spacing", float), ("start_u", float),
          ("start_v", float), ("start_n", float), ("cap", str), ("path_ids", str)]


def write_scenario(sc: Scenario) -> str:
    out = io.StringIO()
    out.write(_MAGIC + "\n")
    for name, typ in _SCALARS:
        out.write(f"{name} = {getattr(sc, name)}\n")
    out.write(f"spray_band = {sc.spray_band[0]} {sc.spray_band[1]}\n")
    for prefix, obj, spec in (("wind", sc.wind, _WIND), ("sensors", sc.sensors, _SENSORS),
                              ("link", sc.link, _LINK), ("camera", sc.camera, _CAMERA),
                              ("controller", sc.controller, _CONTROLLER)):
        for name, typ in spec:
            out.write(f"{prefix}.{name} = {getattr(obj, name)}\n")
    for t0, t1 in sc.link.outages:
        out.write(f"outage = {t0} {t1}\n")
    for d in sc.drones:
        for name, typ in _DRONE:
            out.write(f"drone.{d.drone_id}.{name} = {getattr(d, name)}\n")
    for s in sc.script:
        out.write(f"script = {s.t} {s.drone_id} {s.event}\n")
    for c in sc.commands:
        args = " ".join(repr(a) for a in c.args)
        out.write(f"command = {c.t} {c.namespace} {c.verb}{' ' + args if args else ''}\n")
    for o in sc.occlusions:
        out.write(f"occlude = {o.drone_id} {o.marker_index} {o.t0} {o.t1}\n")
    return out.getvalue()


def parse_scenario(text: str) -> Scenario:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ScenarioError("not a scenario file (bad header)")
    sc = Scenario()
    sc.commands = []
    drones: dict[str, DroneSetup] = {}
    scalar_types = dict(_SCALARS)
    group_specs = {"wind": (sc.wind, dict(_WIND)), "sensors": (sc.sensors, dict(_SENSORS)),
                   "link": (sc.link, dict(_LINK)), "camera": (sc.camera, dict(_CAMERA))}
    controller_kv: dict[str, float] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, _, value = (s.strip() for s in line.partition("="))
        try:
            if key in scalar_types:
                setattr(sc, key, scalar_types[key](value))
            elif key == "spray_band":
                lo, hi = (float(x) for x in value.split())
                sc.spray_band = (lo, hi)
            elif key == "outage":
                t0, t1 = (float(x) for x in value.split())
                sc.link.outages.append((t0, t1))
            elif key == "script":
                t, drone_id, event = value.split()
                sc.script.append(ScriptEntry(t=float(t), drone_id=drone_id, event=event))
            elif key == "command":
                parts = value.split()
                sc.commands.append(CommandEntry(
                    t=float(parts[0]), namespace=parts[1], verb=parts[2],
                    args=[float(x) for x in parts[3:]]))
            elif key == "occlude":
                drone_id, idx, t0, t1 = value.split()
                sc.occlusions.append(OcclusionEntry(
                    drone_id=drone_id, marker_index=int(idx), t0=float(t0), t1=float(t1)))
            elif key.startswith("controller."):
                controller_kv[key.split(".", 1)[1]] = float(value)
            elif key.startswith("drone."):
                _, drone_id, attr = key.split(".", 2)
                d = drones.setdefault(drone_id, DroneSetup(drone_id=drone_id))
                typ = dict(_DRONE).get(attr)
                if typ is None:
                    raise ScenarioError(f"unknown drone attribute {attr!r}")
                setattr(d, attr, typ(value))
            else:
                group = key.split(".", 1)
                if len(group) == 2 and group[0] in group_specs:
                    obj, spec = group_specs[group[0]]
                    if group[1] not in spec:
                        raise ScenarioError(f"unknown key {key!r}")
                    setattr(obj, group[1], spec[group[1]](value))
                else:
                    raise ScenarioError(f"unknown key {key!r}")
        except ScenarioError:
            raise
        except Exception as exc:
            raise ScenarioError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    if controller_kv:
        sc.controller = ControllerConfig(**controller_kv)
    sc.drones = [drones[k] for k in sorted(drones)]
    # re-run the dataclass validation against the parsed values
    sc.__post_init__()
    return sc
