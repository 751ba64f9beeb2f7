"""Run configuration: unit-tagged JSON loading and validation.

A configuration file is one JSON document whose dimensioned numbers are
written as {"value": 75, "unit": "V"}.  Explicit unit tags avoid the
GHz/PHz and nm/um slips this domain invites; everything converts to the
internal unit system (GHz, GHz/strain, meters, seconds, volts) on load.
Validation failures name the offending key and constraint, and nothing is
written before validation completes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .actuator import (ActuatorCalibration, DeviceGeometry, DeviceModel,
                       ThermalModel, bending_profile)
from .control import (CRCheckConfig, DriftProcess, LockInConfig, PIDConfig,
                      StabilizationConfig)
from .emitters import EmitterModel
from .errors import ConfigError, DomainError, InputError
from .frames import Orientation
from .strain import SpinOrbit, StrainSusceptibilities

FREQUENCY_GHZ = {"GHz": 1.0, "MHz": 1e-3, "kHz": 1e-6, "Hz": 1e-9,
                 "THz": 1e3, "PHz": 1e6}
SUSCEPTIBILITY_GHZ = {"GHz/strain": 1.0, "MHz/strain": 1e-3,
                      "THz/strain": 1e3, "PHz/strain": 1e6}
LENGTH_M = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
TIME_S = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6,
          "min": 60.0, "h": 3600.0}
TIME_US = {"us": 1.0, "µs": 1.0, "ms": 1e3, "s": 1e6}
VOLTAGE_V = {"V": 1.0, "mV": 1e-3, "kV": 1e3}
RATE_PER_S = {"counts/s": 1.0, "1/s": 1.0, "Hz": 1.0, "kcounts/s": 1e3}
STRAIN_1 = {"strain": 1.0, "1": 1.0, "": 1.0}
SLOPE_MHZ_PER_GHZ = {"MHz/GHz": 1.0}
GAIN_V_PER_GHZ = {"V/GHz": 1.0, "V/GHz*s": 1.0, "V*s/GHz": 1.0,
                  "V/(GHz*s)": 1.0, "V/GHz/s": 1.0}


def _quantity(node, table: dict[str, float], path: str) -> float:
    """Convert a unit-tagged JSON value; errors carry the config key path."""
    if not isinstance(node, dict) or "value" not in node or "unit" not in node:
        raise ConfigError(
            f"{path}: expected a unit-tagged number {{\"value\": ..., \"unit\": ...}}")
    unit = node["unit"]
    if unit not in table:
        raise ConfigError(
            f"{path}: unknown unit {unit!r}; accepted: {sorted(table)}")
    try:
        value = float(node["value"])
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: value must be a number") from None
    return value * table[unit]


def _number(node, path: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a plain number")
    return float(node)


def _section(doc: dict, key: str, path: str = "") -> dict:
    where = f"{path}.{key}" if path else key
    if key not in doc:
        raise ConfigError(f"{where}: missing required section")
    node = doc[key]
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected an object")
    return node


@dataclass(frozen=True)
class PhysicsConfig:
    """Strain-response physics block (all frequencies GHz)."""

    nu0: float
    spin_orbit: SpinOrbit
    susc_g: StrainSusceptibilities
    susc_u: StrainSusceptibilities


@dataclass(frozen=True)
class InhomogeneousConfig:
    """Generative model of the inhomogeneous resonance distribution."""

    cluster_sigma_ghz: float = 15.0
    cluster_weight: float = 0.45
    broad_span_ghz: float = 300.0


@dataclass(frozen=True)
class ControlBlocks:
    drift: DriftProcess
    lockin: LockInConfig
    pid: PIDConfig
    cr_check: CRCheckConfig
    stabilization: StabilizationConfig


@dataclass(frozen=True)
class RunConfig:
    """Fully validated configuration for one invocation."""

    physics: PhysicsConfig
    device: DeviceModel
    emitters: dict[str, EmitterModel]
    inhomogeneous: InhomogeneousConfig
    control: ControlBlocks
    seed: int
    source_text: str = field(repr=False, default="")

    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode("utf-8")).hexdigest()[:16]

    def emitter(self, name: str) -> EmitterModel:
        try:
            return self.emitters[name]
        except KeyError:
            known = ", ".join(sorted(self.emitters))
            raise InputError(f"unknown emitter id {name!r}; known ids: {known}") from None


def _load_susceptibilities(node: dict, path: str) -> StrainSusceptibilities:
    return StrainSusceptibilities(
        t_perp=_quantity(_require(node, "t_perp", path), SUSCEPTIBILITY_GHZ, f"{path}.t_perp"),
        t_par=_quantity(_require(node, "t_par", path), SUSCEPTIBILITY_GHZ, f"{path}.t_par"),
        d=_quantity(_require(node, "d", path), SUSCEPTIBILITY_GHZ, f"{path}.d"),
        f=_quantity(_require(node, "f", path), SUSCEPTIBILITY_GHZ, f"{path}.f"),
    )


def _require(node: dict, key: str, path: str):
    if key not in node:
        raise ConfigError(f"{path}.{key}: missing required key")
    return node[key]


def _load_physics(doc: dict) -> PhysicsConfig:
    node = _section(doc, "physics")
    try:
        return PhysicsConfig(
            nu0=_quantity(_require(node, "nu0", "physics"), FREQUENCY_GHZ, "physics.nu0"),
            spin_orbit=SpinOrbit(
                lambda_g=_quantity(_require(node, "lambda_g", "physics"),
                                   FREQUENCY_GHZ, "physics.lambda_g"),
                lambda_u=_quantity(_require(node, "lambda_u", "physics"),
                                   FREQUENCY_GHZ, "physics.lambda_u"),
            ),
            susc_g=_load_susceptibilities(_section(node, "ground", "physics"),
                                          "physics.ground"),
            susc_u=_load_susceptibilities(_section(node, "excited", "physics"),
                                          "physics.excited"),
        )
    except InputError as exc:
        raise ConfigError(f"physics: {exc}") from exc


def _load_device(doc: dict) -> DeviceModel:
    node = _section(doc, "device")
    geo_node = _section(node, "geometry", "device")
    cal_node = _section(node, "calibration", "device")
    th_node = _section(node, "thermal", "device")
    try:
        geometry = DeviceGeometry(**{
            name: _quantity(_require(geo_node, name, "device.geometry"),
                            LENGTH_M, f"device.geometry.{name}")
            for name in DeviceGeometry.__dataclass_fields__
        })
        ratios = _section(cal_node, "tensor_ratios", "device.calibration")
        calibration = ActuatorCalibration(
            v_ref=_quantity(_require(cal_node, "v_ref", "device.calibration"),
                            VOLTAGE_V, "device.calibration.v_ref"),
            eps_ref=_quantity(_require(cal_node, "eps_ref", "device.calibration"),
                              STRAIN_1, "device.calibration.eps_ref"),
            v_max=_quantity(_require(cal_node, "v_max", "device.calibration"),
                            VOLTAGE_V, "device.calibration.v_max"),
            ratio_yy=_number(_require(ratios, "yy", "device.calibration.tensor_ratios"),
                             "device.calibration.tensor_ratios.yy"),
            ratio_zz=_number(_require(ratios, "zz", "device.calibration.tensor_ratios"),
                             "device.calibration.tensor_ratios.zz"),
            ratio_yz=_number(ratios.get("yz", 0.0), "device.calibration.tensor_ratios.yz"),
            ratio_zx=_number(ratios.get("zx", 0.0), "device.calibration.tensor_ratios.zx"),
            ratio_xy=_number(ratios.get("xy", 0.0), "device.calibration.tensor_ratios.xy"),
        )
        thermal = ThermalModel(
            cooldown_time_us=_quantity(_require(th_node, "cooldown_time", "device.thermal"),
                                       TIME_US, "device.thermal.cooldown_time"),
            max_pulse_us=_quantity(_require(th_node, "max_pulse", "device.thermal"),
                                   TIME_US, "device.thermal.max_pulse"),
            heat_shift_coeff=_quantity(_require(th_node, "heat_shift_coeff", "device.thermal"),
                                       FREQUENCY_GHZ, "device.thermal.heat_shift_coeff"),
            relax_time_us=_quantity(_require(th_node, "relax_time", "device.thermal"),
                                    TIME_US, "device.thermal.relax_time"),
        )
    except InputError as exc:
        raise ConfigError(f"device: {exc}") from exc
    return DeviceModel(geometry=geometry, calibration=calibration, thermal=thermal)


_ORIENTATIONS = {o.value: o for o in Orientation}


def _load_emitters(doc: dict, physics: PhysicsConfig) -> dict[str, EmitterModel]:
    if "emitters" not in doc or not isinstance(doc["emitters"], list):
        raise ConfigError("emitters: missing required list")
    emitters: dict[str, EmitterModel] = {}
    for i, node in enumerate(doc["emitters"]):
        path = f"emitters[{i}]"
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: expected an object")
        name = node.get("id")
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{path}.id: expected a non-empty string")
        if name in emitters:
            raise ConfigError(f"{path}.id: duplicate emitter id {name!r}")
        orient_tag = _require(node, "orientation", path)
        if orient_tag not in _ORIENTATIONS:
            raise ConfigError(
                f"{path}.orientation: unknown variant {orient_tag!r}; "
                f"expected one of {sorted(_ORIENTATIONS)}")
        pos_node = node.get("position")
        if pos_node is None:
            position = None
        else:
            if not isinstance(pos_node, dict):
                raise ConfigError(f"{path}.position: expected an object or null")
            position = tuple(
                _quantity(_require(pos_node, axis, f"{path}.position"),
                          LENGTH_M, f"{path}.position.{axis}")
                for axis in ("x", "y", "z"))
        try:
            emitters[name] = EmitterModel(
                name=name,
                orientation=_ORIENTATIONS[orient_tag],
                position=position,
                nu0=physics.nu0 + _quantity(_require(node, "detuning0", path),
                                            FREQUENCY_GHZ, f"{path}.detuning0"),
                fwhm0_mhz=_quantity(_require(node, "fwhm0", path),
                                    FREQUENCY_GHZ, f"{path}.fwhm0") * 1e3,
                peak_rate=_quantity(_require(node, "peak_rate", path),
                                    RATE_PER_S, f"{path}.peak_rate"),
                background_rate=_quantity(_require(node, "background_rate", path),
                                          RATE_PER_S, f"{path}.background_rate"),
                susc_g=physics.susc_g,
                susc_u=physics.susc_u,
                spin_orbit=physics.spin_orbit,
                broadening_slope=_quantity(_require(node, "broadening_slope", path),
                                           SLOPE_MHZ_PER_GHZ, f"{path}.broadening_slope"),
            )
        except InputError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not emitters:
        raise ConfigError("emitters: at least one emitter is required")
    return emitters


def _load_inhomogeneous(doc: dict) -> InhomogeneousConfig:
    if "inhomogeneous" not in doc:
        return InhomogeneousConfig()
    node = _section(doc, "inhomogeneous")
    cfg = InhomogeneousConfig(
        cluster_sigma_ghz=_quantity(_require(node, "cluster_sigma", "inhomogeneous"),
                                    FREQUENCY_GHZ, "inhomogeneous.cluster_sigma"),
        cluster_weight=_number(_require(node, "cluster_weight", "inhomogeneous"),
                               "inhomogeneous.cluster_weight"),
        broad_span_ghz=_quantity(_require(node, "broad_span", "inhomogeneous"),
                                 FREQUENCY_GHZ, "inhomogeneous.broad_span"),
    )
    if not 0.0 <= cfg.cluster_weight <= 1.0:
        raise ConfigError("inhomogeneous.cluster_weight: must be in [0, 1]")
    if not (cfg.cluster_sigma_ghz > 0.0 and cfg.broad_span_ghz > 0.0):
        raise ConfigError("inhomogeneous: sigma and span must be > 0")
    return cfg


def _load_control(doc: dict) -> ControlBlocks:
    node = _section(doc, "control")
    drift_node = _section(node, "drift", "control")
    lockin_node = _section(node, "lockin", "control")
    pid_node = _section(node, "pid", "control")
    cr_node = _section(node, "cr_check", "control")
    stab_node = _section(node, "stabilization", "control")
    try:
        drift = DriftProcess(
            ou_tau_s=_quantity(_require(drift_node, "ou_tau", "control.drift"),
                               TIME_S, "control.drift.ou_tau"),
            ou_sigma_ghz=_quantity(_require(drift_node, "ou_sigma", "control.drift"),
                                   FREQUENCY_GHZ, "control.drift.ou_sigma"),
            jump_rate_hz=_quantity(_require(drift_node, "jump_rate", "control.drift"),
                                   RATE_PER_S, "control.drift.jump_rate"),
            jump_sigma_ghz=_quantity(_require(drift_node, "jump_sigma", "control.drift"),
                                     FREQUENCY_GHZ, "control.drift.jump_sigma"),
        )
        lockin = LockInConfig(
            mod_amp_v=_quantity(_require(lockin_node, "mod_amp", "control.lockin"),
                                VOLTAGE_V, "control.lockin.mod_amp"),
            periods_per_probe=int(_number(_require(lockin_node, "periods_per_probe",
                                                   "control.lockin"),
                                          "control.lockin.periods_per_probe")),
            bins_per_period=int(_number(_require(lockin_node, "bins_per_period",
                                                 "control.lockin"),
                                        "control.lockin.bins_per_period")),
            probe_duration_s=_quantity(_require(lockin_node, "probe_duration",
                                                "control.lockin"),
                                       TIME_S, "control.lockin.probe_duration"),
        )
        pid = PIDConfig(
            kp=_quantity(_require(pid_node, "kp", "control.pid"),
                         GAIN_V_PER_GHZ, "control.pid.kp"),
            ki=_quantity(_require(pid_node, "ki", "control.pid"),
                         GAIN_V_PER_GHZ, "control.pid.ki"),
            kd=_quantity(_require(pid_node, "kd", "control.pid"),
                         GAIN_V_PER_GHZ, "control.pid.kd"),
            output_min=_quantity(_require(pid_node, "output_min", "control.pid"),
                                 VOLTAGE_V, "control.pid.output_min"),
            output_max=_quantity(_require(pid_node, "output_max", "control.pid"),
                                 VOLTAGE_V, "control.pid.output_max"),
            update_rate_hz=_quantity(_require(pid_node, "update_rate", "control.pid"),
                                     RATE_PER_S, "control.pid.update_rate"),
            integral_limit=_number(pid_node.get("integral_limit", 20.0),
                                   "control.pid.integral_limit"),
        )
        cr = CRCheckConfig(
            probe_duration_s=_quantity(_require(cr_node, "probe_duration",
                                                "control.cr_check"),
                                       TIME_S, "control.cr_check.probe_duration"),
            photon_threshold=int(_number(_require(cr_node, "photon_threshold",
                                                  "control.cr_check"),
                                         "control.cr_check.photon_threshold")),
            max_attempts=int(_number(cr_node.get("max_attempts", 1),
                                     "control.cr_check.max_attempts")),
        )
        stab = StabilizationConfig(
            duration_s=_quantity(_require(stab_node, "duration", "control.stabilization"),
                                 TIME_S, "control.stabilization.duration"),
            n_scans=int(_number(_require(stab_node, "n_scans", "control.stabilization"),
                                "control.stabilization.n_scans")),
            scan_span_ghz=_quantity(_require(stab_node, "scan_span", "control.stabilization"),
                                    FREQUENCY_GHZ, "control.stabilization.scan_span"),
            scan_points=int(_number(_require(stab_node, "scan_points",
                                             "control.stabilization"),
                                    "control.stabilization.scan_points")),
            scan_dwell_s=_quantity(_require(stab_node, "scan_dwell", "control.stabilization"),
                                   TIME_S, "control.stabilization.scan_dwell"),
            operating_voltage=_quantity(_require(stab_node, "operating_voltage",
                                                 "control.stabilization"),
                                        VOLTAGE_V, "control.stabilization.operating_voltage"),
            scan_shape=str(stab_node.get("scan_shape", "voigt")),
        )
    except InputError as exc:
        raise ConfigError(f"control: {exc}") from exc
    return ControlBlocks(drift=drift, lockin=lockin, pid=pid, cr_check=cr,
                         stabilization=stab)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    physics = _load_physics(doc)
    device = _load_device(doc)
    emitters = _load_emitters(doc, physics)
    for name, emitter in emitters.items():
        if not emitter.is_bulk:
            try:
                bending_profile(device.geometry, emitter.position)
            except DomainError as exc:
                raise ConfigError(f"emitter {name!r}: {exc}") from exc
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")
    return RunConfig(
        physics=physics,
        device=device,
        emitters=emitters,
        inhomogeneous=_load_inhomogeneous(doc),
        control=_load_control(doc),
        seed=seed,
        source_text=text,
    )


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a configuration file."""
    return parse_config(Path(path).read_text(encoding="utf-8"))


def default_config_text() -> str:
    return resources.files("snvtune.data").joinpath("default_config.json").read_text(
        encoding="utf-8")


def load_default_config() -> RunConfig:
    """The configuration shipped with the package."""
    return parse_config(default_config_text())


def matched_sample_path() -> Path:
    """Path of the shipped synthetic inhomogeneous-sample dataset."""
    return Path(str(resources.files("snvtune.data").joinpath(
        "inhomogeneous_sample.csv")))
