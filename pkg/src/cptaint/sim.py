"""Desk-scale PMSM drive simulator.

Replays the control information flow of a small field-oriented motor
drive at 1 ms control resolution: an outer speed PI produces the q-axis
current reference, inner d/q current PIs produce voltage commands, the
inverse Park transform moves them to the stationary frame, and an
average-value inverter (modulation index only, no switching) applies
them to standard dq machine dynamics integrated with fixed-step RK4.

Cyber injections tamper with controller quantities (speed reference,
current reference, modulation index); physical injections disturb the
plant (load-torque step, phase-resistance change).  Runs are bit-exact
deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, fields, replace
from enum import Enum

from .errors import InvalidParams, NumericalBlowup
from .model import DT_CONTROL, Dataset, EventRecord

RAD_PER_SEC_PER_RPM = 2.0 * math.pi / 60.0
RPM_PER_RAD_PER_SEC = 60.0 / (2.0 * math.pi)

_SQRT3 = math.sqrt(3.0)


# Reference-frame transforms --------------------------------------------


def clarke(ia: float, ib: float, ic: float) -> tuple[float, float]:
    """Three-phase -> stationary alpha/beta, amplitude invariant."""
    return (2.0 / 3.0) * (ia - 0.5 * ib - 0.5 * ic), (ib - ic) / _SQRT3


def inverse_clarke(i_alpha: float, i_beta: float) -> tuple[float, float, float]:
    """Stationary alpha/beta -> three balanced phases."""
    return (
        i_alpha,
        -0.5 * i_alpha + (_SQRT3 / 2.0) * i_beta,
        -0.5 * i_alpha - (_SQRT3 / 2.0) * i_beta,
    )


def park(i_alpha: float, i_beta: float, theta_e_deg: float) -> tuple[float, float]:
    """Stationary -> rotor frame.  At 90 degrees, (1, 0) maps to (0, -1)."""
    theta = math.radians(theta_e_deg)
    c, s = math.cos(theta), math.sin(theta)
    return c * i_alpha + s * i_beta, -s * i_alpha + c * i_beta


def inverse_park(u_d: float, u_q: float, theta_e_deg: float) -> tuple[float, float]:
    """Rotor frame -> stationary; exact inverse of park at the same angle."""
    theta = math.radians(theta_e_deg)
    c, s = math.cos(theta), math.sin(theta)
    return c * u_d - s * u_q, s * u_d + c * u_q


def wrap_deg(angle: float) -> float:
    """Wrap an angle in degrees to [-180, 180)."""
    return (angle + 180.0) % 360.0 - 180.0


# Parameters ------------------------------------------------------------


@dataclass(frozen=True)
class MotorParams:
    """PMSM electrical and mechanical parameters.

    Defaults describe a 24 V / 40 W / 4000 rpm / 2.3 A two-pole-pair
    desk motor; resistance, inductances, flux and inertia are chosen to
    be consistent with that rated point.
    """

    rated_voltage: float = 24.0  # V
    rated_power: float = 40.0  # W
    rated_speed: float = 4000.0  # rpm
    rated_current: float = 2.3  # A
    pole_pairs: int = 2
    stator_resistance: float = 0.55  # ohm
    d_inductance: float = 3.5e-4  # H
    q_inductance: float = 3.5e-4  # H
    pm_flux: float = 0.0135  # Wb
    inertia: float = 2.0e-6  # kg m^2
    viscous_friction: float = 2.0e-6  # N m s / rad

    def __post_init__(self) -> None:
        if self.pole_pairs < 1:
            raise InvalidParams("pole_pairs must be >= 1")
        positive = (
            "rated_voltage",
            "rated_power",
            "rated_speed",
            "rated_current",
            "stator_resistance",
            "d_inductance",
            "q_inductance",
            "pm_flux",
            "inertia",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidParams(f"{name} must be > 0")
        if self.viscous_friction < 0:
            raise InvalidParams("viscous_friction must be >= 0")

    @property
    def torque_constant(self) -> float:
        """N m per ampere of q-axis current."""
        return 1.5 * self.pole_pairs * self.pm_flux


@dataclass(frozen=True)
class ControllerParams:
    """Gains and limits of the two-level (speed + current) PI cascade."""

    speed_kp: float = 0.08  # A / (rad/s)
    speed_ki: float = 4.0  # A / rad
    id_kp: float = 0.175  # V / A
    id_ki: float = 275.0  # V / (A s)
    iq_kp: float = 0.175  # V / A
    iq_ki: float = 275.0  # V / (A s)
    iq_limit: float = 4.6  # A, clamp on the q-current reference
    dc_voltage: float = 24.0  # V, bus feeding the modulator

    def __post_init__(self) -> None:
        for name in ("speed_kp", "speed_ki", "id_kp", "id_ki", "iq_kp", "iq_ki"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be >= 0")
        if self.iq_limit <= 0 or self.dc_voltage <= 0:
            raise InvalidParams("iq_limit and dc_voltage must be > 0")

    @property
    def max_voltage(self) -> float:
        """Largest voltage magnitude the modulator can realize (m_PWM = 1)."""
        return self.dc_voltage / _SQRT3

    def id_reference(self, omega_rpm: float) -> float:
        """Field-weakening law: zero d-current below base speed."""
        return 0.0

    def pwm_scale(self, voltage_magnitude: float) -> float:
        """Modulation index in [0, 1] for a commanded voltage magnitude."""
        m = voltage_magnitude / self.max_voltage
        return 1.0 if m > 1.0 else (0.0 if m < 0.0 else m)


# Scenario and injections ------------------------------------------------


class InjectionKind(Enum):
    SPEED_REF_OVERRIDE = "speed"
    IQ_REF_OVERRIDE = "iq"
    PWM_OVERRIDE = "pwm"
    LOAD_TORQUE_STEP = "torque"
    PHASE_RESISTANCE_CHANGE = "resistance"

    @property
    def code(self) -> str:
        return self.value

    @property
    def is_cyber(self) -> bool:
        return self in _CYBER_KINDS


_CYBER_KINDS = frozenset(
    {
        InjectionKind.SPEED_REF_OVERRIDE,
        InjectionKind.IQ_REF_OVERRIDE,
        InjectionKind.PWM_OVERRIDE,
    }
)


@dataclass(frozen=True)
class Injection:
    """One tampering window [start_event, end_event) with a magnitude.

    Overrides replace the targeted value outright; the torque step adds
    to the load torque and the resistance change scales the stator
    resistance by the magnitude.
    """

    kind: InjectionKind
    start_event: int
    end_event: int
    magnitude: float

    def __post_init__(self) -> None:
        if self.start_event < 0 or self.end_event <= self.start_event:
            raise InvalidParams(
                f"injection window [{self.start_event}, {self.end_event}) is empty or negative"
            )

    def active(self, event: int) -> bool:
        return self.start_event <= event < self.end_event


def parse_injection(text: str) -> Injection:
    """Parse the "kind:start:end:magnitude" wire form, e.g. "speed:32:64:2000"."""
    parts = text.split(":")
    if len(parts) != 4:
        raise InvalidParams(f"injection {text!r} must be kind:start:end:magnitude")
    try:
        kind = InjectionKind(parts[0].strip())
    except ValueError:
        valid = ", ".join(k.code for k in InjectionKind)
        raise InvalidParams(f"unknown injection kind {parts[0]!r} (expected one of {valid})") from None
    try:
        start, end = int(parts[1]), int(parts[2])
        magnitude = float(parts[3])
    except ValueError:
        raise InvalidParams(f"injection {text!r} has non-numeric fields") from None
    return Injection(kind, start, end, magnitude)


@dataclass(frozen=True)
class Scenario:
    """One simulator run: timing grid, speed command, disturbances, noise."""

    cycles: int = 2
    cycle_len: int = 64
    dt_plant: float = 50e-6  # s, RK4 step; must divide the 1 ms control step
    speed_rpm: float = 1000.0
    speed_profile: tuple[tuple[int, float], ...] = ()  # (start_event, rpm) steps
    initial_speed_rpm: float = 0.0  # rotor speed at t=0
    load_torque: float = 0.0  # N m, base mechanical load
    injections: tuple[Injection, ...] = ()
    noise_seed: int = 0
    noise_current: float = 0.0  # A, std dev per phase
    noise_theta: float = 0.0  # deg
    noise_omega: float = 0.0  # rpm

    def __post_init__(self) -> None:
        if self.cycles < 1 or self.cycle_len < 1:
            raise InvalidParams("cycles and cycle_len must be >= 1")
        if self.dt_plant <= 0:
            raise InvalidParams("dt_plant must be > 0")
        n_sub = round(DT_CONTROL / self.dt_plant)
        if n_sub < 1 or abs(n_sub * self.dt_plant - DT_CONTROL) > 1e-12:
            raise InvalidParams(f"dt_plant {self.dt_plant} must divide the 1 ms control step")
        if min((self.noise_current, self.noise_theta, self.noise_omega)) < 0:
            raise InvalidParams("noise levels must be >= 0")
        n_events = self.cycles * self.cycle_len
        for inj in self.injections:
            if inj.end_event > n_events:
                raise InvalidParams(
                    f"injection window [{inj.start_event}, {inj.end_event}) exceeds the "
                    f"{n_events}-event run"
                )

    @property
    def n_events(self) -> int:
        return self.cycles * self.cycle_len

    @property
    def substeps(self) -> int:
        return round(DT_CONTROL / self.dt_plant)

    def speed_command(self, event: int) -> float:
        rpm = self.speed_rpm
        for start, value in sorted(self.speed_profile):
            if event < start:
                break
            rpm = value
        return rpm

    def stripped(self) -> "Scenario":
        """Same run without any injections (the matched clean baseline)."""
        return replace(self, injections=())


# Ground truth ----------------------------------------------------------


@dataclass(frozen=True)
class InjectionApplication:
    event: int
    pre: float
    post: float


@dataclass
class AppliedInjection:
    injection: Injection
    applications: list[InjectionApplication] = field(default_factory=list)


@dataclass
class GroundTruthLog:
    """Exact record of what was tampered, where, and by how much."""

    entries: list[AppliedInjection] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["kind,start_event,end_event,magnitude"]
        for e in self.entries:
            inj = e.injection
            lines.append(
                f"{inj.kind.code},{inj.start_event},{inj.end_event},{inj.magnitude!r}"
            )
        return "\n".join(lines) + "\n"


# PI regulator ----------------------------------------------------------


class _Pi:
    """Discrete PI with output clamp and conditional anti-windup."""

    __slots__ = ("kp", "ki", "lo", "hi", "integral")

    def __init__(self, kp: float, ki: float, lo: float, hi: float) -> None:
        self.kp = kp
        self.ki = ki
        self.lo = lo
        self.hi = hi
        self.integral = 0.0

    def step(self, error: float, dt: float) -> float:
        candidate = self.integral + self.ki * error * dt
        unsat = self.kp * error + candidate
        # freeze the integrator while pushing further into saturation
        if not ((unsat > self.hi and error > 0.0) or (unsat < self.lo and error < 0.0)):
            self.integral = candidate
        out = self.kp * error + self.integral
        return self.hi if out > self.hi else (self.lo if out < self.lo else out)


# Plant -----------------------------------------------------------------


def _derivatives(
    state: tuple[float, float, float, float],
    u_alpha: float,
    u_beta: float,
    load_torque: float,
    resistance: float,
    motor: MotorParams,
) -> tuple[float, float, float, float]:
    i_d, i_q, omega_m, theta_m = state
    theta_e = motor.pole_pairs * theta_m
    c, s = math.cos(theta_e), math.sin(theta_e)
    u_d = c * u_alpha + s * u_beta
    u_q = -s * u_alpha + c * u_beta
    omega_e = motor.pole_pairs * omega_m
    d_id = (u_d - resistance * i_d + omega_e * motor.q_inductance * i_q) / motor.d_inductance
    d_iq = (
        u_q - resistance * i_q - omega_e * (motor.d_inductance * i_d + motor.pm_flux)
    ) / motor.q_inductance
    torque = 1.5 * motor.pole_pairs * (
        motor.pm_flux * i_q + (motor.d_inductance - motor.q_inductance) * i_d * i_q
    )
    d_omega = (torque - motor.viscous_friction * omega_m - load_torque) / motor.inertia
    return d_id, d_iq, d_omega, omega_m


def _rk4_step(
    state: tuple[float, float, float, float],
    dt: float,
    u_alpha: float,
    u_beta: float,
    load_torque: float,
    resistance: float,
    motor: MotorParams,
) -> tuple[float, float, float, float]:
    k1 = _derivatives(state, u_alpha, u_beta, load_torque, resistance, motor)
    s2 = tuple(x + 0.5 * dt * k for x, k in zip(state, k1))
    k2 = _derivatives(s2, u_alpha, u_beta, load_torque, resistance, motor)
    s3 = tuple(x + 0.5 * dt * k for x, k in zip(state, k2))
    k3 = _derivatives(s3, u_alpha, u_beta, load_torque, resistance, motor)
    s4 = tuple(x + dt * k for x, k in zip(state, k3))
    k4 = _derivatives(s4, u_alpha, u_beta, load_torque, resistance, motor)
    return tuple(
        x + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        for x, a, b, c, d in zip(state, k1, k2, k3, k4)
    )


def _sample_sensors(
    motor: MotorParams,
    state: tuple[float, float, float, float],
    scenario: Scenario,
    rng: random.Random,
) -> tuple[float, float, float, float, float]:
    """Measured (is_a, is_b, is_c, theta_deg, omega_rpm) for the current state."""
    i_d, i_q, omega_m, theta_m = state
    theta_deg = wrap_deg(math.degrees(motor.pole_pairs * theta_m))
    i_alpha, i_beta = inverse_park(i_d, i_q, theta_deg)
    ia, ib, ic = inverse_clarke(i_alpha, i_beta)
    omega_rpm = omega_m * RPM_PER_RAD_PER_SEC
    if scenario.noise_current > 0.0:
        ia += rng.gauss(0.0, scenario.noise_current)
        ib += rng.gauss(0.0, scenario.noise_current)
        ic += rng.gauss(0.0, scenario.noise_current)
    if scenario.noise_theta > 0.0:
        theta_deg = wrap_deg(theta_deg + rng.gauss(0.0, scenario.noise_theta))
    if scenario.noise_omega > 0.0:
        omega_rpm += rng.gauss(0.0, scenario.noise_omega)
    return ia, ib, ic, theta_deg, omega_rpm


# Simulation ------------------------------------------------------------


def simulate(
    motor: MotorParams = MotorParams(),
    ctrl: ControllerParams = ControllerParams(),
    scenario: Scenario = Scenario(),
) -> tuple[Dataset, GroundTruthLog]:
    """Run the drive and emit one event record per control step.

    A record holds the controller outputs computed at the start of the
    millisecond and the sensor readings sampled at its end, so sensor
    readings are downstream of that event's control action and feed the
    controller of the following event.
    """
    n_events = scenario.n_events
    n_sub = scenario.substeps
    dt = scenario.dt_plant
    rng = random.Random(scenario.noise_seed)
    u_max = ctrl.max_voltage

    speed_pi = _Pi(ctrl.speed_kp, ctrl.speed_ki, -ctrl.iq_limit, ctrl.iq_limit)
    id_pi = _Pi(ctrl.id_kp, ctrl.id_ki, -u_max, u_max)
    iq_pi = _Pi(ctrl.iq_kp, ctrl.iq_ki, -u_max, u_max)

    log = GroundTruthLog([AppliedInjection(inj) for inj in scenario.injections])

    current_bound = 50.0 * motor.rated_current
    speed_bound = 10.0 * motor.rated_speed

    # i_d, i_q, omega_m (rad/s), theta_m (rad)
    state = (0.0, 0.0, scenario.initial_speed_rpm * RAD_PER_SEC_PER_RPM, 0.0)
    meas = _sample_sensors(motor, state, scenario, rng)
    records: list[EventRecord] = []

    two_pi = 2.0 * math.pi
    for event in range(n_events):
        speed_ref = scenario.speed_command(event)
        iq_entry: AppliedInjection | None = None
        pwm_entry: AppliedInjection | None = None
        load_torque = scenario.load_torque
        resistance = motor.stator_resistance

        for entry in log.entries:
            inj = entry.injection
            if not inj.active(event):
                continue
            if inj.kind is InjectionKind.SPEED_REF_OVERRIDE:
                entry.applications.append(InjectionApplication(event, speed_ref, inj.magnitude))
                speed_ref = inj.magnitude
            elif inj.kind is InjectionKind.IQ_REF_OVERRIDE:
                iq_entry = entry
            elif inj.kind is InjectionKind.PWM_OVERRIDE:
                pwm_entry = entry
            elif inj.kind is InjectionKind.LOAD_TORQUE_STEP:
                entry.applications.append(
                    InjectionApplication(event, load_torque, load_torque + inj.magnitude)
                )
                load_torque += inj.magnitude
            elif inj.kind is InjectionKind.PHASE_RESISTANCE_CHANGE:
                entry.applications.append(
                    InjectionApplication(event, resistance, resistance * inj.magnitude)
                )
                resistance *= inj.magnitude

        ia, ib, ic, theta_deg, omega_rpm = meas
        omega_error = (speed_ref - omega_rpm) * RAD_PER_SEC_PER_RPM
        iq_ref = speed_pi.step(omega_error, DT_CONTROL)
        if iq_entry is not None:
            # the attacker writes the reference register directly, past the clamp
            iq_entry.applications.append(
                InjectionApplication(event, iq_ref, iq_entry.injection.magnitude)
            )
            iq_ref = iq_entry.injection.magnitude
        id_ref = ctrl.id_reference(omega_rpm)

        i_alpha, i_beta = clarke(ia, ib, ic)
        i_d_meas, i_q_meas = park(i_alpha, i_beta, theta_deg)
        us_d = id_pi.step(id_ref - i_d_meas, DT_CONTROL)
        us_q = iq_pi.step(iq_ref - i_q_meas, DT_CONTROL)
        u_alpha, u_beta = inverse_park(us_d, us_q, theta_deg)
        magnitude = math.hypot(us_d, us_q)
        m_pwm = ctrl.pwm_scale(magnitude)
        if pwm_entry is not None:
            forced = min(1.0, max(0.0, pwm_entry.injection.magnitude))
            pwm_entry.applications.append(InjectionApplication(event, m_pwm, forced))
            m_pwm = forced

        # average-value inverter: realize m_pwm * u_max along the commanded direction
        target = m_pwm * u_max
        if magnitude > 1e-12:
            if pwm_entry is not None or target < magnitude:
                scale = target / magnitude
                u_alpha, u_beta = u_alpha * scale, u_beta * scale
        else:
            u_alpha, u_beta = target, 0.0  # direction undefined at zero command

        for _ in range(n_sub):
            state = _rk4_step(state, dt, u_alpha, u_beta, load_torque, resistance, motor)
        i_d, i_q, omega_m, theta_m = state
        state = (i_d, i_q, omega_m, (theta_m + math.pi) % two_pi - math.pi)

        if not all(math.isfinite(x) for x in state):
            raise NumericalBlowup(f"non-finite plant state at event {event}")
        if abs(i_d) > current_bound or abs(i_q) > current_bound:
            raise NumericalBlowup(f"current exceeded {current_bound} A at event {event}")
        if abs(omega_m) * RPM_PER_RAD_PER_SEC > speed_bound:
            raise NumericalBlowup(f"speed exceeded {speed_bound} rpm at event {event}")

        meas = _sample_sensors(motor, state, scenario, rng)
        records.append(
            EventRecord(
                seconds=event / 1000.0,
                us_d=us_d,
                us_q=us_q,
                m_PWM=m_pwm,
                is_a=meas[0],
                is_b=meas[1],
                is_c=meas[2],
                theta=meas[3],
                omega_actual_mech=meas[4],
                speed_ref=speed_ref,
            )
        )

    dataset = Dataset(tuple(records), cycle_len=scenario.cycle_len, n_cycles=scenario.cycles)
    return dataset, log


def simulate_pair(
    motor: MotorParams = MotorParams(),
    ctrl: ControllerParams = ControllerParams(),
    scenario: Scenario = Scenario(),
) -> tuple[Dataset, Dataset, GroundTruthLog]:
    """Matched (baseline, disturbed) runs: same seed and parameters, the
    baseline with all injections stripped."""
    baseline, _ = simulate(motor, ctrl, scenario.stripped())
    disturbed, log = simulate(motor, ctrl, scenario)
    return baseline, disturbed, log


# Scenario configuration files ------------------------------------------


def parse_scenario_config(
    text: str,
) -> tuple[MotorParams, ControllerParams, Scenario]:
    """Parse a key-value scenario file.

    Lines are ``key = value`` with ``#`` comments.  Scenario keys use the
    Scenario field names (seed maps to noise_seed); repeatable ``attack``
    and ``fault`` keys take the kind:start:end:magnitude form;
    ``speed_profile`` is a comma list of event:rpm steps; ``motor.<field>``
    and ``ctrl.<field>`` override the physical and controller parameters.
    """
    motor_over: dict[str, float] = {}
    ctrl_over: dict[str, float] = {}
    scen: dict[str, object] = {}
    injections: list[Injection] = []

    motor_fields = {f.name for f in fields(MotorParams)}
    ctrl_fields = {f.name for f in fields(ControllerParams)}
    int_keys = {"cycles", "cycle_len", "noise_seed"}
    float_keys = {
        "dt_plant",
        "speed_rpm",
        "initial_speed_rpm",
        "load_torque",
        "noise_current",
        "noise_theta",
        "noise_omega",
    }

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParams(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in ("attack", "fault"):
                inj = parse_injection(value)
                expected_cyber = key == "attack"
                if inj.kind.is_cyber is not expected_cyber:
                    raise InvalidParams(
                        f"config line {lineno}: {inj.kind.code!r} is not a valid {key} kind"
                    )
                injections.append(inj)
            elif key == "seed":
                scen["noise_seed"] = int(value)
            elif key in int_keys:
                scen[key] = int(value)
            elif key in float_keys:
                scen[key] = float(value)
            elif key == "speed_profile":
                steps = []
                for part in value.split(","):
                    part = part.strip()
                    if not part:
                        continue
                    ev, rpm = part.split(":")
                    steps.append((int(ev), float(rpm)))
                scen["speed_profile"] = tuple(steps)
            elif key.startswith("motor."):
                name = key[len("motor.") :]
                if name not in motor_fields:
                    raise InvalidParams(f"config line {lineno}: unknown motor field {name!r}")
                motor_over[name] = int(value) if name == "pole_pairs" else float(value)
            elif key.startswith("ctrl."):
                name = key[len("ctrl.") :]
                if name not in ctrl_fields:
                    raise InvalidParams(f"config line {lineno}: unknown controller field {name!r}")
                ctrl_over[name] = float(value)
            else:
                raise InvalidParams(f"config line {lineno}: unknown key {key!r}")
        except (ValueError, TypeError):
            raise InvalidParams(f"config line {lineno}: cannot parse value {value!r}") from None

    motor = MotorParams(**motor_over)
    ctrl = ControllerParams(**ctrl_over)
    scenario = Scenario(injections=tuple(injections), **scen)
    return motor, ctrl, scenario
