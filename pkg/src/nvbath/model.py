"""Physical constants, the carbon-bath registry, and Hamiltonian construction.

The register is electron (x) nitrogen (x) carbons.  The electron qubit lives
in the {m_s=0, m_s=-1} subspace; nitrogen defaults to the two levels
{m_I=+1, m_I=0} (the polarized level plus the rf-driven one), so its I_z
eigenvalues are {1, 0}.  Three-level variants of both spins exist for oracle
checks and are never populated outside their qubit subspaces.

All constants are stored in their laboratory units (GHz/MHz/kHz, Gauss) and
converted to angular rad/us exactly once, by the ``*_to_rad`` helpers, when
Hamiltonians are built.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import spincore

__all__ = [
    "CarbonParams",
    "PhysicalConstants",
    "SystemConfig",
    "TABLE1",
    "apply_overrides",
    "build_full_hamiltonian",
    "conditional_carbon_hamiltonian",
    "default_config",
    "dump_config",
    "ghz_to_rad",
    "khz_to_rad",
    "larmor_frequency",
    "load_config",
    "mhz_to_rad",
    "sample_carbons",
]

TWO_PI = 2.0 * math.pi

MAX_CARBONS = 8


def mhz_to_rad(x):
    """MHz to angular rad/us."""
    return TWO_PI * x


def khz_to_rad(x):
    return TWO_PI * 1e-3 * x


def ghz_to_rad(x):
    return TWO_PI * 1e3 * x


@dataclass(frozen=True)
class PhysicalConstants:
    """NV register constants.

    delta: zero-field splitting (GHz); q: nitrogen quadrupole (MHz);
    gamma_e: electron gyromagnetic ratio (MHz/G); gamma_n: nitrogen
    gyromagnetic ratio (kHz/G); gamma_c: carbon gyromagnetic ratio (kHz/G);
    a_par: electron-nitrogen parallel hyperfine (MHz); b_z: field (G).
    """

    delta: float = 2.87
    q: float = -4.945
    gamma_e: float = 2.8
    gamma_n: float = -0.308
    gamma_c: float = -1.07
    a_par: float = -2.162
    b_z: float = 479.0

    def __post_init__(self):
        if not self.b_z > 0:
            raise ValueError("b_z must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class CarbonParams:
    """One bath carbon: hyperfine components and optional 1-sigma errors, kHz."""

    label: str
    a_zz: float
    a_xz: float
    sigma_zz: float | None = None
    sigma_xz: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.a_zz) and math.isfinite(self.a_xz)):
            raise ValueError("hyperfine components must be finite")
        for s in (self.sigma_zz, self.sigma_xz):
            if s is not None and not (math.isfinite(s) and s >= 0):
                raise ValueError("uncertainties must be nonnegative")


TABLE1 = (
    CarbonParams("C1", -77.02, 114.5, 0.03, 0.1),
    CarbonParams("C2", 71.03, 58.7, 0.03, 0.3),
    CarbonParams("C3", 4.0, 57.0, 1.0, 7.0),
    CarbonParams("C4", -13.9, 65.0, 0.8, 4.0),
    CarbonParams("C5", 16.0, 37.0, 5.0, 9.0),
    CarbonParams("C6", -20.0, 41.0, 3.0, 10.0),
)


@dataclass(frozen=True)
class SystemConfig:
    """Register layout plus constants and the carbon list.

    electron_levels / nitrogen_levels select 2-level qubit subspaces
    (default) or the full spin-1 triplets (oracle checks only).
    mc_sample requests Monte Carlo sampling of carbon parameters from their
    quoted uncertainties (used by the CLI when a seed is supplied).
    """

    constants: PhysicalConstants
    carbons: tuple[CarbonParams, ...]
    electron_levels: int = 2
    nitrogen_levels: int = 2
    mc_sample: bool = False

    def __post_init__(self):
        object.__setattr__(self, "carbons", tuple(self.carbons))
        if len(self.carbons) > MAX_CARBONS:
            raise ValueError(f"at most {MAX_CARBONS} carbons supported")
        if self.electron_levels not in (2, 3) or self.nitrogen_levels not in (2, 3):
            raise ValueError("electron_levels and nitrogen_levels must be 2 or 3")


def default_config():
    """Paper constants with the six Table-1 carbons."""
    return SystemConfig(constants=PhysicalConstants(), carbons=TABLE1)


def larmor_frequency(c):
    """Bare carbon Larmor frequency 2*pi*gamma_c*b_z in rad/us, sign-preserving."""
    return khz_to_rad(c.gamma_c * c.b_z)


def conditional_carbon_hamiltonian(k, c, ms):
    """2x2 carbon Hamiltonian conditioned on the electron level ``ms``.

    h(ms) = (w_L + 2*pi*ms*a_zz) I_z + (2*pi*ms*a_xz) I_x on spin-1/2
    operators, in rad/us.  For ms=0 the hyperfine terms vanish and the
    carbon precesses freely.
    """
    if ms not in (0, -1):
        raise ValueError("ms must be 0 or -1")
    ops = spincore.spin_operators(0.5)
    wl = larmor_frequency(c)
    return (wl + khz_to_rad(ms * k.a_zz)) * ops.iz + khz_to_rad(ms * k.a_xz) * ops.ix


def _electron_sz(levels):
    if levels == 3:
        return spincore.spin_operators(1).iz
    return np.diag([0.0, -1.0]).astype(complex)  # basis {m_s=0, m_s=-1}


def _nitrogen_iz(levels):
    if levels == 3:
        return spincore.spin_operators(1).iz
    return np.diag([1.0, 0.0]).astype(complex)  # basis {m_I=+1, m_I=0}


def _embed(ops_by_slot, dims):
    """Kron product placing each given operator at its slot, identity elsewhere."""
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(dims):
        op = ops_by_slot.get(i)
        out = spincore.kron(out, op if op is not None else np.eye(d))
    return out


def build_full_hamiltonian(cfg, frame="rotating"):
    """Full register Hamiltonian in rad/us.

    In the lab frame all eight terms are present.  In the rotating frame
    (co-rotating with both driven transitions) the single-spin electron and
    nitrogen terms drop out and only the electron-nitrogen A_par coupling
    plus the carbon terms remain; the result commutes with S_z, which is
    what makes the factorized coherence path exact.
    """
    if frame not in ("lab", "rotating"):
        raise ValueError(f"unknown frame {frame!r}")
    if len(cfg.carbons) > MAX_CARBONS:
        raise ValueError(f"at most {MAX_CARBONS} carbons supported")
    c = cfg.constants
    sz = _electron_sz(cfg.electron_levels)
    inz = _nitrogen_iz(cfg.nitrogen_levels)
    half = spincore.spin_operators(0.5)
    dims = [cfg.electron_levels, cfg.nitrogen_levels] + [2] * len(cfg.carbons)
    total = int(np.prod(dims))
    h = np.zeros((total, total), dtype=complex)
    if frame == "lab":
        h += ghz_to_rad(c.delta) * _embed({0: sz @ sz}, dims)
        h += mhz_to_rad(c.gamma_e * c.b_z) * _embed({0: sz}, dims)
        h += mhz_to_rad(c.q) * _embed({1: inz @ inz}, dims)
        h += khz_to_rad(c.gamma_n * c.b_z) * _embed({1: inz}, dims)
    h += mhz_to_rad(c.a_par) * _embed({0: sz, 1: inz}, dims)
    wl = larmor_frequency(c)
    for j, k in enumerate(cfg.carbons):
        slot = 2 + j
        h += wl * _embed({slot: half.iz}, dims)
        h += khz_to_rad(k.a_zz) * _embed({0: sz, slot: half.iz}, dims)
        h += khz_to_rad(k.a_xz) * _embed({0: sz, slot: half.ix}, dims)
    return h


def sample_carbons(cfg, seed):
    """Config with carbon parameters drawn from their quoted uncertainties."""
    rng = np.random.default_rng(seed)
    drawn = []
    for k in cfg.carbons:
        a_zz = k.a_zz + (rng.normal(0.0, k.sigma_zz) if k.sigma_zz else 0.0)
        a_xz = k.a_xz + (rng.normal(0.0, k.sigma_xz) if k.sigma_xz else 0.0)
        drawn.append(replace(k, a_zz=a_zz, a_xz=a_xz))
    return replace(cfg, carbons=tuple(drawn))


_CONSTANT_KEYS = set(PhysicalConstants.__dataclass_fields__)
_CARBON_KEYS = set(CarbonParams.__dataclass_fields__)
_REGISTER_KEYS = {"electron_levels", "nitrogen_levels", "mc_sample"}


def load_config(path):
    """Read a TOML config mirroring default_config; unknown keys are errors.

    Sections: ``[constants]`` (any PhysicalConstants field), ``[register]``
    (electron_levels, nitrogen_levels, mc_sample), and repeated
    ``[[carbon]]`` tables (a_zz, a_xz required; label and sigmas optional).
    Omitted values fall back to the defaults; an absent ``[[carbon]]`` list
    means the six Table-1 carbons.
    """
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - {"constants", "register", "carbon"}
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")

    const_tbl = data.get("constants", {})
    bad = set(const_tbl) - _CONSTANT_KEYS
    if bad:
        raise ValueError(f"unknown [constants] key(s): {sorted(bad)}")
    constants = PhysicalConstants(**{k: float(v) for k, v in const_tbl.items()})

    reg_tbl = data.get("register", {})
    bad = set(reg_tbl) - _REGISTER_KEYS
    if bad:
        raise ValueError(f"unknown [register] key(s): {sorted(bad)}")

    if "carbon" in data:
        carbons = []
        for i, tbl in enumerate(data["carbon"]):
            bad = set(tbl) - _CARBON_KEYS
            if bad:
                raise ValueError(f"unknown [[carbon]] key(s): {sorted(bad)}")
            if "a_zz" not in tbl or "a_xz" not in tbl:
                raise ValueError("each [[carbon]] needs a_zz and a_xz")
            carbons.append(
                CarbonParams(
                    label=str(tbl.get("label", f"C{i + 1}")),
                    a_zz=float(tbl["a_zz"]),
                    a_xz=float(tbl["a_xz"]),
                    sigma_zz=float(tbl["sigma_zz"]) if "sigma_zz" in tbl else None,
                    sigma_xz=float(tbl["sigma_xz"]) if "sigma_xz" in tbl else None,
                )
            )
        carbons = tuple(carbons)
    else:
        carbons = TABLE1

    return SystemConfig(
        constants=constants,
        carbons=carbons,
        electron_levels=int(reg_tbl.get("electron_levels", 2)),
        nitrogen_levels=int(reg_tbl.get("nitrogen_levels", 2)),
        mc_sample=bool(reg_tbl.get("mc_sample", False)),
    )


def dump_config(cfg):
    """Config as canonical TOML text (used for manifests and round trips)."""
    lines = ["[constants]"]
    for key in PhysicalConstants.__dataclass_fields__:
        lines.append(f"{key} = {getattr(cfg.constants, key)!r}")
    lines.append("")
    lines.append("[register]")
    lines.append(f"electron_levels = {cfg.electron_levels}")
    lines.append(f"nitrogen_levels = {cfg.nitrogen_levels}")
    lines.append(f"mc_sample = {'true' if cfg.mc_sample else 'false'}")
    for k in cfg.carbons:
        lines.append("")
        lines.append("[[carbon]]")
        lines.append(f'label = "{k.label}"')
        lines.append(f"a_zz = {k.a_zz!r}")
        lines.append(f"a_xz = {k.a_xz!r}")
        if k.sigma_zz is not None:
            lines.append(f"sigma_zz = {k.sigma_zz!r}")
        if k.sigma_xz is not None:
            lines.append(f"sigma_xz = {k.sigma_xz!r}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg, overrides):
    """Apply dotted-path override strings like ``constants.b_z=480``.

    Paths: ``constants.<field>``, ``register.<field>``, and
    ``carbon.<1-based index>.<field>``.
    """
    constants = asdict(cfg.constants)
    register = {
        "electron_levels": cfg.electron_levels,
        "nitrogen_levels": cfg.nitrogen_levels,
        "mc_sample": cfg.mc_sample,
    }
    carbons = [asdict(k) for k in cfg.carbons]
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        path, _, raw = item.partition("=")
        parts = path.strip().split(".")
        raw = raw.strip()
        if parts[0] == "constants" and len(parts) == 2 and parts[1] in _CONSTANT_KEYS:
            constants[parts[1]] = float(raw)
        elif parts[0] == "register" and len(parts) == 2 and parts[1] in _REGISTER_KEYS:
            if parts[1] == "mc_sample":
                register[parts[1]] = raw.lower() in ("1", "true", "yes")
            else:
                register[parts[1]] = int(raw)
        elif parts[0] == "carbon" and len(parts) == 3 and parts[2] in _CARBON_KEYS:
            idx = int(parts[1]) - 1
            if not 0 <= idx < len(carbons):
                raise ValueError(f"override {item!r}: no carbon {parts[1]}")
            carbons[idx][parts[2]] = raw if parts[2] == "label" else float(raw)
        else:
            raise ValueError(f"unknown override path {path!r}")
    return SystemConfig(
        constants=PhysicalConstants(**constants),
        carbons=tuple(CarbonParams(**k) for k in carbons),
        **register,
    )
