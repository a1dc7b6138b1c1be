"""Electrical constants of the 2.5D PDN.

All values are SI. The ``rocket64-55nm`` preset holds the 55 nm unit-cell,
TSV, micro-bump and decap constants; anything not given by that technology
table (supply voltage, dielectric loss tangent, MIM ESR) is an explicit,
overridable assumption.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any

from .errors import CaseFileError

# Decap level granularity: levels 0..10, one step per level.
N_LEVELS = 10
MIM_STEP = 200e-12
MOS_STEP = 50e-12
UDC_AREA = 1e-6  # 1 mm x 1 mm


@dataclass(frozen=True)
class PdnParams:
    r_chip: float
    l_chip: float
    c_chip: float
    r_intp: float
    l_intp: float
    c_intp: float
    loss_tangent: float
    r_tsv: float
    l_tsv: float
    c_tsv: float
    r_bump: float
    l_bump: float
    r_ubump: float
    l_ubump: float
    c_mos_density: float
    # ESR x C products (ohm*F): ESR = mos_esr_per_f / C. 24 ohm/pF -> 24e-12.
    mos_esr_per_f: float
    c_mim_density: float
    mim_esr_per_f: float
    vdd: float
    # parallel micro-bumps / TSV+bump stacks lumped per UDC connection
    ubump_parallel: int = 25
    tsv_parallel: int = 25

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("loss_tangent", "mim_esr_per_f", "mos_esr_per_f"):
                if v < 0:
                    raise ValueError(f"{f.name} must be >= 0, got {v}")
            elif v <= 0:
                raise ValueError(f"{f.name} must be > 0, got {v}")
        for density, step, name in (
            (self.c_mos_density, MOS_STEP, "MOS"),
            (self.c_mim_density, MIM_STEP, "MIM"),
        ):
            if density * UDC_AREA < step * N_LEVELS:
                raise ValueError(f"{name} density cannot host {step * N_LEVELS:.3g} F in one UDC")

    def mos_esr(self, c: float) -> float:
        return self.mos_esr_per_f / c

    def mim_esr(self, c: float) -> float:
        return self.mim_esr_per_f / c

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, overrides: dict[str, Any]) -> PdnParams:
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise CaseFileError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)


ROCKET64_55NM = PdnParams(
    r_chip=19.11e-3,
    l_chip=8.8e-12,
    c_chip=17.7e-15,
    r_intp=34.2e-3,
    l_intp=0.63e-12,
    c_intp=2.79e-12,
    loss_tangent=0.02,
    r_tsv=5.57e-3,
    l_tsv=30e-12,
    c_tsv=0.24e-12,
    r_bump=13.85e-3,
    l_bump=2.77e-12,
    r_ubump=0.2e-3,
    l_ubump=5.69e-12,
    c_mos_density=14.4e-15 / 1e-12,
    mos_esr_per_f=24e-12,
    c_mim_density=5e-15 / 1e-12,
    mim_esr_per_f=0.0,
    vdd=1.0,
)

PRESETS = {"rocket64-55nm": ROCKET64_55NM}


def preset(name: str) -> PdnParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise CaseFileError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None
