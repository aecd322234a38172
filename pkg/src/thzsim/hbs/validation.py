"""Oracle suites for the shadowing engine.

* Knife-edge values against a high-precision Fresnel-integral oracle (mpmath).
* Edge field against the physical-optics oracle on randomized silhouettes.
* Free-space recovery and Babinet self-checks of the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from ..geometry import as_vec
from ..qd_channel import CARRIER_HZ
from .diffraction import edge_field_detail
from .knife_edge import knife_edge_coeff
from .phantoms import Pose, walker_points
from .po_oracle import babinet_check, free_space_self_test, po_field_oracle
from .screen import DEFAULT_PITCH_M, HumanFrame, box_screen, build_screen, ellipse_screen, los_plane

DEFAULT_TX = (0.0, 0.0, 1.0)
DEFAULT_RX = (3.5, 0.0, 1.0)
LIT_TOL_DB = 1.0
TRANSITION_TOL_DB = 1.5


def fresnel_oracle(nu: float, dps: int = 40) -> complex:
    """F(nu) from mpmath's arbitrary-precision Fresnel integrals."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(nu)
        c = mpmath.fresnelc(x)
        s = mpmath.fresnels(x)
        f = (1 + 1j) / 2 * ((mpmath.mpf(0.5) - c) - 1j * (mpmath.mpf(0.5) - s))
        return complex(f)


def knife_edge_suite() -> dict:
    f0 = -20 * np.log10(abs(knife_edge_coeff(0.0)))
    far = -20 * np.log10(abs(knife_edge_coeff(-1e4)))
    f1 = -20 * np.log10(abs(knife_edge_coeff(1.0)))
    f1_ref = -20 * np.log10(abs(fresnel_oracle(1.0)))
    return {
        "loss_nu0_db": f0,
        "loss_nu_neg_inf_db": far,
        "loss_nu1_db": f1,
        "loss_nu1_oracle_db": f1_ref,
        "pass": bool(abs(f0 - 6.0206) <= 0.01 and abs(far) <= 0.01 and abs(f1 - f1_ref) <= 0.05),
    }


def random_silhouettes(n: int, seed: int, tx=DEFAULT_TX, rx=DEFAULT_RX, pitch_m: float = DEFAULT_PITCH_M) -> list:
    """Human-scale screens near the LoS: posed walkers, ellipses and boxes in turn.

    Returns a list of ``(kind, screen)`` with kind in {"walker", "ellipse", "box"}.
    """
    tx, rx = as_vec(tx), as_vec(rx)
    d = float(np.linalg.norm(rx - tx))
    axis = (rx - tx) / d
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        kind = i % 3
        x = rng.uniform(1.0 / 3.5, 2.5 / 3.5) * d
        if kind == 0:
            pose = Pose(rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45), rng.choice([0.0, 0.0, rng.uniform(0.0, 1.5)]))
            pts = walker_points(pose, (0.0, rng.uniform(-0.7, 0.7)), rng.uniform(0, 2 * np.pi), spacing_m=0.01)
            pts[:, 2] += rng.uniform(-0.7, 0.6)
            # walker_points is built about the world x axis; place it along the LoS
            pts = pts + tx + x * axis - np.array([0.0, 0.0, tx[2]])
            out.append(("walker", build_screen(HumanFrame(0.0, pts), tx, rx, pitch_m)))
            continue
        plane = los_plane(tx, rx, x / d)
        c = (rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6))
        if kind == 1:
            axes = (rng.uniform(0.08, 0.35), rng.uniform(0.1, 0.9))
            out.append(("ellipse", ellipse_screen(plane, c, axes, pitch_m, rng.uniform(0, np.pi))))
        else:
            w, h = rng.uniform(0.1, 0.6), rng.uniform(0.3, 1.8)
            out.append(("box", box_screen(plane, (c[0] - w / 2, c[0] + w / 2), (c[1] - h / 2, c[1] + h / 2), pitch_m)))
    return out


@dataclass(frozen=True)
class AgreementRow:
    kind: str
    nu_min: float
    edge_db: float
    po_db: float
    fallback: bool

    @property
    def error_db(self) -> float:
        return self.edge_db - self.po_db

    @property
    def region(self) -> str:
        if self.nu_min < -1:
            return "lit"
        if self.nu_min <= 1:
            return "transition"
        return "shadow"


def oracle_agreement(cases, tx=DEFAULT_TX, rx=DEFAULT_RX, f_hz: float = CARRIER_HZ) -> list[AgreementRow]:
    rows = []
    for kind, screen in cases:
        e = edge_field_detail(screen, tx, rx, f_hz)
        p = po_field_oracle(screen, tx, rx, f_hz)
        rows.append(AgreementRow(kind, e.nu_min, float(20 * np.log10(abs(e.gain))), float(20 * np.log10(abs(p))), e.fallback))
    return rows


def summarize_agreement(rows: list[AgreementRow]) -> dict:
    out = {"n": len(rows)}
    for region, tol in (("lit", LIT_TOL_DB), ("transition", TRANSITION_TOL_DB), ("shadow", None)):
        sel = [r for r in rows if r.region == region]
        err = np.abs([r.error_db for r in sel]) if sel else np.zeros(0)
        out[region] = {
            "n": len(sel),
            "max_abs_err_db": float(err.max()) if sel else 0.0,
            "p95_abs_err_db": float(np.percentile(err, 95)) if sel else 0.0,
            "fallback_fraction": float(np.mean([r.fallback for r in sel])) if sel else 0.0,
            "tol_db": tol,
            "pass": None if tol is None else bool(err.max() <= tol) if sel else True,
        }
    return out


def free_space_suite(tx=DEFAULT_TX, rx=DEFAULT_RX, f_hz: float = CARRIER_HZ) -> dict:
    """Oracle aperture completeness, plus edge and oracle fields for a far-offset screen."""
    tx, rx = as_vec(tx), as_vec(rx)
    plane = los_plane(tx, rx, 0.5)
    screen = box_screen(plane, (3.0, 3.5), (-0.85, 0.85))
    ok, err = free_space_self_test(screen, tx, rx, f_hz)
    e = edge_field_detail(screen, tx, rx, f_hz)
    edge_db = float(20 * np.log10(abs(e.gain)))
    return {
        "oracle_empty_err_db": err,
        "far_screen_nu_min": e.nu_min,
        "far_screen_edge_db": edge_db,
        "pass": bool(ok and abs(edge_db) <= 0.05),
    }


def babinet_suite(n: int = 3, seed: int = 7, tx=DEFAULT_TX, rx=DEFAULT_RX, f_hz: float = CARRIER_HZ) -> dict:
    rows = []
    for kind, screen in random_silhouettes(n, seed, tx, rx):
        ok, u_s, u_c = babinet_check(screen, tx, rx, f_hz)
        rows.append({"kind": kind, "residual": float(abs(u_s + u_c - 1.0)), "pass": bool(ok)})
    return {"cases": rows, "pass": all(r["pass"] for r in rows)}
