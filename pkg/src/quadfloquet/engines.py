"""Named engines with one batched calling convention.

Every engine evaluates ``batch(omega_q_values, times) -> (n, T) complex`` for
fixed omega1 and phase. Splittings enter as Omega_Q with the frame rotating at
Omega_Q itself, so Delta is zero per orientation; the closed forms depend on
Omega_Q only, so this is equivalent to the omega_Q frame with Delta absorbed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import floquet as fl
from . import regime1 as r1
from . import regime2 as r2
from .oracle import exact_signal_batch
from .params import ConfigurationError

# Pass counts used by the numeric engines behind "hybrid".
HYBRID_PASSES = {"I": 5, "II": 3}
ENGINE_HELP = (
    "oracle | regime1:case{I,II,IIIa,IIIb,IVa,IVb} | regime1:limit | regime1:s2simplified | "
    "regime2:case{...} | regime2:formula | regime2:limit | floquet[:I|II][:passes] | hybrid | hybrid:case{...}"
)


@dataclass
class Engine:
    name: str
    regime: str  # "I", "II", "any" or "hybrid"
    batch: Callable
    metadata: dict = field(default_factory=dict)
    regime_fns: tuple | None = None

    def check(self, omega1: float, omega_q_eff: float) -> None:
        """Reject parameter points where the engine's frame is singular."""
        if self.regime == "I" and omega_q_eff == 0:
            raise ConfigurationError(f"{self.name} needs Omega_Q != 0 (quadrupolar frame is singular)")
        if self.regime == "II" and omega1 == 0:
            raise ConfigurationError(f"{self.name} needs omega1 > 0 (tilted RF frame is singular)")
        if self.regime == "hybrid" and omega1 == 0 and omega_q_eff == 0:
            raise ConfigurationError("hybrid needs omega1 > 0 or Omega_Q != 0")


def _model_signal(model: fl.EffectiveModel, times) -> np.ndarray:
    return np.atleast_2d(fl.effective_signal(model, times))


def _r1_case(case: str, omega1: float, phase: float):
    def run(wq, t):
        wq = r1._check_wq(wq)
        r1.first_pass_series(omega1, phase, wq)
        quad = case in ("I", "IIIa", "IIIb")
        diag = r1.first_pass_closed(omega1, wq, 0.0, quadratic=quad)
        if case in ("I", "II"):
            th = r1.theta(omega1, wq)
            return np.atleast_2d(r1.eq36_signal(omega1, phase, wq, th, *diag, t))
        resid = r1.first_pass_residual_closed(omega1, wq, truncated=quad)
        new, s2 = r1._second_stage(omega1, phase, wq, 0.0, diag, resid, 2 if case.endswith("a") else None)
        gens = [r1.first_generator(omega1, phase, wq), s2]
        return _model_signal(fl.EffectiveModel(new.block(0), gens, fl.frame_regime1(), wq), t)

    return run


def _r2_case(case: str, omega1: float, phase: float):
    def run(wq, t):
        wq = np.asarray(wq, float)
        r2.first_pass_series(omega1, phase, wq)
        quad = case in ("I", "IIIa", "IIIb")
        diag = r2.first_pass_closed(omega1, wq, quadratic=quad)
        gens = [r2.first_generator(omega1, phase, wq)]
        if case in ("I", "II"):
            h = r2._effective_block(*diag)
        else:
            resid = r2.first_pass_residual_closed(omega1, wq, truncated=quad)
            new, s2 = r2._second_stage(omega1, phase, wq, diag, resid, 2 if case.endswith("a") else None)
            h = new.block(0)
            gens.append(s2)
        w1 = np.broadcast_to(np.asarray(omega1, float), wq.shape)
        return _model_signal(fl.EffectiveModel(h, gens, fl.frame_regime2(phase), w1), t)

    return run


def floquet_batch(regime: str, passes: int, omega1: float, phase: float, orders: Sequence[int | None] | None = None, n_f: int = fl.DEFAULT_NF):
    """Batched multi-pass numeric engine."""
    sched = fl.default_schedule(regime, passes, orders)

    def run(wq, t):
        wq = np.asarray(wq, float)
        if regime == "I":
            r1._check_wq(wq)
            h = fl.build_floquet_regime1(omega1, phase, wq, 0.0, n_f)
            frame, omega = fl.frame_regime1(), wq
        else:
            r2._check_w1(omega1)
            h = fl.build_floquet_regime2(omega1, phase, wq, n_f)
            frame, omega = fl.frame_regime2(phase), np.broadcast_to(float(omega1), wq.shape)
        res = fl.contact_sequence(h, sched)
        model = fl.EffectiveModel(res.effective, res.generators, frame, omega, cap=2 * n_f)
        return _model_signal(model, t)

    return run


def _hybrid(fn1, fn2, omega1):
    def run(wq, t):
        wq = np.asarray(wq, float)
        out = np.zeros((wq.size, np.size(t)), complex)
        tag = np.abs(wq) >= omega1
        if tag.any():
            out[tag] = fn1(wq[tag], t)
        if (~tag).any():
            out[~tag] = fn2(wq[~tag], t)
        return out

    return run


def parse_engine(spec: str, omega1: float, phase: float = 0.0, orders: Sequence[int | None] | None = None) -> Engine:
    """Build an engine from its name (see ``ENGINE_HELP``)."""
    parts = spec.strip().split(":")
    head = parts[0]
    if head == "oracle" and len(parts) == 1:
        return Engine("oracle", "any", lambda wq, t: exact_signal_batch(omega1, phase, wq, t))
    if head in ("regime1", "regime2") and len(parts) == 2:
        tag = parts[1]
        if head == "regime1":
            if tag.startswith("case") and tag[4:] in r1.CASES:
                return Engine(spec, "I", _r1_case(tag[4:], omega1, phase), {"case": tag[4:]})
            if tag == "limit":
                return Engine(spec, "I", lambda wq, t: np.atleast_2d(r1._untransformed(omega1, phase, wq, t)))
            if tag == "s2simplified":
                fn = lambda wq, t: np.atleast_2d(r1.S2_AMPLITUDE * r1.s2_simplified_pattern(omega1, phase, wq, wq, 0.0, t))
                return Engine(spec, "I", fn, {"amplitude": r1.S2_AMPLITUDE})
        else:
            if tag.startswith("case") and tag[4:] in r2.CASES:
                return Engine(spec, "II", _r2_case(tag[4:], omega1, phase), {"case": tag[4:]})
            if tag == "formula":
                fn = lambda wq, t: np.atleast_2d(r2.formula_signal(omega1, phase, np.asarray(wq, float), t))
                return Engine(spec, "II", fn, {"amplitude": r2.FORMULA_AMPLITUDE, "null_subtracted": True})
            if tag == "limit":
                return Engine(spec, "II", lambda wq, t: np.atleast_2d(r2.weak_coupling_values(omega1, phase, np.asarray(wq, float), t)))
    if head == "floquet" and len(parts) <= 3:
        regime, passes = "I", 3
        for p in parts[1:]:
            if p in ("I", "II"):
                regime = p
            elif p.isdigit() and int(p) >= 1:
                passes = int(p)
            else:
                raise ConfigurationError(f"bad floquet engine option {p!r} in {spec!r}")
        if orders and len(orders) > passes:
            passes = len(orders)
        meta = {"passes": passes, "orders": list(orders or [])}
        return Engine(f"floquet:{regime}:{passes}", regime, floquet_batch(regime, passes, omega1, phase, orders), meta)
    if head == "hybrid" and len(parts) <= 2:
        if len(parts) == 1:
            fn1 = floquet_batch("I", HYBRID_PASSES["I"], omega1, phase)
            fn2 = floquet_batch("II", HYBRID_PASSES["II"], omega1, phase)
            meta = {"regime1_engine": f"floquet:I:{HYBRID_PASSES['I']}", "regime2_engine": f"floquet:II:{HYBRID_PASSES['II']}"}
        else:
            tag = parts[1]
            if not (tag.startswith("case") and tag[4:] in r1.CASES):
                raise ConfigurationError(f"unknown hybrid variant {spec!r}")
            fn1, fn2 = _r1_case(tag[4:], omega1, phase), _r2_case(tag[4:], omega1, phase)
            meta = {"regime1_engine": f"regime1:{tag}", "regime2_engine": f"regime2:{tag}"}
        return Engine(spec, "hybrid", _hybrid(fn1, fn2, omega1), meta, (fn1, fn2))
    raise ConfigurationError(f"unknown engine {spec!r}; expected {ENGINE_HELP}")


def regime_of(omega1: float, omega_q_eff: float) -> str:
    return "I" if abs(omega_q_eff) >= omega1 else "II"
