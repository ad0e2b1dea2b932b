"""Command-line front end: profile, compare, classify, gen-crystal, powder."""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import engines as en
from . import powder as pw
from .analysis import compare_profiles
from .floquet import DivergenceWarning
from .oracle import DETECTION_SIGN
from .params import ConfigurationError, ExcitationProfile, ExperimentParams, quad_frequency, time_grid
from .regime1 import S2_AMPLITUDE
from .regime2 import FORMULA_AMPLITUDE
from .svg import line_plot

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3
# compare flags an engine when its RMS against the reference exceeds this
DIVERGED_RMS = 0.3
DEFAULT_CRYSTALS = "grid:28656"

_DEFAULTS = {
    "cq_hz": "2e6",
    "eta": 0.0,
    "rf_hz": "1e5",
    "phase_deg": 0.0,
    "t_start_us": 0.0,
    "t_stop_us": 500.0,
    "t_step_us": 1.0,
    "workers": 1,
}


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _hz(x: float) -> str:
    return f"{x:.10g}"


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _orders(text: str | None) -> list[int | None] | None:
    if not text:
        return None
    out: list[int | None] = []
    for tok in str(text).split(","):
        tok = tok.strip().lower()
        if tok in ("full", "0"):
            out.append(None)
        elif tok.isdigit():
            out.append(int(tok))
        else:
            raise ConfigurationError(f"bad order {tok!r}; use positive integers or 'full'")
    return out


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; '#' starts a comment, dashes in keys become underscores."""
    cfg: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadfloquet", description="Triple-quantum excitation profiles of spin-3/2 nuclei.")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("experiment")
    g.add_argument("--config", help="key=value file; explicit flags override it")
    g.add_argument("--cq-hz", help="quadrupolar coupling constant C_Q in Hz (classify accepts a comma list)")
    g.add_argument("--eta", type=float, help="asymmetry parameter")
    g.add_argument("--rf-hz", help="RF amplitude omega1/2pi in Hz (classify accepts a comma list)")
    g.add_argument("--phase-deg", type=float, help="RF phase in degrees")
    g.add_argument("--t-start-us", type=float)
    g.add_argument("--t-stop-us", type=float)
    g.add_argument("--t-step-us", type=float)
    g.add_argument("--engine", action="append", help=f"repeatable; {en.ENGINE_HELP}")
    g.add_argument("--orders", help="BCH orders per pass for floquet engines, e.g. 2,4,full")
    g.add_argument("--crystal-file", help="orientation file (alpha beta [gamma] weight, degrees)")
    g.add_argument("--crystal-gen", help=f"scheme:count with scheme in {pw.SCHEMES}")
    g.add_argument("--out", help="output path (stdout when omitted)")
    g.add_argument("--svg", help="optional SVG plot path")
    g.add_argument("--workers", type=int, help="threads for orientation batches")

    sub.add_parser("profile", parents=[common], help="single-crystal profile CSV")
    sub.add_parser("compare", parents=[common], help="compare engines against the first one")
    sub.add_parser("classify", parents=[common], help="regime populations over a crystal set")
    sub.add_parser("gen-crystal", parents=[common], help="write an orientation file")
    sub.add_parser("powder", parents=[common], help="powder-averaged profile CSV")
    return p


@dataclass
class RunConfig:
    command: str
    cq_hz: list[float]
    rf_hz: list[float]
    eta: float
    phase_deg: float
    t_start_us: float
    t_stop_us: float
    t_step_us: float
    engines: list[str]
    orders: list[int | None] | None
    crystal_file: str | None
    crystal_gen: str | None
    out: str | None
    svg: str | None
    workers: int

    @property
    def params(self) -> ExperimentParams:
        return ExperimentParams.from_hz(self.cq_hz[0], self.rf_hz[0], self.phase_deg, self.eta)

    @property
    def times(self) -> np.ndarray:
        return time_grid(self.t_start_us, self.t_stop_us, self.t_step_us)

    def echo(self) -> list[tuple[str, str]]:
        items = [
            ("command", self.command),
            ("version", __version__),
            ("cq_hz", ",".join(_hz(v) for v in self.cq_hz)),
            ("rf_hz", ",".join(_hz(v) for v in self.rf_hz)),
            ("eta", _hz(self.eta)),
            ("phase_deg", _hz(self.phase_deg)),
            ("t_start_us", _hz(self.t_start_us)),
            ("t_stop_us", _hz(self.t_stop_us)),
            ("t_step_us", _hz(self.t_step_us)),
            ("engines", ",".join(self.engines)),
            ("orders", ",".join("full" if o is None else str(o) for o in self.orders) if self.orders else "default"),
            ("crystals", self.crystal_file or self.crystal_gen or ""),
            ("detection_sign", _hz(DETECTION_SIGN)),
            ("s2_amplitude", repr(S2_AMPLITUDE)),
            ("formula_amplitude", repr(FORMULA_AMPLITUDE)),
        ]
        return items


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file and explicit flags (in rising priority)."""
    merged: dict = dict(_DEFAULTS)
    if args.config:
        merged.update(read_config(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command"):
            merged[key] = value
    engines = merged.get("engine") or ["oracle"]
    if isinstance(engines, str):
        engines = [e.strip() for e in engines.split(",") if e.strip()]
    try:
        cfg = RunConfig(
            command=args.command,
            cq_hz=_float_list(merged["cq_hz"]),
            rf_hz=_float_list(merged["rf_hz"]),
            eta=float(merged["eta"]),
            phase_deg=float(merged["phase_deg"]),
            t_start_us=float(merged["t_start_us"]),
            t_stop_us=float(merged["t_stop_us"]),
            t_step_us=float(merged["t_step_us"]),
            engines=list(engines),
            orders=_orders(merged.get("orders")),
            crystal_file=merged.get("crystal_file"),
            crystal_gen=merged.get("crystal_gen"),
            out=merged.get("out"),
            svg=merged.get("svg"),
            workers=int(merged["workers"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    if not cfg.cq_hz or not cfg.rf_hz:
        raise ConfigurationError("--cq-hz and --rf-hz need at least one value")
    if cfg.command not in ("classify",) and (len(cfg.cq_hz) > 1 or len(cfg.rf_hz) > 1):
        raise ConfigurationError("lists of C_Q or RF values are only accepted by classify")
    if cfg.workers < 1:
        raise ConfigurationError("--workers must be >= 1")
    if cfg.command in ("profile", "compare", "powder"):
        cfg.times  # validates the grid
        cfg.params  # validates the physical parameters
    return cfg


def crystal_set(cfg: RunConfig, default: str | None = DEFAULT_CRYSTALS) -> pw.CrystalSet:
    if cfg.crystal_file and cfg.crystal_gen:
        raise ConfigurationError("give either --crystal-file or --crystal-gen, not both")
    if cfg.crystal_file:
        try:
            return pw.load_crystal_file(cfg.crystal_file)
        except OSError as exc:
            raise ConfigurationError(f"cannot read crystal file: {exc}") from exc
    spec = cfg.crystal_gen or default
    if not spec:
        raise ConfigurationError("a crystal source is required (--crystal-gen scheme:count or --crystal-file)")
    scheme, _, count = spec.partition(":")
    if not count.isdigit():
        raise ConfigurationError(f"--crystal-gen expects scheme:count, got {spec!r}")
    return pw.generate_crystal_set(scheme, int(count))


# output helpers -------------------------------------------------------------


def _header(cfg: RunConfig, extra: list[tuple[str, str]] = ()) -> str:
    lines = [f"# {k} = {v}" for k, v in cfg.echo()]
    lines += [f"# {k} = {v}" for k, v in extra]
    return "\n".join(lines) + "\n"


def _meta_json(meta: dict) -> str:
    return json.dumps(meta, sort_keys=True, default=str, separators=(",", ":"))


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


@dataclass
class EngineRun:
    engine: en.Engine
    profile: ExcitationProfile
    regime: str
    warnings: list[str]
    classification: pw.Classification | None = None


def _run_engine(engine: en.Engine, fn, regime: str) -> EngineRun:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DivergenceWarning)
        prof = fn()
    msgs = [str(w.message) for w in caught if issubclass(w.category, DivergenceWarning)]
    for w in caught:
        if not issubclass(w.category, DivergenceWarning):
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return EngineRun(engine, prof, regime, msgs)


def _engines(cfg: RunConfig, omega_q_eff: float | None) -> list[en.Engine]:
    p = cfg.params
    out = []
    for name in cfg.engines:
        eng = en.parse_engine(name, p.omega1, p.phase, cfg.orders)
        if omega_q_eff is not None:
            eng.check(p.omega1, omega_q_eff)
        out.append(eng)
    return out


def single_crystal_runs(cfg: RunConfig) -> list[EngineRun]:
    p, t = cfg.params, cfg.times
    engines = _engines(cfg, p.omega_q_eff)
    native = en.regime_of(p.omega1, p.omega_q_eff)
    runs = []
    for eng in engines:
        regime = eng.regime if eng.regime in ("I", "II") else native
        fn = lambda eng=eng: ExcitationProfile(t, eng.batch(np.array([p.omega_q_eff]), t)[0], dict(eng.metadata, engine=eng.name))
        runs.append(_run_engine(eng, fn, regime))
    return runs


def powder_runs(cfg: RunConfig, cset: pw.CrystalSet) -> list[EngineRun]:
    p, t = cfg.params, cfg.times
    engines = _engines(cfg, None)
    cls = pw.classify(cset, p.omega_q, p.omega1, p.eta)
    vals = pw.oriented_values(cset, p.omega_q, p.eta)
    runs = []
    for eng in engines:
        if eng.regime in ("I", "II"):
            bad = vals == 0 if eng.regime == "I" else np.zeros(1, bool)
            if bad.any():
                raise ConfigurationError(f"{eng.name}: an orientation has Omega_Q = 0, where the quadrupolar frame is singular")
            eng.check(p.omega1, 1.0)
        if eng.regime_fns is not None:
            f1, f2 = eng.regime_fns
            fn = lambda f1=f1, f2=f2, eng=eng: pw.hybrid_profile(f1, f2, cset, t, p.omega_q, p.omega1, p.eta, workers=cfg.workers, metadata=dict(eng.metadata, engine=eng.name)).profile
        else:
            fn = lambda eng=eng: pw.powder_average(eng.batch, cset, t, p.omega_q, p.eta, workers=cfg.workers, metadata=dict(eng.metadata, engine=eng.name))
        regime = eng.regime if eng.regime in ("I", "II") else ("I" if cls.n_regime2 == 0 else "II" if cls.n_regime1 == 0 else "mixed")
        run = _run_engine(eng, fn, regime)
        run.classification = cls
        runs.append(run)
    return runs


def profile_csv(cfg: RunConfig, runs: list[EngineRun], extra: list[tuple[str, str]] = ()) -> str:
    buf = io.StringIO()
    meta = [(f"engine_metadata[{r.engine.name}]", _meta_json(r.engine.metadata)) for r in runs]
    warn = [(f"warning[{r.engine.name}]", m) for r in runs for m in r.warnings]
    buf.write(_header(cfg, list(extra) + meta + warn))
    buf.write("t_us,amplitude,engine,regime,C_Q_Hz,omega1_Hz_over_2pi\n")
    cq, rf = _hz(cfg.cq_hz[0]), _hz(cfg.rf_hz[0])
    for r in runs:
        for ti, a in zip(r.profile.times, r.profile.amplitudes):
            buf.write(f"{_hz(round(ti * 1e6, 9))},{_fmt(a)},{r.engine.name},{r.regime},{cq},{rf}\n")
    return buf.getvalue()


def _write_svg(cfg: RunConfig, runs: list[EngineRun], title: str) -> None:
    if cfg.svg:
        series = [(r.engine.name, r.profile.times * 1e6, r.profile.amplitudes) for r in runs]
        Path(cfg.svg).write_text(line_plot(series, "pulse duration (us)", "triple-quantum amplitude", title))


def _title(cfg: RunConfig) -> str:
    return f"C_Q = {cfg.cq_hz[0] / 1e3:g} kHz, omega1/2pi = {cfg.rf_hz[0] / 1e3:g} kHz"


def _population_items(cls: pw.Classification | None) -> list[tuple[str, str]]:
    if cls is None:
        return []
    return [
        ("orientations", str(cls.count)),
        ("n_regime_I", str(cls.n_regime1)),
        ("n_regime_II", str(cls.n_regime2)),
        ("fraction_regime_I", f"{cls.fraction_regime1:.6f}"),
        ("weight_regime_I", f"{cls.weight_regime1:.6f}"),
    ]


def cmd_profile(cfg: RunConfig) -> int:
    runs = single_crystal_runs(cfg)
    _emit(profile_csv(cfg, runs), cfg.out)
    _write_svg(cfg, runs, _title(cfg))
    return EXIT_DIVERGED if any(r.warnings for r in runs) else EXIT_OK


def cmd_powder(cfg: RunConfig) -> int:
    cset = crystal_set(cfg)
    runs = powder_runs(cfg, cset)
    extra = [("crystal_source", cset.source)] + _population_items(runs[0].classification if runs else None)
    _emit(profile_csv(cfg, runs, extra), cfg.out)
    _write_svg(cfg, runs, _title(cfg) + " (powder)")
    return EXIT_DIVERGED if any(r.warnings for r in runs) else EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    if len(cfg.engines) < 2:
        raise ConfigurationError("compare needs at least two --engine values (the first is the reference)")
    is_powder = bool(cfg.crystal_file or cfg.crystal_gen)
    runs = powder_runs(cfg, crystal_set(cfg)) if is_powder else single_crystal_runs(cfg)
    ref = runs[0]
    p = cfg.params
    native = en.regime_of(p.omega1, p.omega_q_eff)
    csv = io.StringIO()
    csv.write(_header(cfg, _population_items(ref.classification)))
    csv.write("engine,reference,rms,max_abs_dev,first_lobe_t_us,first_lobe_value,regime,warnings,flag\n")
    text = [f"reference: {ref.engine.name}", _title(cfg)]
    if ref.classification is not None:
        c = ref.classification
        text.append(f"populations: regime I {c.n_regime1} ({100 * c.fraction_regime1:.2f}%), regime II {c.n_regime2} ({100 * c.fraction_regime2:.2f}%), regime I weight {100 * c.weight_regime1:.2f}%")
    for r in runs:
        cmp = compare_profiles(r.profile, ref.profile, r.engine.name, ref.engine.name)
        out_of_regime = (not is_powder) and r.engine.regime in ("I", "II") and r.engine.regime != native
        flagged = cmp.rms > DIVERGED_RMS or bool(r.warnings) or out_of_regime
        flag = "diverged/out-of-regime" if flagged else "ok"
        csv.write(
            f"{r.engine.name},{ref.engine.name},{_fmt(cmp.rms)},{_fmt(cmp.max_abs)},{_hz(round(cmp.extremum_time * 1e6, 9))},"
            f"{_fmt(cmp.extremum_value)},{r.regime},{len(r.warnings)},{flag}\n"
        )
        text.append(
            f"{r.engine.name:<24} rms={cmp.rms:.4e} max={cmp.max_abs:.4e} first lobe {cmp.extremum_value:+.4f} at {cmp.extremum_time * 1e6:.2f} us"
            f" regime={r.regime} warnings={len(r.warnings)} [{flag}]"
        )
        text.extend(f"    warning: {m}" for m in r.warnings)
    if cfg.out:
        Path(cfg.out).write_text(csv.getvalue())
    sys.stdout.write("\n".join(text) + "\n")
    _write_svg(cfg, runs, _title(cfg))
    return EXIT_DIVERGED if any(r.warnings for r in runs) else EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    cset = crystal_set(cfg)
    buf = io.StringIO()
    buf.write(_header(cfg, [("crystal_source", cset.source), ("orientations", str(len(cset)))]))
    buf.write("omega1_over_2pi_Hz,C_Q_Hz,ratio_omegaQ_over_omega1,nRegimeI,nRegimeII,fraction_regime_I,fraction_regime_II,weight_regime_I\n")
    for rf in cfg.rf_hz:
        for cq in cfg.cq_hz:
            wq, w1 = quad_frequency(cq), 2 * math.pi * rf
            if w1 <= 0:
                raise ConfigurationError("classify needs omega1 > 0")
            c = pw.classify(cset, wq, w1, cfg.eta)
            buf.write(
                f"{_hz(rf)},{_hz(cq)},{wq / w1:.6g},{c.n_regime1},{c.n_regime2},"
                f"{c.fraction_regime1:.6f},{c.fraction_regime2:.6f},{c.weight_regime1:.6f}\n"
            )
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_gen_crystal(cfg: RunConfig) -> int:
    if not cfg.crystal_gen:
        raise ConfigurationError("gen-crystal needs --crystal-gen scheme:count")
    if not cfg.out:
        raise ConfigurationError("gen-crystal needs --out")
    pw.save_crystal_file(crystal_set(cfg, default=None), cfg.out)
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "compare": cmd_compare,
    "classify": cmd_classify,
    "gen-crystal": cmd_gen_crystal,
    "powder": cmd_powder,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigurationError, pw.CrystalFileError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
