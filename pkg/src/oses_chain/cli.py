"""Command-line scenario runner.

    oses-chain run --scenario two-site --gamma 0.25 --out two_site.csv
    oses-chain compare --scenario four-site --chi 16 --out report.json

Options may also come from a ``key=value`` file passed with ``--config``;
command-line flags take precedence over file values.
"""

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from typing import List, Optional

import numpy as np

from . import analytic, mps
from .dynamics import LindbladModel, evolve, particle_on_site, xi_from_block
from .errors import CapabilityError, OsesError
from .hilbert import single_excitation_index
from .oses import OsesSpectrum, oses_spectrum, purity
from .plot import write_svg

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 2, 3, 4

SCENARIOS = {
    "two-site": {"sites": 2, "gamma": 0.25},
    "four-site": {"sites": 4, "gamma": 0.3},
    "chain": {"sites": 6, "gamma": 0.3},
}
COMPARE_MAX_SITES = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "two-site"
    sites: Optional[int] = None
    hopping: float = 1.0
    gamma: Optional[float] = None
    tmax: float = 20.0
    dt: float = 1e-3
    cut: Optional[int] = None
    initial_site: int = 1
    method: str = "exact"
    chi: Optional[int] = None
    out: Optional[str] = None
    emit_plot: bool = False
    stride: int = 10
    tolerance: float = 1e-6

    def resolved(self) -> "RunConfig":
        """Fill scenario defaults and validate; raises ConfigError."""
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        defaults = SCENARIOS[self.scenario]
        sites = self.sites if self.sites is not None else defaults["sites"]
        if self.scenario != "chain" and sites != defaults["sites"]:
            raise ConfigError(f"scenario {self.scenario} has {defaults['sites']} sites, got --sites {sites}")
        if not 2 <= sites <= 8:
            raise ConfigError(f"sites must be in 2..8, got {sites}")
        gamma = self.gamma if self.gamma is not None else defaults["gamma"]
        cut = self.cut if self.cut is not None else sites // 2
        chi = self.chi if self.chi is not None else 4 ** (sites // 2)
        out = self.out or f"oses_{self.scenario}.csv"
        cfg = replace(self, sites=sites, gamma=gamma, cut=cut, chi=chi, out=out)
        for name in ("hopping", "gamma", "tmax", "dt", "tolerance"):
            if not math.isfinite(getattr(cfg, name)):
                raise ConfigError(f"{name} must be finite")
        if cfg.dt <= 0:
            raise ConfigError("dt must be positive")
        if cfg.tmax < 0:
            raise ConfigError("tmax must be >= 0")
        if cfg.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if abs(round(cfg.tmax / cfg.dt) * cfg.dt - cfg.tmax) > 1e-9 * max(1.0, cfg.tmax):
            raise ConfigError("tmax must be an integer multiple of dt")
        if not 1 <= cfg.cut <= sites - 1:
            raise ConfigError(f"cut must be in 1..{sites - 1}, got {cfg.cut}")
        if not 1 <= cfg.initial_site <= sites:
            raise ConfigError(f"initial site must be in 1..{sites}, got {cfg.initial_site}")
        if cfg.method not in ("exact", "mps"):
            raise ConfigError(f"method must be 'exact' or 'mps', got {cfg.method!r}")
        if cfg.chi < 1:
            raise ConfigError("chi must be >= 1")
        if cfg.stride < 1:
            raise ConfigError("stride must be >= 1")
        return cfg

    @property
    def model(self) -> LindbladModel:
        return LindbladModel(self.sites, self.hopping, self.gamma)


@dataclass
class Sample:
    time: float
    spectrum: OsesSpectrum
    purity: float
    densities: np.ndarray
    block: Optional[np.ndarray]


def _exact_samples(cfg: RunConfig) -> List[Sample]:
    traj = evolve(cfg.model, particle_on_site(cfg.sites, cfg.initial_site), cfg.tmax, cfg.dt, cfg.stride)
    idx = [1 << (cfg.sites - j) for j in range(1, cfg.sites + 1)]
    out = []
    for t, rho, dens in zip(traj.times, traj.states, traj.densities):
        block = rho[np.ix_(idx, idx)] if traj.xi is not None else None
        out.append(Sample(float(t), oses_spectrum(rho, cfg.cut), purity(rho), dens, block))
    return out


def _mps_block(state: mps.VectorizedMps) -> np.ndarray:
    length = state.length
    block = np.zeros((length, length), dtype=complex)
    for j in range(1, length + 1):
        block[j - 1, j - 1] = state.coefficient(single_excitation_index(length, j)).real
        for l in range(j + 1, length + 1):
            block[j - 1, l - 1] = state.coefficient(single_excitation_index(length, j, l, "+"))
            block[l - 1, j - 1] = np.conj(block[j - 1, l - 1])
    return block


def _mps_samples(cfg: RunConfig) -> tuple:
    start = mps.from_density_matrix(particle_on_site(cfg.sites, cfg.initial_site), cfg.chi)
    traj = mps.evolve_tebd(start, cfg.model, cfg.tmax, cfg.dt, cfg.stride)
    out = []
    for t, state in zip(traj.times, traj.states):
        out.append(
            Sample(float(t), mps.oses_at_bond(state, cfg.cut), state.purity, state.densities(), _mps_block(state))
        )
    return out, float(traj.discarded_weight[-1])


def _block_spectrum(block: np.ndarray, cut: int) -> Optional[analytic.BlockSpectrum]:
    total = np.trace(block).real
    if abs(total - 1.0) > 1e-9:
        return None
    # Tolerate tiny trace drift from the integrator before the exact-trace check.
    state = analytic.SingleExcitationState(block / total)
    return analytic.block_spectrum(state, cut)


def _fmt(x: float) -> str:
    x = float(x)
    if x == 0:
        x = 0.0
    return format(x, ".12g")


def write_csv(path: str, cfg: RunConfig, samples: List[Sample]) -> None:
    length, cut = cfg.sites, cfg.cut
    k = 4 ** min(cut, length - cut)
    pairs = [(j, l) for j in range(1, length + 1) for l in range(j + 1, length + 1)]
    header = ["time"]
    header += [f"lambda_{i}" for i in range(1, k + 1)]
    header += [f"schmidt_{i}" for i in range(1, k + 1)]
    header += ["osee", "purity"]
    header += [f"n_{j}" for j in range(1, length + 1)]
    header += [f"abs_xi_{j}_{l}" for j, l in pairs]
    header += ["block_a2", "block_a1"] + [f"coherence_{i}" for i in range(1, cut + 1)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for s in samples:
            lam = s.spectrum.padded(k)
            row = [s.time, *lam, *np.sqrt(lam), s.spectrum.osee, s.purity, *s.densities]
            if s.block is not None:
                xi = np.abs(xi_from_block(s.block))
                row += [xi[j - 1, l - 1] for j, l in pairs]
            else:
                row += [math.nan] * len(pairs)
            blocks = _block_spectrum(s.block, cut) if s.block is not None else None
            if blocks is not None:
                row += [blocks.lambda1, blocks.lambda2, *blocks.coherence]
            else:
                row += [math.nan] * (2 + cut)
            writer.writerow([_fmt(x) for x in row])


def _plot(path: str, cfg: RunConfig, samples: List[Sample]) -> None:
    k = 4 ** min(cfg.cut, cfg.sites - cfg.cut)
    lam = np.array([s.spectrum.padded(k) for s in samples])
    shown = [i for i in range(k) if np.max(lam[:, i]) > 0]
    top = {f"L{i + 1}": lam[:, i] for i in shown}
    bottom = {"OSEE": [s.spectrum.osee for s in samples], "purity": [s.purity for s in samples]}
    write_svg(path, [s.time for s in samples], top, bottom)


def run(cfg: RunConfig) -> int:
    """Evolve the configured chain and write the CSV (and optional SVG)."""
    cfg = cfg.resolved()
    samples = _exact_samples(cfg) if cfg.method == "exact" else _mps_samples(cfg)[0]
    write_csv(cfg.out, cfg, samples)
    log.info("wrote %d samples to %s", len(samples), cfg.out)
    if cfg.emit_plot:
        svg_path = cfg.out.rsplit(".", 1)[0] + ".svg"
        _plot(svg_path, cfg, samples)
        log.info("wrote plot to %s", svg_path)
    return EXIT_OK


def compare(cfg: RunConfig) -> int:
    """Run exact, MPS and analytic paths on one trajectory and report max deviations."""
    cfg = cfg.resolved()
    if cfg.sites > COMPARE_MAX_SITES:
        raise CapabilityError(f"compare needs the exact path, limited to L <= {COMPARE_MAX_SITES}")
    k = 4 ** min(cfg.cut, cfg.sites - cfg.cut)
    exact = _exact_samples(cfg)
    approx, discarded = _mps_samples(cfg)
    dev = {
        "oses_exact_vs_mps": 0.0,
        "purity_exact_vs_mps": 0.0,
        "densities_exact_vs_mps": 0.0,
        "oses_exact_vs_analytic": 0.0,
    }
    deficit = 0.0
    for e, a in zip(exact, approx):
        dev["oses_exact_vs_mps"] = max(dev["oses_exact_vs_mps"], float(np.max(np.abs(e.spectrum.padded(k) - a.spectrum.padded(k)))))
        dev["purity_exact_vs_mps"] = max(dev["purity_exact_vs_mps"], abs(e.purity - a.purity))
        dev["densities_exact_vs_mps"] = max(dev["densities_exact_vs_mps"], float(np.max(np.abs(e.densities - a.densities))))
        deficit = max(deficit, e.purity - a.purity)
        blocks = _block_spectrum(e.block, cfg.cut)
        if blocks is not None:
            diff = np.max(np.abs(e.spectrum.padded(k) - blocks.padded(k)[:k]))
            dev["oses_exact_vs_analytic"] = max(dev["oses_exact_vs_analytic"], float(diff))
    passed = all(v <= cfg.tolerance for v in dev.values())
    report = {
        "config": asdict(cfg),
        "samples": len(exact),
        "tolerance": cfg.tolerance,
        "max_deviation": dev,
        "purity_deficit": deficit,
        "discarded_weight": discarded,
        "passed": passed,
    }
    with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, value in dev.items():
        log.info("%-26s %.3e", name, value)
    return EXIT_OK if passed else EXIT_TOLERANCE


def read_config_file(path: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


_FIELD_TYPES = {
    "scenario": str,
    "sites": int,
    "hopping": float,
    "gamma": float,
    "tmax": float,
    "dt": float,
    "cut": int,
    "initial_site": int,
    "method": str,
    "chi": int,
    "out": str,
    "emit_plot": lambda v: v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes", "on"),
    "stride": int,
    "tolerance": float,
}


def build_config(args: argparse.Namespace) -> RunConfig:
    merged = {}
    if args.config:
        try:
            merged.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    unknown = set(merged) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        typed = {k: _FIELD_TYPES[k](v) for k, v in merged.items()}
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return RunConfig(**typed)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oses-chain", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "evolve a chain and write the OSES time series"),
        ("compare", "cross-check exact, MPS and analytic paths"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", choices=sorted(SCENARIOS))
        p.add_argument("--sites", type=int)
        p.add_argument("--hopping", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--tmax", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--cut", type=int, help="bond index m (default: central bond)")
        p.add_argument("--initial-site", dest="initial_site", type=int)
        p.add_argument("--method", choices=("exact", "mps"))
        p.add_argument("--chi", type=int, help="MPS bond dimension cap")
        p.add_argument("--out", help="output path (CSV for run, JSON for compare)")
        p.add_argument("--emit-plot", dest="emit_plot", action="store_true", default=None)
        p.add_argument("--stride", type=int, help="integration steps per output sample")
        p.add_argument("--tolerance", type=float, help="compare: max allowed deviation")
        p.add_argument("--config", help="key=value file; flags override its values")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "compare" and cfg.out is None:
            cfg = replace(cfg, out=f"compare_{cfg.scenario}.json")
        return run(cfg) if args.command == "run" else compare(cfg)
    except (ConfigError, CapabilityError) as exc:
        parser.exit(EXIT_USAGE, f"oses-chain: error: {exc}\n")
    except OsesError as exc:
        print(f"oses-chain: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"oses-chain: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
