"""End-to-end workflow: FCIDUMP -> fragments -> repartition -> exact report."""

from __future__ import annotations

import dataclasses
import functools
import importlib.resources
import logging
import os
import time
import typing
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fluid import RepartitionSolution, Variant, apply_repartition, iterate, n_variables
from .fock.basis import SectorBasis
from .fock.operators import hamiltonian_operator
from .fock.states import ProxyKind, ProxyState, ground_state
from .fragments import FragmentSet, GFROConfig, gfro_decompose, lr_decompose
from .metrics import MeasurementReport, exact_report
from .tensors import RawIntegrals, SpatialTensors, read_fcidump, spin_expand_tensors, to_chemist

logger = logging.getLogger(__name__)

METHODS = ("lr", "gfro")
VARIANTS = ("none", "full", "r1", "r2")
FIXTURES = ("h3p", "h4", "lih", "nh3")


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


def fixture_path(tag: str) -> Path:
    """Path of a bundled FCIDUMP fixture (``h3p``, ``h4``, ``lih``, ``nh3``)."""
    if tag not in FIXTURES:
        raise KeyError(f"unknown fixture {tag!r}; available: {', '.join(FIXTURES)}")
    return Path(str(importlib.resources.files("fluidfrag") / "data" / f"{tag}.fcidump"))


def resolve_input(spec: str | os.PathLike) -> Path:
    """Accept either a file path or a bundled fixture tag."""
    path = Path(spec)
    if path.exists():
        return path
    if str(spec) in FIXTURES:
        return fixture_path(str(spec))
    raise FileNotFoundError(f"no such FCIDUMP file or fixture: {spec}")


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    """Settings for one pipeline run. Serializes to flat ``key = value`` text."""

    input: str
    method: str = "lr"
    variant: str = "none"
    proxy: str = "cisd"
    lr_truncation: float = 1e-8
    gfro_termination: float = 1e-5
    tol: float = 1e-6
    max_iter: int = 50
    seed: int = 0
    n_restarts: int = 5
    tag: str = ""
    fragments_out: str = ""
    solution_out: str = ""
    report_out: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        ProxyKind.parse(self.proxy)
        for name in ("lr_truncation", "gfro_termination", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1 or self.n_restarts < 0:
            raise ValueError("max_iter must be >= 1 and n_restarts >= 0")

    @property
    def molecule(self) -> str:
        return self.tag or Path(self.input).stem

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {value!r}" if isinstance(value, float) else f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> PipelineConfig:
        hints = typing.get_type_hints(cls)
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in hints:
                raise ValueError(f"config line {lineno}: unrecognized entry {raw!r}")
            kind = hints[key]
            try:
                values[key] = kind(value) if kind in (int, float) else value
            except ValueError:
                raise ValueError(f"config line {lineno}: {key} expects {kind.__name__}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "input" not in values:
            raise ValueError("config is missing 'input'")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | os.PathLike, **overrides) -> PipelineConfig:
        return cls.from_text(Path(path).read_text(), **overrides)


TABLE_COLUMNS = ("LR", "GFRO", "F3-LR-Full", "F3-LR-R1", "F3-LR-R2", "F3-FR-Full", "F3-FR-R1", "F3-FR-R2")


def method_label(method: str, variant: str) -> str:
    if variant == "none":
        return method.upper()
    family = "LR" if method == "lr" else "FR"
    return f"F3-{family}-{Variant.parse(variant).value.capitalize()}"


@dataclasses.dataclass(frozen=True)
class BenchmarkRow:
    molecule: str
    n_modes: int
    method: str
    variant: str
    eps2M: float
    n_c: int
    n_f: int
    iterations: int
    wall_time: float

    @property
    def label(self) -> str:
        return method_label(self.method, self.variant)


class System:
    """Parsed Hamiltonian plus lazily computed proxy states."""

    def __init__(self, path: str | os.PathLike, tag: str = ""):
        self.path = resolve_input(path)
        self.tag = tag or self.path.stem
        self.raw: RawIntegrals = read_fcidump(self.path)
        self.spatial: SpatialTensors = to_chemist(self.raw)
        self.basis = SectorBasis(2 * self.raw.n_orbitals, self.raw.n_electrons)
        self.hamiltonian = hamiltonian_operator(spin_expand_tensors(self.spatial))
        self._states: dict[ProxyKind, ProxyState] = {}

    @property
    def n_modes(self) -> int:
        return 2 * self.raw.n_orbitals

    def state(self, kind) -> ProxyState:
        kind = ProxyKind.parse(kind)
        if kind not in self._states:
            self._states[kind] = ground_state(self.hamiltonian, self.basis, kind)
        return self._states[kind]

    def energy(self, kind) -> float:
        """Total energy including the core/nuclear constant."""
        return self.state(kind).energy + self.spatial.e_nuc


def decompose(system: System, method: str, threshold: float | None = None, seed: int = 0, n_restarts: int = 5) -> FragmentSet:
    st = system.spatial
    if method == "lr":
        return lr_decompose(st.g_tilde, threshold or 1e-8, h_tilde=st.h_tilde)
    if method == "gfro":
        cfg = GFROConfig(seed=seed, n_restarts=n_restarts)
        return gfro_decompose(st.g_tilde, threshold or 1e-5, config=cfg, h_tilde=st.h_tilde)
    raise ValueError(f"unknown method {method!r}")


def _stage(name: str):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(name, exc) from exc

        return inner

    return wrap


@dataclasses.dataclass(frozen=True)
class PipelineResult:
    row: BenchmarkRow
    fragments: FragmentSet
    solution: RepartitionSolution | None
    report: MeasurementReport


def execute(config: PipelineConfig, system: System | None = None, fragments: FragmentSet | None = None) -> PipelineResult:
    """Run every stage and return all intermediate artifacts.

    ``system`` and ``fragments`` may be supplied to reuse work across runs.
    """
    start = time.perf_counter()
    if system is None:
        system = _stage("parse")(System)(config.input, config.tag)
    if fragments is None:
        threshold = config.lr_truncation if config.method == "lr" else config.gfro_termination
        fragments = _stage("decompose")(decompose)(
            system, config.method, threshold, config.seed, config.n_restarts
        )
    psi = _stage("reference")(system.state)(ProxyKind.FCI)

    solution = None
    final = fragments
    n_c = iterations = 0
    predicted = None
    if config.variant != "none":

        @_stage("optimize")
        def optimize():
            proxy = system.state(config.proxy)
            sol = iterate(fragments, proxy, config.variant, tol=config.tol, max_iter=config.max_iter)
            return sol, apply_repartition(fragments, sol.c, config.variant)

        solution, final = optimize()
        n_c, iterations, predicted = solution.n_c, solution.iterations, solution.predicted_eps2M

    m = None if solution is None else solution.m
    report = _stage("report")(exact_report)(
        final,
        m,
        psi,
        predicted_eps2M=predicted,
        molecule=system.tag,
        method=config.method,
        variant=config.variant,
        proxy=config.proxy if solution is not None else "none",
        allocation="optimal-exact" if solution is None else "optimized-proxy",
        cisd_frozen_core="none",
    )

    @_stage("persist")
    def persist():
        if config.fragments_out:
            Path(config.fragments_out).write_text(fragments.dumps())
        if config.solution_out and solution is not None:
            Path(config.solution_out).write_text(solution.dumps())
        if config.report_out:
            Path(config.report_out).write_text(report.to_tsv())

    persist()
    row = BenchmarkRow(
        molecule=system.tag,
        n_modes=system.n_modes,
        method=config.method,
        variant=config.variant,
        eps2M=report.eps2M,
        n_c=n_c,
        n_f=fragments.n_fragments,
        iterations=iterations,
        wall_time=time.perf_counter() - start,
    )
    logger.info("%s %s: eps2M %.5e", row.molecule, row.label, row.eps2M)
    return PipelineResult(row, fragments, solution, report)


def run_pipeline(config: PipelineConfig) -> BenchmarkRow:
    """Parse, decompose, optionally repartition, and evaluate the exact cost."""
    return execute(config).row


def sweep(
    molecules: Sequence[str],
    methods: Sequence[str] = ("lr",),
    variants: Sequence[str] = VARIANTS,
    **settings,
) -> list[BenchmarkRow]:
    """All (molecule, method, variant) combinations, sharing parses and decompositions."""
    rows = []
    for mol in molecules:
        system = System(resolve_input(mol), tag=Path(mol).stem)
        for method in methods:
            fragments = None
            for variant in variants:
                cfg = PipelineConfig(input=str(system.path), tag=system.tag, method=method, variant=variant, **settings)
                result = execute(cfg, system=system, fragments=fragments)
                fragments = result.fragments
                rows.append(result.row)
    return rows


def _key(row: BenchmarkRow):
    return (row.n_modes, row.molecule)


def emit_table(rows: Iterable[BenchmarkRow], fmt: str = "tsv", timing: bool = False) -> str:
    """Pivot rows into one line per molecule with columns in the benchmark order.

    Molecules are sorted by ``N`` and then tag; missing entries show ``-``. With
    ``timing`` a final column holds the summed wall time per molecule.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("emit_table needs at least one row")
    present = {r.label for r in rows}
    columns = [c for c in TABLE_COLUMNS if c in present]
    grouped: dict[tuple, dict[str, BenchmarkRow]] = {}
    for r in sorted(rows, key=_key):
        grouped.setdefault(_key(r), {})[r.label] = r
    header = ["Sys", "N", *columns] + (["wall_s"] if timing else [])
    body = []
    for (n, mol), cells in grouped.items():
        line = [mol, str(n)] + [f"{cells[c].eps2M:.5e}" if c in cells else "-" for c in columns]
        if timing:
            line.append(f"{sum(r.wall_time for r in cells.values()):.5e}")
        body.append(line)
    return _render([header, *body], fmt)


def emit_counts(rows: Iterable[BenchmarkRow], fmt: str = "tsv") -> str:
    """Variable counts ``N_c`` and fragment counts ``N_f`` per molecule and method."""
    rows = sorted(rows, key=lambda r: (*_key(r), TABLE_COLUMNS.index(r.label)))
    table = [["Sys", "N", "method", "N_f", "N_c", "iterations"]]
    for r in rows:
        table.append([r.molecule, str(r.n_modes), r.label, str(r.n_f), str(r.n_c), str(r.iterations)])
    return _render(table, fmt)


def _render(table: list[list[str]], fmt: str) -> str:
    if fmt == "tsv":
        return "".join("\t".join(line) + "\n" for line in table)
    if fmt == "markdown":
        widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
        fmt_line = lambda line: "| " + " | ".join(x.ljust(w) for x, w in zip(line, widths)) + " |\n"
        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|\n"
        return fmt_line(table[0]) + sep + "".join(fmt_line(line) for line in table[1:])
    raise ValueError(f"unknown table format {fmt!r}")


def check_counts(row: BenchmarkRow) -> bool:
    """``N_c`` arithmetic: ``N_f * N/2`` for Full, ``N_f`` for R1/R2, 0 without repartitioning."""
    if row.variant == "none":
        return row.n_c == 0
    per = row.n_modes // 2 if row.variant == "full" else 1
    return row.n_c == row.n_f * per


__all__ = [
    "BenchmarkRow",
    "FIXTURES",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "System",
    "check_counts",
    "decompose",
    "emit_counts",
    "emit_table",
    "execute",
    "fixture_path",
    "method_label",
    "resolve_input",
    "run_pipeline",
    "sweep",
]
