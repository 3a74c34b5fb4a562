"""Pipeline driver: data -> sunflower map -> block -> pair -> index map -> symbolic dynamics.

Subcommands run the pipeline up to a stage and write what that stage
produces; ``all`` runs everything and ``verify-report`` re-checks a report
from its serialized matrices alone.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import __version__, qmat
from .conley import ConleyIndex, lefschetz
from .dynamics import (
    BudgetExceeded, EmptyCandidate, NoStrategySucceeded, block_pair, build_weak_index_pair,
    close_return_seed, find_isolating_block, invariant_cells, is_isolating_block, recurrent_cells,
    verify_weak_index_pair,
)
from .grid import (
    CubicalSet, GridGeometry, cells_of_box, closure, coarsen, components, dump_cubes, eps_hull,
    load_cubes, refine, snap,
)
from .homology import GradedEndomorphism, index_map
from .ingest import TimeSeries, delay_embed, delayed_henon_series, henon_series, read_series
from .mvmap import (
    SampleSet, SunflowerMap, check_values_acyclic, double_enclosure, horizontal_enclosure,
    restrict_to_domain,
)
from .symbolic import (
    Decomposition, certify_word, edges, entropy_lower_bound, enumerate_admissible,
    lefschetz_completeness, to_dot, transition_matrix,
)

log = logging.getLogger("sampledconley")

SCHEMA = "sampledconley-report/1"
CONFIG_HEADER = "# sampledconley-config 1"
STAGES = ["generate", "embed", "enclose", "isolate", "index", "analyze", "certify"]


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


class VerificationFailed(RuntimeError):
    def __init__(self, stage, detail=""):
        super().__init__(f"verification failed at {stage}" + (f": {detail}" if detail else ""))
        self.stage = stage


# configuration ---------------------------------------------------------------------

@dataclass
class PipelineConfig:
    map: str = "henon"  # henon | delayed-henon | cubic | txt | csv | samples
    input: str | None = None
    column: int = 0
    a: float = 1.65
    b: float = 0.1
    x0: float = 0.0
    y0: float = 0.0
    z0: float = 0.0
    burn: int = 100
    count: int = 29901
    cubic_n: float = 2.0
    dim: int = 2
    delta: float = 0.008127
    eps_level: int = 1
    seed_region: str = "domain"
    budget: int = 60
    check: str = "full"  # fast skips the epsilon certificate
    maxlen: int = 8
    robust_rounds: int = 3
    closure_budget: int = 10_000
    max_word: int = 64
    out: str = "out"

    def validate(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.eps_level < 1:
            raise ValueError("eps-level must be >= 1 (eps = delta / 2**k below delta)")
        if self.check not in ("fast", "full"):
            raise ValueError("check must be fast or full")
        if self.map not in ("henon", "delayed-henon", "cubic", "txt", "csv", "samples"):
            raise ValueError(f"unknown map {self.map!r}")
        if self.map in ("txt", "csv", "samples") and not self.input:
            raise ValueError(f"--map {self.map} needs --input")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        lines = [CONFIG_HEADER]
        for k, v in self.to_dict().items():
            if v is not None:
                lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        lines = text.splitlines()
        if not lines or lines[0].strip() != CONFIG_HEADER:
            raise ValueError(f"config must start with {CONFIG_HEADER!r}")
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for n, line in enumerate(lines[1:], 2):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise ValueError(f"config line {n}: expected key = value")
            k, v = (t.strip() for t in s.split("=", 1))
            k = k.replace("-", "_")
            if k not in types:
                raise ValueError(f"config line {n}: unknown key {k!r}")
            kw[k] = _convert(types[k], v)
        return cls(**kw)


def _convert(typ, v):
    t = str(typ)
    if "int" in t:
        return int(v)
    if "float" in t:
        return float(v)
    return v


# stages ----------------------------------------------------------------------------

def load_series(cfg: PipelineConfig) -> TimeSeries | None:
    if cfg.map == "henon":
        return henon_series(cfg.a, cfg.b, cfg.x0, cfg.y0, cfg.burn, cfg.count)
    if cfg.map == "delayed-henon":
        return delayed_henon_series(cfg.a, cfg.b, cfg.x0, cfg.y0, cfg.z0, cfg.burn, cfg.count)
    if cfg.map in ("txt", "csv"):
        return read_series(cfg.input, cfg.map, cfg.column)
    return None


def cubic_samples(count: int, n: float = 2.0) -> SampleSet:
    """Graph of ``x + (n/2) x (1-x)(2x-1)`` on ``count`` evenly spaced points of [0, 1]."""
    x = np.linspace(0.0, 1.0, count)
    return SampleSet.scalar(x, x + 0.5 * n * x * (1 - x) * (2 * x - 1))


def load_samples(cfg: PipelineConfig, series: TimeSeries | None) -> SampleSet:
    if cfg.map == "cubic":
        if cfg.dim != 1:
            raise ValueError("the cubic example is one-dimensional")
        return cubic_samples(cfg.count, cfg.cubic_n)
    if cfg.map == "samples":
        data = np.loadtxt(cfg.input, delimiter=",", ndmin=2)
        if data.shape[1] != 2 * cfg.dim:
            raise ValueError(f"samples file needs {2 * cfg.dim} columns, got {data.shape[1]}")
        return SampleSet(data[:, :cfg.dim], data[:, cfg.dim:])
    return delay_embed(series, cfg.dim)


def make_seed(cfg: PipelineConfig, F, samples: SampleSet) -> CubicalSet | None:
    """Parse the seed-region spec.

    ``domain``; ``morse`` (recurrent cells of the domain); ``periodic:P[,P..][@tol]``
    (close returns of the sampled trajectory); ``box:lo:hi,lo:hi,..`` (real
    coordinates); ``file:PATH`` (cube dump).
    """
    spec = cfg.seed_region.strip()
    g = F.geometry
    if spec == "domain":
        return None
    if spec == "morse":
        cells = [c for S in recurrent_cells(F, F.domain) for c in S]
        if not cells:
            raise EmptyCandidate("the domain has no recurrent cells")
        return closure(CubicalSet(cells, g.dim, g.level))
    kind, _, arg = spec.partition(":")
    if kind == "periodic":
        per, _, tol = arg.partition("@")
        periods = [int(p) for p in per.split(",") if p]
        return close_return_seed(samples, periods, float(tol) if tol else g.pitch, g)
    if kind == "box":
        ivs = [tuple(float(t) for t in iv.split(":")) for iv in arg.split(",")]
        if len(ivs) != g.dim:
            raise ValueError("box seed needs one lo:hi per dimension")
        lo = [math.floor(snap([a], GridGeometry(1, g.delta, g.level))[0] / (1 << 40)) for a, _ in ivs]
        hi = [math.ceil(snap([b], GridGeometry(1, g.delta, g.level))[0] / (1 << 40)) for _, b in ivs]
        return CubicalSet.from_tops(cells_of_box(lo, hi), g.dim, g.level)
    if kind == "file":
        with open(arg) as fh:
            return load_cubes(fh.read(), g.dim)
    raise ValueError(f"unknown seed region {spec!r}")


def _mat_json(M) -> list:
    return [[qmat.frac_str(x) for x in r] for r in M]


def _sizes(S: CubicalSet) -> dict:
    return dict(tops=len(S.tops()), cells=len(S.cells))


def epsilon_pair(F, N: CubicalSet, P1: CubicalSet, P2: CubicalSet, k: int):
    """Block and pair checks for the enclosures at radius ``pitch / 2**k``.

    Checks that ``N`` is an isolating block for ``F_eps`` and ``(F_eps)^eps``
    and that ``R = (eps-hull(P1) cap N, eps-hull(P2) cap N)`` is a weak index
    pair for ``(F_eps)^eps``.  If that hull pair fails (the enlarged
    invariant set may reach the hull of the exit set) a pair is rebuilt for
    ``(F_eps)^eps`` in ``N``.  All maps live on the domain, refined.
    Returns ``(summary, Fee, Nk, R1, R2)``.
    """
    if k < 1:
        raise VerificationFailed("epsilon", "k must be >= 1")
    Fe = restrict_to_domain(horizontal_enclosure(F, k))
    Fee = restrict_to_domain(double_enclosure(F, k))
    Nk = refine(N, k)
    out = {"k": k, "eps": F.geometry.delta / 2 ** k}
    for name, G in (("horizontal", Fe), ("double", Fee)):
        blk = is_isolating_block(G, Nk)
        out[f"block_{name}"] = blk.ok
        if not blk.ok:
            raise VerificationFailed(f"epsilon/{name}", f"{len(blk.violations)} block violations")
    R1 = eps_hull(P1, k) & Nk
    R2 = eps_hull(P2, k) & Nk
    rep = verify_weak_index_pair(Fee, Nk, R1, R2)
    out["hull_pair"] = rep.as_dict()
    if rep.ok:
        out["pair_source"] = "hull"
    else:
        try:
            pr = build_weak_index_pair(Fee, Nk)
        except NoStrategySucceeded as e:
            raise VerificationFailed("epsilon/pair", f"hull pair fails {rep.failed()}, rebuild: {e}") from e
        R1, R2, rep = pr.P1, pr.P2, pr.report
        out["pair_source"] = f"rebuilt ({pr.strategy})"
    out["pair"] = rep.as_dict()
    return out, Fee, Nk, R1, R2


def emit_epsilon_certificate(F, N: CubicalSet, P1: CubicalSet, P2: CubicalSet, k: int,
                             reference: ConleyIndex | None = None, _pair=None) -> dict:
    """The robustness certificate: ``epsilon_pair`` plus, for a rebuilt pair,
    equality of its Conley index with ``reference``."""
    out, Fee, Nk, R1, R2 = _pair or epsilon_pair(F, N, P1, P2, k)
    out = dict(out)
    if reference is not None and out["pair_source"] != "hull":
        I, _, _ = index_map(Fee, Nk, R1, R2)
        got = ConleyIndex.of(I)
        out["conley_index"] = got.to_json()
        if got != reference:
            raise VerificationFailed("epsilon/index", "Conley index differs from the unperturbed one")
    out["statement"] = ("for every continuous f whose graph lies within eps of the graph of F, "
                        "N is an isolating neighbourhood and the index map of f on R is "
                        "conjugate to the index map of F on P")
    return out


def robust_block(F, seed, k: int, budget: int, rounds: int = 3, log=None):
    """Isolating block and pair for ``F`` that also pass ``epsilon_pair``.

    When the double enclosure has no pair in the refined block, its own block
    search is run from there, the result is coarsened and the block search
    for ``F`` restarts from it.  Returns ``(block, pair, eps_state, rounds)``;
    ``eps_state`` is the last ``epsilon_pair`` result or the failure.
    """
    blk = find_isolating_block(F, seed, budget, log=log)
    pair = build_weak_index_pair(F, blk.N)
    for r in range(rounds + 1):
        try:
            return blk, pair, epsilon_pair(F, blk.N, pair.P1, pair.P2, k), r
        except VerificationFailed as e:
            if e.stage != "epsilon/pair" or r == rounds:
                return blk, pair, e, r
        Fee = restrict_to_domain(double_enclosure(F, k))
        big = find_isolating_block(Fee, refine(blk.N, k), budget, log=log)
        blk = find_isolating_block(F, coarsen(big.N, k), budget, log=log)
        pair = build_weak_index_pair(F, blk.N)
    raise AssertionError("unreachable")


def _component_indices(I, D) -> list:
    out = []
    for i in range(D.n):
        mats = {}
        for k in I.degrees():
            idx = D.indices(k, i)
            mats[k] = [[I[k][r][c] for c in idx] for r in idx]
        ci = ConleyIndex.of(GradedEndomorphism(mats))
        j = ci.to_json()
        j["component"] = i + 1
        j["degrees"] = sorted(int(k) for k in j["dims"])
        out.append(j)
    return out


def run_pipeline(cfg: PipelineConfig, until: str = "certify", write: bool = True) -> dict:
    """Run the stages up to ``until``; return the report (also written to ``cfg.out``)."""
    cfg.validate()
    stop = STAGES.index(until)
    T = {}
    report = {"schema": SCHEMA, "version": __version__, "config": cfg.to_dict(), "checks": {}}
    checks = report["checks"]
    outdir = cfg.out
    if write:
        os.makedirs(os.path.join(outdir, "cubes"), exist_ok=True)
        os.makedirs(os.path.join(outdir, "matrices"), exist_ok=True)

    def stage(name):
        def wrap(fn):
            t = time.perf_counter()
            try:
                return fn()
            except (VerificationFailed, StageError):
                raise
            except Exception as e:  # label and re-raise
                raise StageError(name, e) from e
            finally:
                T[name] = round(time.perf_counter() - t, 3)
        return wrap

    def put(name, text):
        if write:
            with open(os.path.join(outdir, name), "w") as fh:
                fh.write(text)

    def finish():
        report["timings"] = T
        report["ok"] = all(checks.values()) if checks else True
        if write:
            put("report.json", json.dumps(report, indent=1, sort_keys=True) + "\n")
        return report

    series = stage("generate")(lambda: load_series(cfg))
    if series is not None:
        report["series"] = dict(length=len(series), meta=series.meta)
        put("series.txt", series.dump())
    if stop == 0:
        return finish()
    samples = stage("embed")(lambda: load_samples(cfg, series))
    report["samples"] = len(samples)
    if stop == 1:
        return finish()

    def enclose():
        g = GridGeometry(cfg.dim, cfg.delta)
        return restrict_to_domain(SunflowerMap(samples, g))
    F = stage("enclose")(enclose)
    report["domain"] = dict(_sizes(F.domain), components=len(components(F.domain)))
    put("cubes/domain.txt", dump_cubes(F.domain))
    if stop == 2:
        return finish()

    def isolate():
        seed = make_seed(cfg, F, samples)
        if cfg.check == "full":
            return robust_block(F, seed, cfg.eps_level, cfg.budget, cfg.robust_rounds, log=log.info)
        blk = find_isolating_block(F, seed, cfg.budget, log=log.info)
        return blk, build_weak_index_pair(F, blk.N), None, 0
    blk, pair, eps_state, rounds = stage("isolate")(isolate)
    N, P1, P2 = blk.N, pair.P1, pair.P2
    comps = components(N)
    checks["block"] = blk.ok
    checks["pair"] = pair.report.ok
    report["block"] = dict(_sizes(N), components=len(comps), component_sizes=[len(c.tops()) for c in comps],
                           steps=len(blk.history), epsilon_rounds=rounds)
    report["pair"] = dict(strategy=pair.strategy, conditions=pair.report.as_dict(),
                          P1=_sizes(P1), P2=_sizes(P2))
    put("cubes/N.txt", dump_cubes(N))
    put("cubes/P1.txt", dump_cubes(P1))
    put("cubes/P2.txt", dump_cubes(P2))
    for i, c in enumerate(comps, 1):
        put(f"cubes/N_{i}.txt", dump_cubes(c))
    if stop == 3:
        return finish()

    def index():
        acyc = check_values_acyclic(F, P1)
        checks["acyclic"] = acyc.ok
        report["acyclicity"] = dict(ok=acyc.ok, checked=acyc.checked, failures=len(acyc.failures))
        if not acyc.ok:
            raise VerificationFailed("index", f"{len(acyc.failures)} non-acyclic carriers on P1")
        I, basis, _ = index_map(F, N, P1, P2)
        return I, basis
    I, basis = stage("index")(index)
    report["betti"] = basis.betti
    report["index_map"] = dict(homological=I.to_json(), cohomological=I.transpose().to_json())
    ci = ConleyIndex.of(I)
    report["conley_index"] = ci.to_json()
    put("matrices/index_hom.json", json.dumps(I.to_json(), indent=1) + "\n")
    put("matrices/index_coh.json", json.dumps(I.transpose().to_json(), indent=1) + "\n")
    if stop == 4:
        return finish()

    def analyze():
        D = Decomposition.from_supports(comps, basis)
        A = transition_matrix(I, D)
        comp = lefschetz_completeness(I, D, cfg.closure_budget, cfg.max_word)
        words = enumerate_admissible(A, cfg.maxlen)
        certs = [certify_word(I, D, w, A) for w in words]
        ent = entropy_lower_bound(A) if A.any() else None
        return D, A, comp, certs, ent
    D, A, comp, certs, ent = stage("analyze")(analyze)
    report["decomposition"] = {str(k): [c + 1 for c in v] for k, v in D.assign.items()}
    report["transition_matrix"] = A.tolist()
    report["completeness"] = comp.to_json()
    report["certificates"] = [c.to_json() for c in certs]
    report["entropy"] = ent.to_json() if ent else dict(spectral_radius=0.0, entropy=0.0)
    report["component_indices"] = _component_indices(I, D)
    put("transitions.dot", to_dot(A))
    put("matrices/transition.json", json.dumps(A.tolist()) + "\n")
    if stop == 5:
        return finish()

    if cfg.check == "full":
        def certify():
            if isinstance(eps_state, Exception):
                raise eps_state
            return emit_epsilon_certificate(F, N, P1, P2, cfg.eps_level, ci, eps_state)
        try:
            report["epsilon_certificate"] = stage("certify")(certify)
            checks["epsilon"] = True
        except (VerificationFailed, StageError) as e:
            report["epsilon_certificate"] = dict(error=str(e))
            checks["epsilon"] = False
    return finish()


# report verification ---------------------------------------------------------------

def verify_report(report: dict) -> list:
    """Re-check every certificate in ``report`` from its matrices; return mismatches."""
    bad = []
    if report.get("schema") != SCHEMA:
        return [f"unknown schema {report.get('schema')!r}"]
    if "index_map" not in report:
        return bad
    I = GradedEndomorphism.from_json(report["index_map"]["homological"])
    if I.transpose().to_json() != report["index_map"]["cohomological"]:
        bad.append("cohomological matrix is not the transpose")
    if ConleyIndex.of(I).to_json() != report["conley_index"]:
        bad.append("conley index does not match the index map")
    if "decomposition" not in report:
        return bad
    dec = report["decomposition"]
    n = len(report["transition_matrix"])
    D = Decomposition(n, {int(k): [c - 1 for c in v] for k, v in dec.items()})
    A = transition_matrix(I, D)
    if A.tolist() != report["transition_matrix"]:
        bad.append("transition matrix")
    cfg = report["config"]
    comp = lefschetz_completeness(I, D, cfg["closure_budget"], cfg["max_word"])
    if comp.to_json() != report["completeness"]:
        bad.append("completeness verdict")
    for c in report["certificates"]:
        got = certify_word(I, D, c["word"], A).to_json()
        if got != c:
            bad.append(f"certificate {c['word']}")
    if A.any():
        ent = entropy_lower_bound(A)
        if abs(ent.spectral_radius - report["entropy"]["spectral_radius"]) > 1e-9:
            bad.append("entropy")
    if _component_indices(I, D) != report["component_indices"]:
        bad.append("component indices")
    return bad


# command line ----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (flags override it)")
    common.add_argument("--map", dest="map", choices=["henon", "delayed-henon", "cubic", "txt", "csv", "samples"])
    common.add_argument("--input", help="series or samples file")
    common.add_argument("--column", type=int)
    for name in ("a", "b", "x0", "y0", "z0", "delta", "cubic-n"):
        common.add_argument(f"--{name}", type=float)
    for name in ("burn", "count", "dim", "eps-level", "budget", "robust-rounds", "maxlen", "closure-budget",
                 "max-word"):
        common.add_argument(f"--{name}", type=int)
    common.add_argument("--seed-region", help="domain | morse | periodic:P[,P][@tol] | box:lo:hi,.. | file:PATH")
    common.add_argument("--check", choices=["fast", "full"])
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="sampledconley", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for s in STAGES + ["all"]:
        sub.add_parser(s, parents=[common], help=f"run the pipeline up to {s}" if s != "all" else "run everything")
    vr = sub.add_parser("verify-report", help="re-check a report.json from its matrices")
    vr.add_argument("report")
    return p


def config_from_args(args) -> PipelineConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = PipelineConfig.loads(fh.read())
    else:
        cfg = PipelineConfig()
    for f in dataclasses.fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    return cfg.validate()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    if args.command == "verify-report":
        with open(args.report) as fh:
            rep = json.load(fh)
        bad = verify_report(rep)
        for b in bad:
            print(f"MISMATCH {b}")
        print("report verified" if not bad else f"{len(bad)} mismatches")
        return 0 if not bad else 1
    try:
        cfg = config_from_args(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    until = "certify" if args.command == "all" else args.command
    try:
        rep = run_pipeline(cfg, until)
    except (StageError, VerificationFailed) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    _summary(rep)
    return 0 if rep["ok"] else 1


def _summary(rep):
    if "domain" in rep:
        print(f"domain: {rep['domain']['tops']} top cubes")
    if "block" in rep:
        print(f"block: {rep['block']['components']} components, {rep['block']['tops']} cubes")
        print(f"pair ({rep['pair']['strategy']}): {rep['pair']['conditions']}")
    if "betti" in rep:
        print(f"betti: {rep['betti']}")
    if "transition_matrix" in rep:
        print(f"transitions: {edges(rep['transition_matrix'])}")
        print(f"completeness: {rep['completeness']['verdict']}")
        print(f"entropy >= {rep['entropy']['entropy']:.6f}")
    if "epsilon_certificate" in rep:
        print(f"epsilon certificate: {'ok' if rep['checks'].get('epsilon') else rep['epsilon_certificate']}")
    print("ok" if rep["ok"] else "FAILED checks: " + ", ".join(k for k, v in rep["checks"].items() if not v))


if __name__ == "__main__":
    sys.exit(main())
