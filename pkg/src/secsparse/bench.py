"""Scenario runners producing CSV rows of ledger measurements.

Each runner is deterministic in its configuration: every point derives its
own generator from ``(seed, point index)``. Dense products whose inputs
would not fit at desk scale are reported from :func:`dense.dense_cost`
(marked ``source=model``); everything else is measured.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import knowledge as kn
from .dense import dense_cost, dense_matmat, dense_matvec, share_dense
from .field import DEFAULT_FIELD, PrimeField, make_field
from .protocols import compute_minmult, gram, sparse_matvec
from .runtime import ConfigurationError, CostLedger, ProtocolContext
from .sparse import PlainSparse, coord_width, owner_share_matrix, owner_share_vector, sparse_storage

# largest prime below 2**30; with 32-byte accounting it reproduces the ledger
# of the full field while running on machine integers
COST_ONLY_PRIME = 1073741789
DENSE_MEASURE_LIMIT = 1 << 16


def cost_only_field() -> PrimeField:
    return make_field(COST_ONLY_PRIME, wire_bytes=DEFAULT_FIELD.wire_bytes)


@dataclass
class ScenarioConfig:
    scenario: str
    sizes: tuple[int, ...] = (256, 512, 1024)
    sparsities: tuple[float, ...] = (0.999, 0.9999)
    rows: int = 100
    seed: int = 0
    parties: int = 3
    threshold: int = 1
    mode: str = "optimized"
    cost_only: bool = False
    nnz_cap: int = 1 << 14
    coord_bits: int | None = None

    def __post_init__(self):
        if any(not 0 < s < 1 for s in self.sparsities):
            raise ConfigurationError("sparsity must lie in (0, 1)")
        if any(d < 1 for d in self.sizes) or self.rows < 1:
            raise ConfigurationError("dimensions must be positive")
        if self.mode not in ("naive", "optimized"):
            raise ConfigurationError("mode must be naive or optimized")
        if 2 * self.threshold >= self.parties or self.threshold < 1:
            raise ConfigurationError("need 1 <= t and 2t < N")

    def field(self) -> PrimeField:
        return cost_only_field() if self.cost_only else DEFAULT_FIELD

    def context(self, index: int) -> ProtocolContext:
        return ProtocolContext(self.parties, self.threshold, seed=self.seed * 1_000_003 + index, field=self.field())

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, index])


def random_sparse(rng: np.random.Generator, shape: tuple[int, ...], nnz: int) -> PlainSparse:
    """Uniformly placed non-zeros with magnitudes in ``[0.5, 1.5)``."""
    total = int(np.prod(shape))
    nnz = min(int(nnz), total)
    flat = np.sort(rng.choice(total, size=nnz, replace=False)) if nnz else np.zeros(0, dtype=np.int64)
    coords = np.stack(np.unravel_index(flat, shape), axis=1) + 1 if nnz else np.zeros((0, len(shape)), dtype=np.int64)
    mag = rng.uniform(0.5, 1.5, size=nnz)
    return PlainSparse(shape, coords, np.where(rng.random(nnz) < 0.5, -mag, mag))


def nnz_for(sparsity: float, cells: int) -> int:
    return int(round((1.0 - sparsity) * cells))


def _ledger_row(ledger: CostLedger) -> dict:
    return {
        "elements_sent": ledger.elements_sent,
        "bytes_sent": ledger.bytes_sent,
        "rounds": ledger.rounds,
        "peak_storage": ledger.peak_stored_elements,
    }


def _model_row(ledger: CostLedger, storage: int) -> dict:
    row = _ledger_row(ledger)
    row["peak_storage"] = storage
    return row


def measure(ctx: ProtocolContext, fn, *args, **kwargs) -> tuple[object, CostLedger]:
    before = ctx.ledger
    out = fn(*args, **kwargs)
    return out, ctx.ledger - before


def run_matvec_sweep(cfg: ScenarioConfig) -> list[dict]:
    """Square ``m x m`` matrix times a vector, dense and sparse, per size and sparsity."""
    rows = []
    width = cfg.coord_bits or coord_width(max(cfg.sizes))
    idx = 0
    for m in cfg.sizes:
        for s in cfg.sparsities:
            idx += 1
            rng = cfg.rng(idx)
            nx, ny = nnz_for(s, m * m), max(1, nnz_for(s, m))
            base = {"scenario": "matvec", "n": m, "m": m, "sparsity": s, "nnz_x": nx, "nnz_y": ny}
            ctx = cfg.context(idx)
            if m * m <= DENSE_MEASURE_LIMIT:
                X = share_dense(ctx, random_sparse(rng, (m, m), nx).to_dense())
                y = share_dense(ctx, random_sparse(rng, (m,), ny).to_dense())
                _, led = measure(ctx, dense_matvec, X, y)
                rows.append(base | {"algo": "dense", "source": "measured"} | _ledger_row(led))
            else:
                rows.append(base | {"algo": "dense", "source": "model"} | _model_row(dense_cost(ctx, m), m * m + 2 * m))
            if nx + ny > cfg.nnz_cap:
                print(f"skipping sparse m={m} sparsity={s}: {nx + ny} tuples exceed the cap", file=sys.stderr)
                continue
            ctx = cfg.context(idx)
            Xp = random_sparse(rng, (m, m), nx)
            yp = random_sparse(rng, (m,), ny)
            X = owner_share_matrix(ctx, Xp, "row", coord_bits=width)
            y = owner_share_vector(ctx, yp, coord_bits=width)
            _, led = measure(ctx, sparse_matvec, X, y, cfg.mode, row_bits=width)
            rows.append(base | {"algo": "sparse", "source": "measured"} | _ledger_row(led))
    return rows


def run_matmat_sweep(cfg: ScenarioConfig) -> list[dict]:
    """``X^T X`` for ``rows x m`` matrices, dense and sparse."""
    out = []
    idx = 0
    for m in cfg.sizes:
        for s in cfg.sparsities:
            idx += 1
            rng = cfg.rng(idx)
            n = cfg.rows
            Xp = random_sparse(rng, (n, m), nnz_for(s, n * m))
            counts = Xp.group_counts(0)
            mm = compute_minmult(counts, counts)
            base = {"scenario": "gram", "n": n, "m": m, "sparsity": s, "nnz_x": Xp.nnz, "minmult": mm}
            ctx = cfg.context(idx)
            if m * m <= DENSE_MEASURE_LIMIT and n * m <= DENSE_MEASURE_LIMIT:
                dense = Xp.to_dense()
                Xs, XTs = share_dense(ctx, dense), share_dense(ctx, dense.T)
                _, led = measure(ctx, dense_matmat, XTs, Xs)
                out.append(base | {"algo": "dense", "source": "measured"} | _ledger_row(led))
            else:
                out.append(base | {"algo": "dense", "source": "model"} | _model_row(dense_cost(ctx, m * m), 2 * n * m + m * m))
            if mm > cfg.nnz_cap:
                print(f"skipping sparse m={m} sparsity={s}: MinMult {mm} exceeds the cap", file=sys.stderr)
                continue
            ctx = cfg.context(idx)
            X = owner_share_matrix(ctx, Xp, "row", coord_bits=cfg.coord_bits)
            _, led = measure(ctx, gram, X, cfg.mode)
            out.append(base | {"algo": "sparse", "source": "measured"} | _ledger_row(led))
    return out


def run_overhead_compare(datasets: dict[str, Sequence[int]], cols: dict[str, int] | int) -> list[dict]:
    """Stored elements per padding technique for per-row non-zero counts."""
    out = []
    for name, counts in datasets.items():
        counts = np.asarray(counts, dtype=np.int64)
        m = cols[name] if isinstance(cols, dict) else int(cols)
        if counts.size == 0:
            raise ValueError(f"{name}: no rows")
        if counts.max() > m:
            raise ValueError(f"{name}: a row has more non-zeros than columns")
        n = counts.size
        width = coord_width(m)
        raw = sparse_storage(int(counts.sum()), width)
        template = kn.build_template_quantiles(kn.ECDF.from_degrees(counts))
        values = {
            "dense": n * m,
            "raw-sparse": raw,
            "anonymized": raw,
            "max-pad": sparse_storage(n * int(counts.max()), width),
            "template": template.storage(width),
        }
        for tech, v in values.items():
            out.append({"dataset": name, "rows": n, "cols": m, "technique": tech, "storage_elements": v})
    return out


def next_pow2(x: int) -> int:
    return 1 << max(1, math.ceil(math.log2(max(2, x))))


def run_dp_curves(counts: Sequence[int], max_degree: int, epsilons: Sequence[float], delta: float, block_rows: Sequence[int], seed: int = 0, noise_scale: float = 1.0) -> list[dict]:
    """DP tail bounds per threshold, one curve per (epsilon, block size).

    A block size of ``b`` rows releases ``l = next_pow2(n / b)`` thresholds,
    spread evenly over ``[1, max_degree]``.
    """
    ecdf = kn.ECDF.from_degrees(counts)
    n = ecdf.total
    out = []
    for ei, eps in enumerate(epsilons):
        for bi, b in enumerate(block_rows):
            if b < 1:
                raise ValueError("block size must be positive")
            params = kn.DpParams(eps, delta, next_pow2(math.ceil(n / b)))
            rng = np.random.default_rng([seed, ei, bi])
            th = kn.dp_thresholds(params, max_degree)
            true = np.asarray(ecdf.at(th))
            ub = kn.dp_tree_upper(true, params, rng, noise_scale)
            tmpl = kn.template_from_tail_bounds(th, ub, n, max_degree)
            area = sum(nk * bk for nk, bk in tmpl.blocks)
            for i in range(params.l):
                out.append({
                    "epsilon": eps, "delta": delta, "block_rows": b, "l": params.l, "i": i + 1,
                    "threshold": int(th[i]), "ecdf": int(true[i]), "bound": float(ub[i]), "template_slots": area,
                })
    return out


def run_popbound_curves(params: kn.PowerLawParams, rows: int, lambdas: Sequence[float], sample_size: int | None = None) -> list[dict]:
    """Population tail fraction and its upper bounds at every degree."""
    pmf = params.pmf()
    tail = np.cumsum(pmf[::-1])[::-1]
    out = []
    for lam in lambdas:
        for d in range(1, params.m + 1):
            F = float(tail[d - 1])
            row = {"lambda": lam, "degree": d, "tail": F, "upper_population": kn.pop_dist_upper(F, rows, lam)}
            if sample_size:
                row["upper_sample"] = kn.pop_sample_upper(F, sample_size, lam)
            out.append(row)
    return out


def run_quantile_template(owners: Sequence[Sequence[int]], max_degree: int, cfg: ScenarioConfig) -> tuple[kn.Template, list[dict], CostLedger]:
    """MPC quantiles over all owners' counts, scaled so every owner fits."""
    if cfg.cost_only:
        raise ConfigurationError("quantile-template opens real values; the cost-only field cannot hold them")
    ctx = cfg.context(0)
    from .oblivious import to_bits
    from .shamir import share

    all_counts = np.concatenate([np.asarray(o, dtype=np.int64) for o in owners])
    if all_counts.size == 0:
        raise ValueError("no rows")
    if all_counts.max() > max_degree:
        raise ValueError("a count exceeds the declared maximum degree")
    width = coord_width(max_degree)
    bits = share(ctx, to_bits(all_counts, width))
    approx = kn.mpc_quantile_template(bits)
    alphas = [kn.owner_alpha(o, approx) for o in owners]
    alpha, final = kn.mpc_scaling_factor(kn.share_alphas(ctx, alphas), approx)
    template = kn.template_for_owner(all_counts.size, final)
    rows = [{"block": k + 1, "rows": nk, "approx_bound": a, "bound": b, "alpha": float(alpha)} for k, ((nk, b), a) in enumerate(zip(template.blocks, approx))]
    return template, rows, ctx.ledger


def write_csv(rows: Iterable[dict], out=None) -> str:
    """Write rows (union of keys as header, in first-seen order)."""
    rows = list(rows)
    header: list[str] = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
