"""Batch evaluation over dataset directories.

A method (classical solver config or loaded network weights) is run on
every sample; the report carries per-sample PSNR of both components, the
joint PSNR, the constraint residual on observed pixels and wall time, plus
aggregate means and standard deviations.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import admm, lprnet
from .image import Image, Mask, psnr, psnr_joint
from .synthgen import load_dataset


class ClassicalMethod:
    """Run the iterative solver with a fixed configuration."""

    def __init__(self, cfg: admm.AdmmConfig):
        self.cfg = cfg

    def describe(self) -> str:
        c = self.cfg
        return (f"classical(mu={c.mu}, a={c.a}, rho_t={c.rho_t}, rho_s={c.rho_s}, "
                f"tau={c.tau}, K={c.outer_iters}, n={c.pgd_iters}, "
                f"p={c.patch.p}, o={c.patch.o})")

    def run(self, f: Image, mask: Mask):
        u, v, _ = admm.solve(f, mask, self.cfg)
        return u, v


class UnrolledMethod:
    """Run the unrolled network forward pass with loaded weights."""

    def __init__(self, weights: lprnet.NetWeights, weight_path=None):
        self.weights = weights
        self.weight_hash = None
        if weight_path is not None:
            with open(weight_path, "rb") as fh:
                self.weight_hash = hashlib.sha256(fh.read()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path):
        return cls(lprnet.load_weights(path), weight_path=path)

    def describe(self) -> str:
        cfg = self.weights.net_config
        tag = self.weight_hash or "in-memory"
        return f"unrolled(config={cfg.config_id}, K={cfg.K}, n={cfg.n}, weights={tag})"

    def run(self, f: Image, mask: Mask):
        u, v, _ = lprnet.forward(f, mask, self.weights)
        return u, v


@dataclass(frozen=True)
class EvalRow:
    index: int
    psnr_u: float
    psnr_v: float
    psnr_joint: float
    res_constraint: float
    ms: float


@dataclass
class EvalReport:
    """Per-sample rows plus aggregates; means recompute exactly from rows."""

    method: str
    rows: list = field(default_factory=list)

    def _column(self, name):
        return [getattr(r, name) for r in self.rows]

    def mean(self, name):
        col = self._column(name)
        return float(np.mean(col)) if col else None

    def std(self, name):
        col = self._column(name)
        return float(np.std(col)) if col else None

    def write_csv(self, path_or_file) -> None:
        close = False
        if hasattr(path_or_file, "write"):
            fh = path_or_file
        else:
            fh = open(path_or_file, "w", newline="")
            close = True
        try:
            writer = csv.writer(fh)
            writer.writerow(["index", "psnr_u", "psnr_v", "psnr_joint",
                             "res_constraint", "ms"])
            for r in self.rows:
                writer.writerow([r.index, repr(r.psnr_u), repr(r.psnr_v),
                                 repr(r.psnr_joint), repr(r.res_constraint), repr(r.ms)])
        finally:
            if close:
                fh.close()

    def to_text(self) -> str:
        lines = [f"method: {self.method}",
                 f"samples: {len(self.rows)}"]
        if not self.rows:
            lines.append("aggregates: (empty dataset, means undefined)")
            return "\n".join(lines)
        header = f"{'idx':>5} {'psnr_u':>10} {'psnr_v':>10} {'joint':>10} {'res_c':>10} {'ms':>9}"
        lines.append(header)
        for r in self.rows:
            lines.append(f"{r.index:>5} {r.psnr_u:>10.4f} {r.psnr_v:>10.4f} "
                         f"{r.psnr_joint:>10.4f} {r.res_constraint:>10.2e} {r.ms:>9.1f}")
        lines.append("-" * len(header))
        lines.append(
            f"{'mean':>5} {self.mean('psnr_u'):>10.4f} {self.mean('psnr_v'):>10.4f} "
            f"{self.mean('psnr_joint'):>10.4f} {self.mean('res_constraint'):>10.2e} "
            f"{self.mean('ms'):>9.1f}"
        )
        lines.append(
            f"{'std':>5} {self.std('psnr_u'):>10.4f} {self.std('psnr_v'):>10.4f} "
            f"{self.std('psnr_joint'):>10.4f} {self.std('res_constraint'):>10.2e} "
            f"{self.std('ms'):>9.1f}"
        )
        return "\n".join(lines)


def evaluate(method, dataset_path) -> EvalReport:
    """Run a method over every dataset sample in index order."""
    samples, _ = load_dataset(dataset_path)
    report = EvalReport(method=method.describe())
    for i, s in enumerate(samples):
        tic = time.perf_counter()
        u, v = method.run(s.f, s.mask)
        ms = (time.perf_counter() - tic) * 1e3
        observed = s.mask.data != 0
        res_c = float(np.max(np.abs((s.f.data - (u.data + v.data)) * observed))) \
            if observed.any() else 0.0
        report.rows.append(EvalRow(
            index=i,
            psnr_u=psnr(u, s.u_gt),
            psnr_v=psnr(v, s.v_gt),
            psnr_joint=psnr_joint(u, v, s.u_gt, s.v_gt),
            res_constraint=res_c,
            ms=ms,
        ))
    return report


def sweep_mu(base_cfg: admm.AdmmConfig, dataset_path, mu_min, mu_max, steps):
    """Grid sweep over mu; returns (best report, all (mu, report) pairs)."""
    if steps < 1:
        raise ValueError("sweep needs at least one step")
    if steps == 1:
        mus = [mu_min]
    else:
        mus = list(np.geomspace(mu_min, mu_max, steps))
    results = []
    for mu in mus:
        cfg = admm.AdmmConfig(
            mu=float(mu), a=base_cfg.a, rho_t=base_cfg.rho_t, rho_s=base_cfg.rho_s,
            tau=base_cfg.tau, outer_iters=base_cfg.outer_iters,
            pgd_iters=base_cfg.pgd_iters, patch=base_cfg.patch, tol=base_cfg.tol,
        )
        results.append((float(mu), evaluate(ClassicalMethod(cfg), dataset_path)))
    best = max(results, key=lambda pair: (pair[1].mean("psnr_joint") is not None,
                                          pair[1].mean("psnr_joint") or -math.inf))
    return best[1], results
