"""Error norms, estimated orders of convergence and report tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .elements import CRBasis, DofMap, MWXBasis, cr_local_basis
from .mesh import Mesh
from .quadrature import QuadRule, tet_points, tet_rule


class CRField:
    """Piecewise affine field with per-face averages ``coeffs`` (nf, *shape)."""

    def __init__(self, mesh: Mesh, coeffs, basis: CRBasis | None = None):
        self.mesh = mesh
        self.coeffs = np.asarray(coeffs, float)
        self.basis = basis or cr_local_basis(mesh)

    def evaluate(self, pts, bary, order):
        c = self.coeffs[self.mesh.tet_faces]  # (nt, 4, *shape)
        nq = len(bary)
        if order == 0:
            return np.einsum("qi,ti...->tq...", CRBasis.values(bary), c)
        grad = np.einsum("tid,ti...->t...d", self.basis.grads, c)
        if order == 1:
            return np.broadcast_to(grad[:, None], (grad.shape[0], nq) + grad.shape[1:])
        return np.zeros(c.shape[:1] + (nq,) + c.shape[2:] + (3,) * order)


class MWXField:
    """Piecewise quadratic field given by global MWX coefficients."""

    def __init__(self, mesh: Mesh, coeffs, dofmap: DofMap, basis: MWXBasis):
        self.mesh = mesh
        self.cell_coeffs = np.asarray(coeffs, float)[dofmap.cell_dofs]
        self.basis = basis

    def evaluate(self, pts, bary, order):
        if order == 0:
            return np.einsum("tqa,ta->tq", self.basis.values(pts), self.cell_coeffs)
        if order == 1:
            return np.einsum("tqad,ta->tqd", self.basis.grads(pts), self.cell_coeffs)
        if order == 2:
            h = np.einsum("taij,ta->tij", self.basis.hessians, self.cell_coeffs)
            return np.broadcast_to(h[:, None], (h.shape[0], len(bary), 3, 3))
        return np.zeros((len(self.cell_coeffs), len(bary)) + (3,) * order)


class ZeroField:
    def evaluate(self, pts, bary, order, shape=()):
        return np.zeros(pts.shape[:2] + shape + (3,) * order)


def _rule(degree_or_rule) -> QuadRule:
    return degree_or_rule if isinstance(degree_or_rule, QuadRule) else tet_rule(degree_or_rule)


def _broken_error(mesh: Mesh, field_h, exact, order, quad):
    rule = _rule(quad)
    pts, w = tet_points(mesh.vertices[mesh.tets], rule)
    approx = field_h.evaluate(pts, rule.barycentric, order)
    if exact is None:
        diff = approx
    else:
        ex = np.asarray(exact(pts.reshape(-1, 3)))
        diff = approx - ex.reshape(pts.shape[:2] + ex.shape[1:])
    sq = (diff ** 2).reshape(diff.shape[:2] + (-1,)).sum(axis=2)
    return float(np.sqrt(np.einsum("tq,tq->", w, sq)))


def error_l2(mesh: Mesh, field_h, exact=None, quad=6) -> float:
    """``||field_h - exact||`` (Frobenius for tensors); ``exact=None`` means 0."""
    return _broken_error(mesh, field_h, exact, 0, quad)


def error_h1_broken(mesh: Mesh, field_h, exact_grad=None, quad=6) -> float:
    """``|field_h - exact|_{1,h}`` given the exact gradient (last axis = derivative)."""
    return _broken_error(mesh, field_h, exact_grad, 1, quad)


def error_h2_broken(mesh: Mesh, field_h, exact_hess=None, quad=6) -> float:
    return _broken_error(mesh, field_h, exact_hess, 2, quad)


def jump_seminorm(r, stiffness, penalty) -> float:
    """``|||r|||_{1,h}`` from the broken stiffness and the face-jump penalty
    matrices of the same CR space (all faces, boundary included)."""
    r = np.asarray(r, float)
    val = r @ (stiffness @ r) + r @ (penalty @ r)
    return float(np.sqrt(max(val, 0.0)))


def p0_norm(mesh: Mesh, coeffs) -> float:
    """L2 norm of a ``p0-tl`` field (orthonormal basis, so no mass matrix)."""
    c = np.asarray(coeffs, float).reshape(mesh.n_tets, -1)
    return float(np.sqrt(np.einsum("t,tb,tb->", mesh.volumes, c, c)))


def cellwise_l2(mesh: Mesh, cells) -> float:
    """L2 norm of an elementwise constant field given as (nt, ...)."""
    c = np.asarray(cells, float).reshape(mesh.n_tets, -1)
    return float(np.sqrt(np.einsum("t,tb,tb->", mesh.volumes, c, c)))


def eoc(errors, hs=None):
    """Estimated orders of convergence between consecutive levels.

    ``hs`` defaults to halving; the first entry is ``nan``.  A zero error
    makes the adjacent rates ``nan`` (the error is exact there).
    """
    errors = np.asarray(errors, float)
    hs = 2.0 ** -np.arange(len(errors)) if hs is None else np.asarray(hs, float)
    rates = [math.nan]
    for k in range(1, len(errors)):
        if errors[k] <= 0 or errors[k - 1] <= 0:
            rates.append(math.nan)
        else:
            rates.append(math.log(errors[k - 1] / errors[k]) / math.log(hs[k - 1] / hs[k]))
    return np.array(rates)


# ---------------------------------------------------------------------------
# reports

TRIHARMONIC_COLUMNS = ("err_sigma_l2", "err_sigma_h1", "err_u_h1", "err_u_h2")
STOKES_COLUMNS = ("err_sigma_l2", "err_sigma_h1", "norm_p", "jump_r")

LABELS = {
    "err_sigma_l2": "||sigma - sigma_h||",
    "err_sigma_h1": "|sigma - sigma_h|_{1,h}",
    "err_u_h1": "|u - u_h|_{1,h}",
    "err_u_h2": "|u - u_h|_{2,h}",
    "norm_p": "||p_h|| (p = 0)",
    "jump_r": "|||r_h|||_{1,h}",
    "identity_residual": "||curl_h sigma_h + dev grad_h r_h||",
}


@dataclass
class ErrorReport:
    """Per-level error records of one experiment."""

    mode: str  # "triharmonic" or "stokes"
    domain: str
    levels: list = field(default_factory=list)  # list of dicts

    def add(self, record: dict):
        self.levels.append(dict(record))

    @property
    def columns(self):
        return TRIHARMONIC_COLUMNS if self.mode == "triharmonic" else STOKES_COLUMNS

    def values(self, key):
        return np.array([rec[key] for rec in self.levels], float)

    def rates(self, key):
        return eoc(self.values(key), self.values("h"))

    def rows(self):
        """Rows in CSV column order (rates interleaved)."""
        rates = {k: self.rates(k) for k in self.columns}
        out = []
        for i, rec in enumerate(self.levels):
            row = [rec["n"], rec["h"]]
            for k in self.columns:
                row += [rec[k], rates[k][i]]
            if self.mode == "triharmonic":
                row += [rec["jump_r"], rec["identity_residual"]]
            else:
                row += [rec["identity_residual"]]
            out.append(row)
        return out

    def header(self):
        head = ["level", "h"]
        for k in self.columns:
            head += [k, "rate"]
        if self.mode == "triharmonic":
            head += ["jump_r", "identity_residual"]
        else:
            head += ["identity_residual"]
        return head

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.rows():
            writer.writerow([_fmt_csv(v) for v in row])
        return buf.getvalue()

    def to_markdown(self) -> str:
        """Aligned markdown tables, one per pair of error columns."""
        blocks = []
        pairs = [self.columns[:2], self.columns[2:]]
        for pair in pairs:
            head = ["h"] + [x for k in pair for x in (LABELS[k], "rate")]
            body = []
            rates = {k: self.rates(k) for k in pair}
            for i, rec in enumerate(self.levels):
                line = [_fmt_h(rec["h"])]
                for k in pair:
                    line += [f"{rec[k]:.6f}", "-" if math.isnan(rates[k][i]) else f"{rates[k][i]:.4f}"]
                body.append(line)
            blocks.append(_md_table(head, body))
        extra_keys = ["identity_residual"] + (["jump_r"] if self.mode == "triharmonic" else [])
        head = ["h"] + [LABELS[k] for k in extra_keys]
        body = [[_fmt_h(rec["h"])] + [f"{rec[k]:.3e}" for k in extra_keys] for rec in self.levels]
        blocks.append(_md_table(head, body))
        title = f"### {self.mode} on {self.domain}\n\n"
        return title + "\n\n".join(blocks) + "\n"


def _fmt_csv(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _fmt_h(h):
    k = -math.log2(h)
    return f"2^-{int(round(k))}" if abs(k - round(k)) < 1e-12 else f"{h:g}"


def _md_table(head, body):
    cols = list(zip(head, *body))
    widths = [max(len(str(c)) for c in col) for col in cols]
    line = lambda cells: "| " + " | ".join(str(c).rjust(w) for c, w in zip(cells, widths)) + " |"
    sep = "|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|"
    return "\n".join([line(head), sep] + [line(r) for r in body])
