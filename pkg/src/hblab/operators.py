"""Hermitian operators, their spectral data, and search instances.

Everything is dense numpy. Operators built here can carry an exact
low-rank factorization, which lets `spectral_decompose` skip the O(N^3)
eigensolve for rank-one initial Hamiltonians and diagonal oracles.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-9
ORTHONORMAL_TOL = 1e-10
RANK_TOL = 1e-12


class NormalizationWarning(UserWarning):
    """Raised (as a warning) when an operator is rescaled to unit norm."""


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense Hermitian N x N matrix.

    Parameters
    ----------
    matrix : (N, N) array
        Real or complex entries; must equal its conjugate transpose to
        `HERMITIAN_TOL` elementwise.
    lowrank : tuple (values, vectors), optional
        Exact factorization ``matrix == vectors @ diag(values) @ vectors^H``
        with orthonormal columns. Used as a fast path by
        `spectral_decompose`.
    """

    matrix: np.ndarray
    lowrank: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("matrix is not Hermitian")
        if not np.iscomplexobj(m):
            m = m.astype(float)
        object.__setattr__(self, "matrix", _readonly(m))
        if self.lowrank is not None:
            vals, vecs = self.lowrank
            vals = _readonly(np.asarray(vals, dtype=float))
            vecs = _readonly(np.asarray(vecs))
            object.__setattr__(self, "lowrank", (vals, vecs))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        """Operator (spectral) norm."""
        if self.lowrank is not None:
            vals = self.lowrank[0]
            return float(np.max(np.abs(vals), initial=0.0))
        if _is_diagonal(self.matrix):
            return float(np.max(np.abs(np.diag(self.matrix))))
        return float(np.linalg.norm(self.matrix, 2))

    def scaled(self, factor: float) -> "HermitianOperator":
        lr = None
        if self.lowrank is not None:
            lr = (self.lowrank[0] * factor, self.lowrank[1])
        return HermitianOperator(self.matrix * factor, lr)

    def __matmul__(self, other):
        return self.matrix @ other


def _is_diagonal(m) -> bool:
    n = m.shape[0]
    off = m.reshape(-1)[:-1].reshape(n - 1, n + 1)[:, 1:] if n > 1 else np.zeros(0)
    return not np.any(off)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Distinct eigenvalues of a Hermitian operator with their eigenspaces.

    ``blocks[i]`` holds an orthonormal basis (N x k_i) of the eigenspace of
    ``eigenvalues[i]``. A block may be ``None`` for the zero eigenvalue of a
    low-rank operator; it then stands for the orthogonal complement of all
    other blocks and is never materialized unless a projector is requested.
    """

    eigenvalues: np.ndarray
    blocks: tuple
    dim: int
    multiplicities: tuple

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_basis(self) -> np.ndarray:
        return self.basis(0)

    @property
    def ground_projector(self) -> np.ndarray:
        return self.projector(0)

    @property
    def gap(self) -> float:
        """Distance from the lowest distinct eigenvalue to the next one."""
        if len(self.eigenvalues) < 2:
            return float("inf")
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def range_indices(self) -> list:
        return [i for i, e in enumerate(self.eigenvalues) if abs(e) > DEGENERACY_TOL]

    @property
    def range_basis(self) -> np.ndarray:
        """Orthonormal basis of the operator's range, grouped by eigenvalue."""
        idx = self.range_indices
        if not idx:
            return np.zeros((self.dim, 0))
        return np.hstack([self.basis(i) for i in idx])

    @property
    def range_labels(self) -> np.ndarray:
        """Eigenvalue carried by each column of `range_basis`."""
        return np.concatenate(
            [np.full(self.multiplicities[i], self.eigenvalues[i]) for i in self.range_indices]
            or [np.zeros(0)]
        )

    @property
    def range_projector(self) -> np.ndarray:
        u = self.range_basis
        return u @ u.conj().T

    @property
    def rank(self) -> int:
        return int(sum(self.multiplicities[i] for i in self.range_indices))

    @property
    def projectors(self) -> list:
        return [self.projector(i) for i in range(len(self.eigenvalues))]

    def basis(self, i: int) -> np.ndarray:
        b = self.blocks[i]
        if b is not None:
            return b
        # implicit complement: orthonormal basis of span(others)^perp
        others = np.hstack([blk for j, blk in enumerate(self.blocks) if j != i])
        q, _ = np.linalg.qr(others, mode="complete")
        return q[:, others.shape[1]:]

    def projector(self, i: int) -> np.ndarray:
        b = self.blocks[i]
        if b is not None:
            return b @ b.conj().T
        p = np.eye(self.dim, dtype=self._dtype)
        for j, blk in enumerate(self.blocks):
            if j != i:
                p = p - blk @ blk.conj().T
        return p

    def weights(self, v) -> np.ndarray:
        """Spectral weights ||P_i v||^2 for every distinct eigenvalue."""
        v = np.asarray(v)
        w = np.empty(len(self.eigenvalues))
        implicit = None
        for i, blk in enumerate(self.blocks):
            if blk is None:
                implicit = i
                continue
            w[i] = np.linalg.norm(blk.conj().T @ v) ** 2
        if implicit is not None:
            w[implicit] = max(np.vdot(v, v).real - (w.sum() - w[implicit]), 0.0)
        return w

    def reassemble(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=self._dtype)
        for i, e in enumerate(self.eigenvalues):
            if e != 0.0:
                out = out + e * self.projector(i)
        return out

    @property
    def _dtype(self):
        for b in self.blocks:
            if b is not None and np.iscomplexobj(b):
                return complex
        return float


def _cluster(values, tol):
    """Group sorted eigenvalues whose consecutive spacing is <= tol."""
    groups = [[0]]
    for k in range(1, len(values)):
        if values[k] - values[groups[-1][-1]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def spectral_decompose(op: HermitianOperator, degeneracy_tol: float = DEGENERACY_TOL) -> SpectralData:
    """Distinct eigenvalues and orthonormal eigenspace bases of `op`."""
    if not isinstance(op, HermitianOperator):
        op = HermitianOperator(np.asarray(op))
    n = op.dim
    if op.lowrank is not None:
        vals, vecs = op.lowrank
        keep = np.abs(vals) > RANK_TOL
        vals, vecs = vals[keep], vecs[:, keep]
        return _from_lowrank(vals, vecs, n, degeneracy_tol)
    if _is_diagonal(op.matrix):
        d = np.diag(op.matrix).real
        nz = np.flatnonzero(np.abs(d) > RANK_TOL)
        if len(nz) < n // 2:
            vecs = np.zeros((n, len(nz)))
            vecs[nz, np.arange(len(nz))] = 1.0
            return _from_lowrank(d[nz], vecs, n, degeneracy_tol)
    w, v = np.linalg.eigh(op.matrix)
    groups = _cluster(w, degeneracy_tol)
    eigs = np.array([w[g].mean() for g in groups])
    eigs[np.abs(eigs) <= degeneracy_tol] = 0.0
    blocks = tuple(_readonly(v[:, g]) for g in groups)
    return SpectralData(_readonly(eigs), blocks, n, tuple(len(g) for g in groups))


def _from_lowrank(vals, vecs, n, tol):
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    groups = _cluster(vals, tol) if len(vals) else []
    eigs = [vals[g].mean() for g in groups]
    blocks = [_readonly(vecs[:, g]) for g in groups]
    mults = [len(g) for g in groups]
    kernel = n - len(vals)
    if kernel > 0:
        pos = int(np.searchsorted(eigs, 0.0))
        eigs.insert(pos, 0.0)
        blocks.insert(pos, None)
        mults.insert(pos, kernel)
    return SpectralData(_readonly(np.array(eigs, dtype=float)), tuple(blocks), n, tuple(mults))


# ---------------------------------------------------------------- builders


def build_grover_final(dim: int, marked) -> HermitianOperator:
    """Oracle Hamiltonian ``-sum_{x in marked} |x><x|``."""
    marked = sorted(set(int(x) for x in marked))
    if not marked:
        raise ValueError("marked set is empty")
    if marked[0] < 0 or marked[-1] >= dim:
        raise ValueError(f"marked index out of range [0, {dim})")
    if len(marked) >= dim:
        raise ValueError("m must be < N")
    d = np.zeros(dim)
    d[marked] = -1.0
    vecs = np.zeros((dim, len(marked)))
    vecs[marked, np.arange(len(marked))] = 1.0
    return HermitianOperator(np.diag(d), (-np.ones(len(marked)), vecs))


def build_uniform_initial(dim: int):
    """Rank-one ``H_I = -|psi><psi|`` for the uniform superposition.

    Returns
    -------
    (HermitianOperator, ndarray)
    """
    if dim < 2:
        raise ValueError("N must be >= 2")
    psi = np.full(dim, 1.0 / np.sqrt(dim))
    return build_rank_one_initial(psi), _readonly(psi)


def build_rank_one_initial(psi) -> HermitianOperator:
    """``-|psi><psi|`` for an arbitrary unit vector."""
    psi = np.asarray(psi)
    nrm = np.linalg.norm(psi)
    if psi.ndim != 1 or nrm == 0:
        raise ValueError("psi must be a nonzero vector")
    psi = psi / nrm
    return HermitianOperator(-np.outer(psi, psi.conj()), (np.array([-1.0]), psi[:, None]))


def build_general_lowrank_final(dim: int, eigenpairs) -> HermitianOperator:
    """``sum_k lambda_k |v_k><v_k|`` from (eigenvalue, vector) pairs."""
    if not eigenpairs:
        raise ValueError("no eigenpairs given")
    vals = np.array([float(lam) for lam, _ in eigenpairs])
    vecs = np.column_stack([np.asarray(v).reshape(-1) for _, v in eigenpairs])
    if vecs.shape[0] != dim:
        raise ValueError(f"eigenvectors must have length {dim}")
    gram = vecs.conj().T @ vecs
    if np.max(np.abs(gram - np.eye(len(vals)))) > ORTHONORMAL_TOL:
        raise ValueError("eigenvectors are not orthonormal")
    if not np.any(np.abs(vals) > RANK_TOL):
        raise ValueError("all-zero spectrum")
    if vals.min() >= 0:
        raise ValueError("smallest eigenvalue must be negative")
    scale = np.max(np.abs(vals))
    if abs(scale - 1.0) > 1e-12:
        vals = vals / scale
    keep = np.abs(vals) > RANK_TOL
    vals, vecs = vals[keep], vecs[:, keep]
    mat = (vecs * vals) @ vecs.conj().T
    mat = (mat + mat.conj().T) / 2
    return HermitianOperator(mat, (vals, vecs))


def random_orthonormal(dim: int, k: int, rng, complex_=False) -> np.ndarray:
    """k Haar-random orthonormal columns."""
    z = rng.normal(size=(dim, k))
    if complex_:
        z = z + 1j * rng.normal(size=(dim, k))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim: int, rng, complex_=True) -> HermitianOperator:
    """Random Hermitian matrix with unit operator norm."""
    z = rng.normal(size=(dim, dim))
    if complex_:
        z = z + 1j * rng.normal(size=(dim, dim))
    h = (z + z.conj().T) / 2
    h = h / np.linalg.norm(h, 2)
    return HermitianOperator((h + h.conj().T) / 2)


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class Overlaps:
    """Overlap parameters between the initial state and final projections."""

    delta1: float  # ||H_F psi_I||
    delta2: float  # ||P_F psi_I||
    delta3: float  # ||Q_F psi_I||
    delta4: float  # ||P_I Q_F||
    delta: float  # ||Q_I Q_F||


@dataclass(frozen=True, eq=False)
class SearchInstance:
    h_initial: HermitianOperator
    h_final: HermitianOperator
    psi_initial: np.ndarray
    spectral_initial: SpectralData
    spectral_final: SpectralData
    overlaps: Overlaps
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.h_initial.dim

    @property
    def rank_final(self) -> int:
        return self.spectral_final.rank

    @property
    def m1(self) -> int:
        """Multiplicity of the final ground energy."""
        return self.spectral_final.multiplicities[0]

    @property
    def E_I(self) -> float:
        return self.spectral_initial.ground_energy

    @property
    def E_F(self) -> float:
        return self.spectral_final.ground_energy

    @property
    def g_I(self) -> float:
        return self.spectral_initial.gap

    @property
    def g_F(self) -> float:
        return self.spectral_final.gap

    @property
    def rank_initial(self) -> int:
        return self.spectral_initial.rank

    def success_amplitude(self, psi) -> float:
        """||P_F psi||."""
        return float(np.linalg.norm(self.spectral_final.ground_basis.conj().T @ psi))

    def range_overlap(self, psi) -> float:
        """||Q_F psi||."""
        return float(np.linalg.norm(self.spectral_final.range_basis.conj().T @ psi))


def _opnorm(a) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def assemble_instance(h_initial: HermitianOperator, h_final: HermitianOperator,
                      psi_initial=None, degeneracy_tol: float = DEGENERACY_TOL,
                      meta: dict | None = None) -> SearchInstance:
    """Bundle H_I, H_F with their spectral data and overlap parameters.

    Operators whose norm differs from 1 are rescaled with a
    `NormalizationWarning`. ``E_F >= 0`` is rejected: negate both operators
    before calling.
    """
    ops = []
    for name, op in (("H_I", h_initial), ("H_F", h_final)):
        if not isinstance(op, HermitianOperator):
            op = HermitianOperator(np.asarray(op))
        nrm = op.norm()
        if nrm == 0:
            raise ValueError(f"{name} is the zero operator")
        if abs(nrm - 1.0) > 1e-10:
            warnings.warn(f"{name} rescaled from norm {nrm:.6g} to 1", NormalizationWarning, stacklevel=2)
            op = op.scaled(1.0 / nrm)
        ops.append(op)
    h_i, h_f = ops
    if h_i.dim != h_f.dim:
        raise ValueError("H_I and H_F dimensions differ")
    si = spectral_decompose(h_i, degeneracy_tol)
    sf = spectral_decompose(h_f, degeneracy_tol)
    if sf.ground_energy >= 0:
        raise ValueError("E_F must be negative; interpolate -H_I and -H_F instead")
    if sf.rank >= h_f.dim:
        raise ValueError("H_F must be low rank (m < N)")

    ground = si.ground_basis
    if psi_initial is None:
        psi = ground[:, 0].astype(complex)
    else:
        psi = np.asarray(psi_initial, dtype=complex)
        psi = psi / np.linalg.norm(psi)
    resid = h_i.matrix @ psi - si.ground_energy * psi
    if np.linalg.norm(resid) > 1e-10:
        raise ValueError("psi_initial is not a ground state of H_I")

    u_f = sf.range_basis
    p_f = sf.ground_basis
    ov = Overlaps(
        delta1=float(np.linalg.norm(h_f.matrix @ psi)),
        delta2=float(np.linalg.norm(p_f.conj().T @ psi)),
        delta3=float(np.linalg.norm(u_f.conj().T @ psi)),
        delta4=_opnorm(ground.conj().T @ u_f),
        delta=_opnorm(si.range_basis.conj().T @ u_f),
    )
    return SearchInstance(h_i, h_f, _readonly(psi), si, sf, ov, dict(meta or {}))


def interpolate(instance: SearchInstance, f_value: float) -> np.ndarray:
    """``(1 - f) H_I + f H_F`` as a dense matrix."""
    f_value = float(f_value)
    if not 0.0 <= f_value <= 1.0:
        raise ValueError("f_value must lie in [0, 1]")
    if f_value == 0.0:
        return instance.h_initial.matrix
    if f_value == 1.0:
        return instance.h_final.matrix
    return (1.0 - f_value) * instance.h_initial.matrix + f_value * instance.h_final.matrix


def grover_instance(dim: int, marked=None, m: int | None = None) -> SearchInstance:
    """Uniform-superposition GUS instance; marks ``range(m)`` by default."""
    if marked is None:
        if m is None:
            raise ValueError("give marked or m")
        marked = range(m)
    h_i, psi = build_uniform_initial(dim)
    h_f = build_grover_final(dim, marked)
    return assemble_instance(h_i, h_f, psi, meta={"kind": "grover", "dim": dim, "marked": sorted(marked)})


# ---------------------------------------------------------------- file format


def _parse_vector(v, dim):
    arr = np.asarray(v)
    if arr.ndim == 2 and arr.shape == (dim, 2):
        return arr[:, 0] + 1j * arr[:, 1]
    return arr.astype(float)


def instance_from_dict(spec: dict) -> SearchInstance:
    """Build an instance from its JSON description.

    Keys: ``dim``, ``kind`` ("grover" or "general"), ``marked`` (grover) or
    ``eigenpairs`` (general; a list of ``[value, vector]`` with vectors as
    real lists or ``[[re, im], ...]``; ``vector`` may be omitted, in which
    case Haar-random orthonormal vectors are drawn from ``seed``), optional
    ``initial`` ("uniform" default, or "random") and ``seed``.
    """
    allowed = {"dim", "kind", "marked", "eigenpairs", "seed", "initial"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown instance keys: {sorted(unknown)}")
    dim = int(spec["dim"])
    kind = spec.get("kind", "grover")
    rng = np.random.default_rng(spec.get("seed", 0))
    initial = spec.get("initial", "uniform")
    if initial == "uniform":
        h_i, psi = build_uniform_initial(dim)
    elif initial == "random":
        psi = random_orthonormal(dim, 1, rng, complex_=True)[:, 0]
        h_i = build_rank_one_initial(psi)
    else:
        raise ValueError(f"unknown initial kind {initial!r}")
    if kind == "grover":
        h_f = build_grover_final(dim, spec["marked"])
    elif kind == "general":
        pairs = spec["eigenpairs"]
        missing = [i for i, p in enumerate(pairs) if len(p) < 2 or p[1] is None]
        rand = random_orthonormal(dim, len(pairs), rng) if missing else None
        eig = []
        for i, p in enumerate(pairs):
            vec = rand[:, i] if i in missing else _parse_vector(p[1], dim)
            eig.append((float(p[0]), vec))
        h_f = build_general_lowrank_final(dim, eig)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    inst = assemble_instance(h_i, h_f, psi)
    return SearchInstance(inst.h_initial, inst.h_final, inst.psi_initial, inst.spectral_initial,
                          inst.spectral_final, inst.overlaps, dict(spec))


def load_instance(path) -> SearchInstance:
    with open(Path(path)) as fh:
        return instance_from_dict(json.load(fh))
