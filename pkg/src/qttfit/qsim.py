"""Dense statevector simulator for two-time correlation measurements.

Provides the transverse-field Ising Hamiltonian, exact diagonalization,
first-order Trotterized (optionally ancilla-controlled) time evolution,
and the ancilla-based interference circuit whose measurement statistics
give Re/Im of <Psi(0)| e^{iHt'} O e^{-iHt} |Psi(0)> with binomial shot
noise.  Qubit 0 is the ancilla; system qubits follow.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class QsimError(ValueError):
    pass


_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=np.complex128)
_X = _PAULI["X"]

DENSE_SITE_CAP = 12


@dataclass(frozen=True)
class PauliHamiltonian:
    """Weighted Pauli-string sum over n_site qubits."""

    n_site: int
    terms: tuple  # ((coeff, "ZZ..."), ...)

    def __init__(self, n_site, terms):
        terms = tuple((float(c), str(s)) for c, s in terms)
        for _, s in terms:
            if len(s) != n_site or any(p not in "IXYZ" for p in s):
                raise QsimError(f"bad Pauli string {s!r} for {n_site} sites")
        object.__setattr__(self, "n_site", n_site)
        object.__setattr__(self, "terms", terms)

    def dense(self):
        return _dense_operator(self.n_site, self.terms)


def identity_observable(n_site):
    return PauliHamiltonian(n_site, [(1.0, "I" * n_site)])


@lru_cache(maxsize=64)
def _dense_operator(n_site, terms):
    dim = 2 ** n_site
    h = np.zeros((dim, dim), dtype=np.complex128)
    for c, s in terms:
        m = np.array([[1.0]], dtype=np.complex128)
        for p in s:
            m = np.kron(m, _PAULI[p])
        h += c * m
    return h


def pauli_string_matrix(s):
    m = np.array([[1.0]], dtype=np.complex128)
    for p in s:
        m = np.kron(m, _PAULI[p])
    return m


def build_tfim(n_site, lam) -> PauliHamiltonian:
    """Open-chain transverse-field Ising model:
    -(2 - lam) * sum ZZ on nearest neighbours - lam * sum X."""
    if n_site < 2:
        raise QsimError("need at least 2 sites")
    terms = []
    if lam != 2.0:
        for i in range(n_site - 1):
            s = "I" * i + "ZZ" + "I" * (n_site - i - 2)
            terms.append((-(2.0 - lam), s))
    if lam != 0.0:
        for i in range(n_site):
            s = "I" * i + "X" + "I" * (n_site - i - 1)
            terms.append((-lam, s))
    return PauliHamiltonian(n_site, terms)


def exact_ground_energy(h: PauliHamiltonian) -> float:
    if h.n_site > DENSE_SITE_CAP:
        raise QsimError(f"dense diagonalization capped at {DENSE_SITE_CAP} sites")
    return float(np.linalg.eigvalsh(h.dense())[0])


# -- statevector -------------------------------------------------------------

class StateVector:
    """2^{n_q} amplitudes stored as an ndarray of shape (2,)*n_q.

    Axis q is qubit q; qubit 0 is the ancilla in the interference circuit.
    Mutable while a circuit runs; gate application preserves the 2-norm.
    """

    def __init__(self, n_qubits):
        self.n_qubits = n_qubits
        self.psi = np.zeros((2,) * n_qubits, dtype=np.complex128)
        self.psi[(0,) * n_qubits] = 1.0

    def norm(self):
        return float(np.linalg.norm(self.psi))

    def apply(self, u, targets):
        self.psi = _apply_unitary(self.psi, u, tuple(targets))

    def apply_controlled(self, u, control, targets):
        """Apply u on `targets` only in the control-qubit=1 subspace."""
        psi = np.moveaxis(self.psi, control, 0)
        shifted = [t - 1 if t > control else t for t in targets]
        psi[1] = _apply_unitary(psi[1], u, tuple(shifted))
        self.psi = np.moveaxis(psi, 0, control)

    def prob_zero(self, qubit):
        psi = np.moveaxis(self.psi, qubit, 0)
        return float(np.sum(np.abs(psi[0]) ** 2))


def _apply_unitary(psi, u, targets):
    k = len(targets)
    u = np.asarray(u, dtype=np.complex128).reshape((2,) * (2 * k))
    psi = np.tensordot(u, psi, axes=[tuple(range(k, 2 * k)), targets])
    return np.moveaxis(psi, tuple(range(k)), targets)


# -- Trotterized evolution ---------------------------------------------------

@dataclass(frozen=True)
class ShotConfig:
    """shots=None means the exact (infinite-measurement) limit."""

    shots: int | None = 15000
    trotter_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise QsimError("shots must be >= 1 when finite")
        if self.trotter_steps < 1:
            raise QsimError("trotter_steps must be >= 1")


def trotter_step_sequence(h: PauliHamiltonian, t, n_steps):
    """First-order Trotterization of e^{-iHt}: n_steps repetitions of the
    two-site (ZZ-like) layer followed by the single-site layer, each gate
    being exp(-i * coeff * t/n_steps * P).  Returns [(matrix, sites), ...]
    with site numbers 0-based within the system register."""
    theta = t / n_steps
    step = []
    multi = [(c, s) for c, s in h.terms if sum(p != "I" for p in s) > 1]
    single = [(c, s) for c, s in h.terms if sum(p != "I" for p in s) == 1]
    for c, s in multi + single:
        sites = tuple(i for i, p in enumerate(s) if p != "I")
        p = pauli_string_matrix("".join(s[i] for i in sites))
        # exp(-i a P) = cos(a) I - i sin(a) P for any Pauli string P
        a = c * theta
        gate = np.cos(a) * np.eye(p.shape[0]) - 1j * np.sin(a) * p
        step.append((gate, sites))
    return step * n_steps


def _embed(gate, sites, n):
    """Lift a k-site gate to the full 2^n matrix."""
    dim = 2 ** n
    eye = np.eye(dim, dtype=np.complex128).reshape((2,) * (2 * n))
    full = _apply_unitary(eye, gate, sites)
    return full.reshape(dim, dim)


@lru_cache(maxsize=4096)
def _trotter_unitary_cached(n_site, terms, t, n_steps):
    h = PauliHamiltonian(n_site, terms)
    step = np.eye(2 ** n_site, dtype=np.complex128)
    for gate, sites in trotter_step_sequence(h, t / n_steps, 1):
        step = _embed(gate, sites, n_site) @ step
    return np.linalg.matrix_power(step, n_steps)


def trotter_unitary(h: PauliHamiltonian, t, n_steps):
    """Dense matrix of the composed first-order Trotter sequence for
    e^{-iHt}; identical to applying trotter_step_sequence gate by gate."""
    return _trotter_unitary_cached(h.n_site, h.terms, float(t), int(n_steps))


# -- interference (ancilla) measurement circuit ------------------------------

def _derived_rng(seed, t, tp, term, part):
    """Deterministic per-(t, t', term, part) Philox stream."""
    key = hashlib.blake2b(
        b"%r|%r|%s|%s" % (float(t), float(tp), term.encode(), part.encode()),
        digest_size=8).digest()
    ss = np.random.SeedSequence(
        entropy=[int(seed) & (2 ** 64 - 1), int.from_bytes(key, "little")])
    return np.random.Generator(np.random.Philox(ss))


def hadamard_test(h: PauliHamiltonian, observable_string, t, tp, part,
                  cfg: ShotConfig) -> float:
    """Ancilla-interference estimate of Re or Im of
    <Psi(0)| V'(t')^dag O V(t) |Psi(0)> with V = Trotterized e^{-iHt}.

    part "re" uses a Pauli-X ancilla measurement (B = H), part "im" a
    Pauli-Y measurement (B = H S^dag); with finite shots the ancilla
    marginal is sampled binomially from the exact probability.
    """
    if part not in ("re", "im"):
        raise QsimError("part must be 're' or 'im'")
    n = h.n_site
    if len(observable_string) != n or any(p not in "IXYZ"
                                          for p in observable_string):
        raise QsimError(f"non-unitary observable string {observable_string!r}")
    sv = StateVector(n + 1)
    sv.apply(_H, [0])
    for q in range(1, n + 1):
        sv.apply(_H, [q])                              # U_i = H^{x n}
    # controlling every Trotter gate on the ancilla equals controlling
    # their composed product; the composition is cached per (t, N_t)
    vt = trotter_unitary(h, t, cfg.trotter_steps)
    sv.apply_controlled(vt, 0, list(range(1, n + 1)))
    sv.apply(_X, [0])
    vtp = trotter_unitary(h, tp, cfg.trotter_steps)
    sv.apply_controlled(vtp, 0, list(range(1, n + 1)))
    sv.apply(_X, [0])
    for i, p in enumerate(observable_string):
        if p != "I":
            sv.apply_controlled(_PAULI[p], 0, [i + 1])
    if part == "im":
        sv.apply(_SDG, [0])
    sv.apply(_H, [0])
    p0 = min(1.0, max(0.0, sv.prob_zero(0)))
    if cfg.shots is None:
        return 2.0 * p0 - 1.0
    rng = _derived_rng(cfg.seed, t, tp, observable_string, part)
    k = rng.binomial(cfg.shots, p0)
    return 2.0 * k / cfg.shots - 1.0


def correlation(h: PauliHamiltonian, observable, t, tp,
                cfg: ShotConfig) -> complex:
    """<O-bar>(t, t') = <Psi(0)| e^{iHt'} O e^{-iHt} |Psi(0)> measured
    term-by-term: each Pauli term gets an re and an im estimate with
    cfg.shots measurements each."""
    if observable is None:
        observable = identity_observable(h.n_site)
    out = 0.0 + 0.0j
    for c, s in observable.terms:
        a = hadamard_test(h, s, t, tp, "re", cfg)
        b = hadamard_test(h, s, t, tp, "im", cfg)
        out += c * (a + 1j * b)
    return out


# -- exact (noise-free) oracles ----------------------------------------------

@lru_cache(maxsize=16)
def _eig(n_site, terms):
    h = _dense_operator(n_site, terms)
    w, u = np.linalg.eigh(h)
    return w, u


def _initial_state(n_site):
    return np.full(2 ** n_site, 2.0 ** (-n_site / 2), dtype=np.complex128)


def exact_correlation(h: PauliHamiltonian, observable, t, tp) -> complex:
    """No Trotter error, no shots: dense spectral evaluation."""
    if h.n_site > DENSE_SITE_CAP:
        raise QsimError(f"dense oracle capped at {DENSE_SITE_CAP} sites")
    if observable is None:
        observable = identity_observable(h.n_site)
    w, u = _eig(h.n_site, h.terms)
    psi0 = _initial_state(h.n_site)
    c0 = u.conj().T @ psi0
    ket = u @ (np.exp(-1j * w * t) * c0)       # e^{-iHt}|psi0>
    bra = u @ (np.exp(-1j * w * tp) * c0)      # e^{-iHt'}|psi0>
    return complex(bra.conj() @ (observable.dense() @ ket))


def exact_correlation_grid(h: PauliHamiltonian, observable, ts, tps):
    """Vectorized exact correlations: returns a (len(ts), len(tps)) array
    with entry [i, j] = <O-bar>(ts[i], tps[j])."""
    if h.n_site > DENSE_SITE_CAP:
        raise QsimError(f"dense oracle capped at {DENSE_SITE_CAP} sites")
    if observable is None:
        observable = identity_observable(h.n_site)
    w, u = _eig(h.n_site, h.terms)
    psi0 = _initial_state(h.n_site)
    c0 = u.conj().T @ psi0
    kets = u @ (np.exp(-1j * np.outer(w, np.asarray(ts))) * c0[:, None])
    bras = u @ (np.exp(-1j * np.outer(w, np.asarray(tps))) * c0[:, None])
    return (bras.conj().T @ (observable.dense() @ kets)).T
