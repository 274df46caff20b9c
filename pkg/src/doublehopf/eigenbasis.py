"""Critical eigenvectors and the bilinear pairing between adjoint and direct
eigenfunctions of a delayed mode."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, history_of_mode, linear_part
from .errors import HypothesisFailure
from .spectrum import CharSlice


def _null_vectors(M, rel_tol=1e-7):
    U, s, Vh = np.linalg.svd(M)
    if s[-1] > rel_tol * max(s[0], 1.0):
        raise HypothesisFailure("singular", f"smallest singular value {s[-1]:.3g} is not zero")
    if len(s) > 1 and s[-2] <= rel_tol * max(s[0], 1.0):
        raise HypothesisFailure("simple", "kernel has dimension greater than one")
    return U[:, -1].conj(), Vh[-1].conj()


def _unit_first(v):
    mag = np.abs(v)
    idx = int(np.argmax(mag > 1e-10 * mag.max()))
    return v / v[idx]


def right_eigvec(sl: CharSlice, omega: float) -> np.ndarray:
    """Kernel vector of ``Delta_m(i omega)``, first non-zero entry set to 1."""
    _, right = _null_vectors(sl.matrix(1j * omega))
    return _unit_first(right)


def left_eigvec(sl: CharSlice, omega: float) -> np.ndarray:
    """Row vector ``psi`` with ``psi Delta_m(i omega) = 0`` (not yet paired)."""
    left, _ = _null_vectors(sl.matrix(1j * omega))
    return _unit_first(left)


def bilinear_pair(psi, phi, lam_psi, lam_phi, delays, delayed) -> complex:
    """Pairing of ``s -> psi exp(-lam_psi s)`` with ``t -> phi exp(lam_phi t)``.

    The local (undelayed) part of the operator drops out; each delay
    contributes through a divided difference of ``exp(-lam r)``.
    """
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    total = psi @ phi
    gap = lam_phi - lam_psi
    for g, r in zip(delayed, delays):
        if abs(gap) * max(r, 1.0) < 1e-12:
            weight = -r * np.exp(-lam_phi * r)
        else:
            weight = (np.exp(-lam_phi * r) - np.exp(-lam_psi * r)) / gap
        total = total - weight * (psi @ g @ phi)
    return complex(total)


@dataclass
class EigenData:
    """Eigenvectors for the critical roots ``+-i omega[0]`` (wave ``modes[0]``)
    and ``+-i omega[1]`` (wave ``modes[1]``), with ``(psi_k, phi_k) = 1``.

    Index ``k = 0..3`` runs over (phi1, conj phi1, phi3, conj phi3), whose
    eigenvalues are ``i * freq(k)``.
    """

    omega: tuple
    modes: tuple
    phi: np.ndarray
    psi: np.ndarray
    delays: np.ndarray
    pair_norms: tuple

    def freq(self, k: int) -> float:
        return (self.omega[0], -self.omega[0], self.omega[1], -self.omega[1])[k]

    def wave(self, k: int) -> int:
        return self.modes[k // 2]

    def phi_vec(self, k: int) -> np.ndarray:
        v = self.phi[k // 2]
        return v.conj() if k % 2 else v

    def psi_vec(self, k: int) -> np.ndarray:
        v = self.psi[k // 2]
        return v.conj() if k % 2 else v

    def phi_hist(self, k: int) -> np.ndarray:
        return history_of_mode(self.phi_vec(k), 1j * self.freq(k), self.delays)

    def to_dict(self):
        def cplx(v):
            return [[float(x.real), float(x.imag)] for x in v]
        return {"omega": list(map(float, self.omega)), "modes": list(map(int, self.modes)),
                "phi": [cplx(v) for v in self.phi], "psi": [cplx(v) for v in self.psi],
                "delays": list(map(float, self.delays))}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def build_basis(spec: ModelSpec, modes, omegas, p=None) -> EigenData:
    """Direct and adjoint eigenvectors at the critical point, paired to 1."""
    p = np.asarray(spec.param if p is None else p, dtype=float)
    lin = linear_part(spec, p)
    phis, psis, norms = [], [], []
    for m, w in zip(modes, omegas):
        sl = CharSlice(spec, m, p)
        phi = right_eigvec(sl, w)
        psi = left_eigvec(sl, w)
        norm = bilinear_pair(psi, phi, 1j * w, 1j * w, lin.delays, lin.delayed)
        if abs(norm) < 1e-12:
            raise HypothesisFailure("simple", "adjoint and direct eigenvectors are orthogonal")
        phis.append(phi)
        psis.append(psi / norm)
        norms.append(norm)
    return EigenData(tuple(float(w) for w in omegas), tuple(int(m) for m in modes),
                     np.array(phis), np.array(psis), lin.delays, tuple(norms))


def basis_for_point(rescaled: ModelSpec, point) -> EigenData:
    """Eigen data for a double Hopf point, in the time unit of ``rescaled``."""
    scale = rescaled.time_scale
    return build_basis(rescaled, point.modes, [z * scale for z in point.freqs], rescaled.param)
