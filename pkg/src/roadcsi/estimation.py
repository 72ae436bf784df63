"""Least-squares and MMSE channel estimation from known pilots.

Per pilot subcarrier the received block is ``Y = H P + noise`` with ``Y`` of
shape (n_rx, N), ``H`` (n_rx, n_tx) and ``P`` (n_tx, N). Vectorisation is
column-major, so ``vec(H P) = (P^T kron I_nrx) vec(H)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import PilotObservation, SceneConfig
from .errors import PriorError, ShapeError, SingularSystemError

_RANK_RTOL = 1e-12


class Estimator(str, enum.Enum):
    LS = "LS"
    MMSE = "MMSE"


@dataclass(frozen=True, eq=False)
class CsiVector:
    gains: np.ndarray
    estimator: Estimator
    scene_label: SceneConfig | None = None
    capture_id: int = 0


def vec(m: np.ndarray) -> np.ndarray:
    """Column-major vectorisation over the last two axes."""
    return np.swapaxes(m, -1, -2).reshape(*m.shape[:-2], -1)


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.swapaxes(v.reshape(*v.shape[:-1], cols, rows), -1, -2)


def pilot_operator(p: np.ndarray, n_rx: int) -> np.ndarray:
    """A = P^T kron I_{n_rx}, batched over leading axes of ``p``."""
    eye = np.eye(n_rx)
    pt = np.swapaxes(p, -1, -2)
    a = pt[..., :, None, :, None] * eye[:, None, :]
    n_sym, n_tx = pt.shape[-2:]
    return a.reshape(*pt.shape[:-2], n_sym * n_rx, n_tx * n_rx)


def ls_solve(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """H = Y P^H (P P^H)^-1 for stacks ``y`` (K, n_rx, N) and ``p`` (K, n_tx, N)."""
    y = np.asarray(y)
    p = np.asarray(p)
    if y.ndim != 3 or p.ndim != 3 or y.shape[0] != p.shape[0] or y.shape[2] != p.shape[2]:
        raise ShapeError(f"incompatible received {y.shape} and pilot {p.shape} stacks")
    ph = np.conj(np.swapaxes(p, -1, -2))
    gram = p @ ph
    sv = np.linalg.svd(gram, compute_uv=False)
    bad = np.flatnonzero(sv[:, -1] <= _RANK_RTOL * np.maximum(sv[:, 0], np.finfo(float).tiny))
    if bad.size:
        raise SingularSystemError(int(bad[0]))
    # Solve (P P^H)^T X^T = (Y P^H)^T rather than forming the inverse.
    rhs = y @ ph
    xt = np.linalg.solve(np.swapaxes(gram, -1, -2), np.swapaxes(rhs, -1, -2))
    return np.swapaxes(xt, -1, -2)


@dataclass(frozen=True, eq=False)
class MmsePrior:
    """Channel covariance ``R`` over vec(H) and noise covariance ``S`` over vec(Y).

    Either both are per-subcarrier blocks (applied identically to every pilot
    subcarrier) or both span the whole stacked vector, subcarrier-major.
    """

    R: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        for name in ("R", "S"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise PriorError(f"{name} must be a square matrix, got shape {m.shape}")
            if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
                raise PriorError(f"{name} is not Hermitian")
            herm = (m + m.conj().T) / 2
            if np.linalg.eigvalsh(herm)[0] <= 0:
                raise PriorError(f"{name} is not positive definite")
            object.__setattr__(self, name, herm)

    @classmethod
    def isotropic(cls, channel_var: float, noise_var: float, n_tx: int = 1, n_rx: int = 1, n_symbols: int = 1) -> "MmsePrior":
        return cls(R=channel_var * np.eye(n_tx * n_rx), S=noise_var * np.eye(n_rx * n_symbols))


def mmse_solve(y: np.ndarray, p: np.ndarray, prior: MmsePrior) -> np.ndarray:
    """vec(H) = (R^-1 + A^H S^-1 A)^-1 A^H S^-1 vec(Y) with A = P^T kron I.

    ``y`` is (K, n_rx, N), ``p`` is (K, n_tx, N); returns (K, n_rx, n_tx).
    """
    y = np.asarray(y)
    p = np.asarray(p)
    if y.ndim != 3 or p.ndim != 3 or y.shape[0] != p.shape[0] or y.shape[2] != p.shape[2]:
        raise ShapeError(f"incompatible received {y.shape} and pilot {p.shape} stacks")
    k, n_rx, n_sym = y.shape
    n_tx = p.shape[1]
    dh, dy = n_rx * n_tx, n_rx * n_sym
    a = pilot_operator(p, n_rx)
    vy = vec(y)

    if prior.R.shape == (dh, dh) and prior.S.shape == (dy, dy):
        r_inv = np.linalg.inv(prior.R)
        s_inv = np.linalg.inv(prior.S)
        ah_sinv = np.conj(np.swapaxes(a, -1, -2)) @ s_inv
        lhs = r_inv + ah_sinv @ a
        vh = np.linalg.solve(lhs, (ah_sinv @ vy[..., None]))[..., 0]
        return unvec(vh, n_rx, n_tx)

    if prior.R.shape == (k * dh, k * dh) and prior.S.shape == (k * dy, k * dy):
        big_a = np.zeros((k * dy, k * dh), dtype=complex)
        for i in range(k):
            big_a[i * dy:(i + 1) * dy, i * dh:(i + 1) * dh] = a[i]
        r_inv = np.linalg.inv(prior.R)
        s_inv = np.linalg.inv(prior.S)
        ah_sinv = big_a.conj().T @ s_inv
        vh = np.linalg.solve(r_inv + ah_sinv @ big_a, ah_sinv @ vy.reshape(-1))
        return unvec(vh.reshape(k, dh), n_rx, n_tx)

    raise ShapeError(
        f"prior shapes R{prior.R.shape}, S{prior.S.shape} match neither the per-subcarrier "
        f"block ({dh}, {dy}) nor the stacked system ({k * dh}, {k * dy})"
    )


def _to_csi(h: np.ndarray, obs: PilotObservation, estimator: Estimator) -> CsiVector:
    gains = vec(h).reshape(-1)
    gains.setflags(write=False)
    return CsiVector(gains=gains, estimator=estimator, scene_label=obs.scene, capture_id=obs.capture_id)


def estimate_ls(obs: PilotObservation) -> CsiVector:
    return _to_csi(ls_solve(obs.received, obs.grid.symbols), obs, Estimator.LS)


def estimate_mmse(obs: PilotObservation, prior: MmsePrior) -> CsiVector:
    return _to_csi(mmse_solve(obs.received, obs.grid.symbols, prior), obs, Estimator.MMSE)


def empirical_channel_power(observations: list[PilotObservation]) -> float:
    """Average per-entry channel power implied by the data: E|H_LS|^2 minus LS noise."""
    total = 0.0
    for obs in observations:
        h = ls_solve(obs.received, obs.grid.symbols)
        n_tx, n_sym = obs.grid.n_tx, obs.grid.n_symbols
        total += float(np.mean(np.abs(h) ** 2)) - obs.noise_sigma**2 * n_tx / n_sym
    return max(total / len(observations), 1e-12)


def matched_noise_prior(obs: PilotObservation, channel_power: float) -> MmsePrior:
    noise_var = max(obs.noise_sigma**2, 1e-12 * channel_power)
    return MmsePrior.isotropic(channel_power, noise_var, obs.grid.n_tx, obs.n_rx, obs.grid.n_symbols)


def estimate_dataset(
    observations: list[PilotObservation],
    estimator: Estimator | str = Estimator.MMSE,
    prior: MmsePrior | None = None,
) -> list[CsiVector]:
    """Estimate every observation, preserving order and labels.

    With MMSE and no explicit prior, ``R`` is isotropic at the dataset's
    empirical channel power and ``S`` uses each observation's own noise level.
    """
    estimator = Estimator(estimator)
    if not observations:
        return []
    ref = observations[0].grid
    for obs in observations[1:]:
        if obs.grid is not ref and not obs.grid.same_as(ref):
            raise ShapeError("observations were taken on different pilot grids")
        if obs.received.shape != observations[0].received.shape:
            raise ShapeError("observations have inconsistent receive dimensions")

    if estimator is Estimator.LS:
        return [estimate_ls(obs) for obs in observations]
    if prior is not None:
        return [estimate_mmse(obs, prior) for obs in observations]
    power = empirical_channel_power(observations)
    return [estimate_mmse(obs, matched_noise_prior(obs, power)) for obs in observations]
