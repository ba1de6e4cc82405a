"""Monophone HMM-GMM container, emission scoring and serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SIL = "SIL"
FORMAT_VERSION = 1
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class Gmm:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def copy(self) -> "Gmm":
        return Gmm(self.weights.copy(), self.means.copy(), self.variances.copy())

    def log_likelihood(self, x: np.ndarray) -> np.ndarray:
        """Per-frame log density, computed directly (used for checks, not decoding)."""
        x = np.atleast_2d(x)
        diff = x[:, None, :] - self.means[None]
        comp = -0.5 * (np.sum(diff**2 / self.variances, axis=2)
                       + np.sum(np.log(self.variances), axis=1) + x.shape[1] * LOG_2PI)
        with np.errstate(divide="ignore"):
            comp = comp + np.log(self.weights)
        return np.logaddexp.reduce(comp, axis=1)


class MonophoneHmmSet:
    """Left-to-right monophone HMMs with diagonal-covariance GMM emissions.

    Emitting state ``j`` of phone ``p`` has pdf index ``p * n_states + j``.
    ``trans[pdf] = [stay, advance]``; for the last state "advance" is the exit.
    """

    def __init__(self, phones, gmms, trans, var_floor, n_states=3, silence=SIL):
        self.phones = list(phones)
        self.n_states = int(n_states)
        self.gmms = list(gmms)
        self.trans = np.asarray(trans, dtype=float)
        self.var_floor = np.asarray(var_floor, dtype=float)
        self.silence = silence if silence in self.phones else None
        self.provenance: frozenset[str] = frozenset()
        self.is_flat = False
        self._index = {p: i for i, p in enumerate(self.phones)}
        self._packed = None
        self._loop_graph = None
        if len(self.gmms) != self.n_pdfs or self.trans.shape != (self.n_pdfs, 2):
            raise ValueError("gmms/trans do not match phones x n_states")

    @property
    def n_pdfs(self) -> int:
        return len(self.phones) * self.n_states

    @property
    def dim(self) -> int:
        return self.gmms[0].means.shape[1]

    @property
    def total_gaussians(self) -> int:
        return sum(g.n_components for g in self.gmms)

    def phone_index(self, phone: str) -> int:
        try:
            return self._index[phone]
        except KeyError:
            raise KeyError(f"phone {phone!r} not in model") from None

    def pdf(self, phone: str, state: int) -> int:
        return self.phone_index(phone) * self.n_states + state

    def copy(self) -> "MonophoneHmmSet":
        m = MonophoneHmmSet(self.phones, [g.copy() for g in self.gmms], self.trans.copy(),
                            self.var_floor.copy(), self.n_states, self.silence or "")
        m.provenance = self.provenance
        m.is_flat = self.is_flat
        return m

    def invalidate(self) -> None:
        self._packed = None
        self._loop_graph = None

    def check(self, tol: float = 1e-9) -> None:
        if np.any(np.abs(self.trans.sum(axis=1) - 1.0) > tol) or np.any(self.trans < 0):
            raise ValueError("transition rows must be stochastic")
        for g in self.gmms:
            if abs(g.weights.sum() - 1.0) > tol:
                raise ValueError("GMM weights must sum to 1")
            if np.any(g.variances < self.var_floor * (1 - 1e-12)):
                raise ValueError("variance below floor")

    def _pack(self):
        if self._packed is None:
            means = np.concatenate([g.means for g in self.gmms])
            var = np.concatenate([g.variances for g in self.gmms])
            with np.errstate(divide="ignore"):
                logw = np.concatenate([np.log(g.weights) for g in self.gmms])
            ivar = 1.0 / var
            const = logw - 0.5 * (np.sum(np.log(var), axis=1) + means.shape[1] * LOG_2PI
                                  + np.sum(means**2 * ivar, axis=1))
            starts = np.cumsum([0] + [g.n_components for g in self.gmms[:-1]])
            self._packed = (ivar.T.copy(), (means * ivar).T.copy(), const, starts)
        return self._packed

    def log_emissions(self, frames: np.ndarray) -> np.ndarray:
        """Log emission density of every pdf for every frame, shape (T, n_pdfs)."""
        x = np.asarray(frames, dtype=float)
        ivar_t, mivar_t, const, starts = self._pack()
        comp = const + x @ mivar_t - 0.5 * ((x * x) @ ivar_t)
        peak = np.maximum.reduceat(comp, starts, axis=1)
        with np.errstate(invalid="ignore"):
            shifted = np.exp(comp - np.repeat(peak, np.diff(np.append(starts, comp.shape[1])), axis=1))
        return peak + np.log(np.add.reduceat(np.nan_to_num(shifted), starts, axis=1))

    # serialization -------------------------------------------------------

    def save(self, path) -> None:
        arrays = {"trans": self.trans, "var_floor": self.var_floor}
        for i, g in enumerate(self.gmms):
            arrays[f"w{i}"], arrays[f"m{i}"], arrays[f"v{i}"] = g.weights, g.means, g.variances
        meta = {"format_version": FORMAT_VERSION, "phones": self.phones, "n_states": self.n_states,
                "silence": self.silence, "provenance": sorted(self.provenance)}
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path) -> "MonophoneHmmSet":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"unsupported model format {meta.get('format_version')}")
            n = len(meta["phones"]) * meta["n_states"]
            gmms = [Gmm(z[f"w{i}"], z[f"m{i}"], z[f"v{i}"]) for i in range(n)]
            m = cls(meta["phones"], gmms, z["trans"], z["var_floor"], meta["n_states"],
                    meta["silence"] or "")
        m.provenance = frozenset(meta["provenance"])
        return m


def single_gaussian_model(phones, means, variances, n_states=3, stay=0.5, silence=SIL):
    """Build a model with one Gaussian per state; ``means`` is (n_phones, n_states, D)."""
    means = np.asarray(means, dtype=float)
    variances = np.broadcast_to(np.asarray(variances, dtype=float), means.shape)
    gmms = [Gmm(np.ones(1), means[p, j][None].copy(), variances[p, j][None].copy())
            for p in range(len(phones)) for j in range(n_states)]
    trans = np.tile([stay, 1.0 - stay], (len(phones) * n_states, 1))
    floor = np.minimum(variances.reshape(-1, means.shape[-1]).min(axis=0), 1e-3)
    return MonophoneHmmSet(phones, gmms, trans, floor, n_states, silence)
