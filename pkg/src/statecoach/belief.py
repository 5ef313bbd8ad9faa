"""Belief tracking over the client's hidden stage of change.

Each turn produces a BeliefState by combining two ingredients:

* an observation-side estimate ``p_obs`` derived from the classified cue,
  widened toward uniform by an amount that depends on how informative the
  utterance is (short or hedged utterances are trusted less), and
* a model-side predictive prior ``p_prior`` rolled forward through the
  transition model under the counselor action just taken.

The two are fused by a fixed-weight convex combination rather than a full
Bayesian product, which keeps the update robust when either side is badly
calibrated early in a session.  The exact Bayesian machinery (posterior and
variational free energy) is also provided, both for diagnostics and because
the planner's epistemic term relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTextError, WeightOutOfRangeError, ZeroEvidenceError
from .probs import Categorical, DimensionMismatchError, kl_divergence, mix, uniform

# Share of the fused belief taken from the predictive prior.
DEFAULT_BETA = 0.35

# Trust levels for the cue classifier, worst to best utterance quality.
ALPHA_WIDTHS = (0.50, 0.65, 0.75, 0.85)

# Hedging markers that cap how much an utterance is trusted.
HEDGE_TERMS = (
    "maybe",
    "perhaps",
    "possibly",
    "might",
    "i guess",
    "not sure",
    "kind of",
    "sort of",
)


@dataclass(frozen=True)
class BeliefState:
    """Fused belief for one turn, with the ingredients that produced it.

    ``q`` is the working belief used downstream.  ``posterior`` and
    ``free_energy`` are the exact Bayesian quantities for the same evidence,
    kept for inspection; they do not feed back into the fusion.
    """

    q: Categorical
    p_obs: Categorical
    p_prior: Categorical
    alpha: float
    beta: float
    posterior: Categorical | None = field(default=None)
    free_energy: float | None = field(default=None)

    def as_dict(self) -> dict:
        out = {
            "q": self.q.as_dict(),
            "p_obs": self.p_obs.as_dict(),
            "p_prior": self.p_prior.as_dict(),
            "alpha": self.alpha,
            "beta": self.beta,
        }
        if self.posterior is not None:
            out["posterior"] = self.posterior.as_dict()
        if self.free_energy is not None:
            out["free_energy"] = self.free_energy
        return out


def predictive_prior(belief: Categorical, model, action: str) -> Categorical:
    """Roll the belief one step through the transition model under an action.

    q(s') = sum_s q(s) * p(s' | s, action).  ``model`` is anything exposing
    ``transition_prob(state, action) -> Categorical``.
    """
    out = np.zeros(len(belief.space))
    for i, s in enumerate(belief.space.labels):
        w = belief.probs[i]
        if w > 0:
            out += w * model.transition_prob(s, action).probs
    return Categorical(belief.space, out)


def bayes_update(prior: Categorical, likelihood) -> Categorical:
    """Exact posterior q(s) proportional to prior(s) * likelihood(s).

    ``likelihood`` is a vector of non-negative evidence values aligned with
    the prior's label space (it need not normalize over states).  Raises
    ZeroEvidenceError when prior and likelihood share no support, i.e. the
    evidence has probability zero under the model.
    """
    lik = np.asarray(likelihood, dtype=float)
    if lik.shape != prior.probs.shape:
        raise DimensionMismatchError(
            f"likelihood shape {lik.shape} does not match space {prior.space.name!r}"
        )
    if np.any(lik < 0):
        raise ValueError("likelihood values must be non-negative")
    joint = prior.probs * lik
    evidence = joint.sum()
    if evidence <= 0:
        raise ZeroEvidenceError(
            "prior and likelihood have disjoint support; posterior undefined"
        )
    return Categorical(prior.space, joint / evidence)


def free_energy(q: Categorical, prior: Categorical, likelihood) -> float:
    """Variational free energy of q given the prior and evidence vector.

    F(q) = KL(q || prior) - E_q[log likelihood].  For any q this upper-bounds
    the negative log evidence, with equality exactly at the Bayes posterior,
    so minimizing F recovers bayes_update.  Returns +inf when q places mass
    on states the evidence rules out.
    """
    lik = np.asarray(likelihood, dtype=float)
    if lik.shape != q.probs.shape:
        raise DimensionMismatchError(
            f"likelihood shape {lik.shape} does not match space {q.space.name!r}"
        )
    qp = q.probs
    if np.any((qp > 0) & (lik <= 0)):
        return float("inf")
    nz = qp > 0
    expected_log_lik = float(np.sum(qp[nz] * np.log(lik[nz])))
    return kl_divergence(q, prior) - expected_log_lik


def length_aware_alpha(utterance: str) -> float:
    """How much to trust the cue classifier for this utterance.

    Returns the retained share of p_obs: longer, unhedged utterances earn
    more trust.  Word counts use whitespace tokens; hedge detection is a
    case-insensitive substring match against a small fixed list.
    """
    if not utterance or not utterance.strip():
        raise EmptyTextError("cannot score an empty utterance")
    words = utterance.split()
    lowered = utterance.lower()
    hedged = any(term in lowered for term in HEDGE_TERMS)
    if len(words) < 6:
        return ALPHA_WIDTHS[0]
    if len(words) < 12 or hedged:
        return ALPHA_WIDTHS[1]
    if len(words) < 25:
        return ALPHA_WIDTHS[2]
    return ALPHA_WIDTHS[3]


def widen(p: Categorical, alpha: float) -> Categorical:
    """Blend a distribution toward uniform: alpha * p + (1 - alpha) * uniform.

    alpha = 1 returns p unchanged; alpha = 0 discards it entirely.
    """
    if not (0.0 <= alpha <= 1.0):
        raise WeightOutOfRangeError(f"alpha must be in [0, 1], got {alpha}")
    return mix(uniform(p.space), p, alpha)


def widen_observation(p_obs: Categorical, utterance: str) -> tuple[Categorical, float]:
    """Widen the raw observation estimate according to utterance quality."""
    alpha = length_aware_alpha(utterance)
    return widen(p_obs, alpha), alpha


def fuse(p_obs: Categorical, p_prior: Categorical, beta: float = DEFAULT_BETA) -> Categorical:
    """Fixed-weight fusion of observation and prior: (1 - beta) * p_obs + beta * p_prior."""
    if not (0.0 <= beta <= 1.0):
        raise WeightOutOfRangeError(f"beta must be in [0, 1], got {beta}")
    return mix(p_obs, p_prior, beta)
