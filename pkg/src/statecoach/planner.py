"""Expected-free-energy action selection.

For each candidate counselor action the planner rolls the current belief one
step forward, enumerates the cues that step could produce, and scores the
action on two axes:

* epistemic value — the expected entropy of the belief after seeing the cue.
  Lower means the action is expected to *reveal* more about the client's
  stage (asking a question when the stage is unclear).
* pragmatic value — the expected surprise of the cue under a preference
  distribution that favors change-oriented replies.  Lower means the action
  is expected to *produce* desirable replies.

The chosen action minimizes a weighted sum of the two.  Planning is a single
step deep: the score enumerates one future turn, not a policy tree.  The
predictive state distribution under the chosen action is also handed back so
the next turn's belief fusion can use it as its prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import bayes_update, predictive_prior
from .errors import EmptyActionSetError, InvalidWeightsError
from .probs import Categorical, LabelSpace, entropy, normalize
from .vocab import CUES

# Default split between exploration and exploitation.
DEFAULT_LAMBDA_E = 0.4
DEFAULT_LAMBDA_P = 0.6

# Desirability of each talk type a cue maps to, before renormalization.
TALK_TYPE_PREFERENCE = {"change": 0.70, "neutral": 0.25, "sustain": 0.05}

# Which talk type each default cue signals.
CUE_TALK_TYPE = {
    "precontemplation": "sustain",
    "contemplation": "neutral",
    "preparation": "change",
    "short_ack": "neutral",
    "deflection": "sustain",
    "hedging": "neutral",
    "plan_statement": "change",
}


@dataclass(frozen=True)
class PreferenceModel:
    """Preference over observed cues, stored both normalized and in log form.

    Only differences of log preferences matter to the argmin, but the
    normalized companion fixes an absolute scale for reported values.
    """

    dist: Categorical
    log_pref: np.ndarray

    @classmethod
    def from_weights(cls, space: LabelSpace, weights: dict[str, float]) -> "PreferenceModel":
        w = np.array([weights[c] for c in space.labels], dtype=float)
        if np.any(w <= 0):
            raise ValueError("preference weights must be strictly positive")
        dist = normalize(space, w)
        log_pref = np.log(dist.probs)
        log_pref.flags.writeable = False
        return cls(dist, log_pref)

    @classmethod
    def default(cls, cues: LabelSpace = CUES) -> "PreferenceModel":
        weights = {c: TALK_TYPE_PREFERENCE[CUE_TALK_TYPE[c]] for c in cues.labels}
        return cls.from_weights(cues, weights)


@dataclass(frozen=True)
class ActionScore:
    action: str
    epistemic: float
    pragmatic: float
    total: float
    q_next_prior: Categorical

    def as_dict(self) -> dict:
        return {
            "action": self.action,
            "epistemic": self.epistemic,
            "pragmatic": self.pragmatic,
            "total": self.total,
            "q_next_prior": self.q_next_prior.as_dict(),
        }


@dataclass(frozen=True)
class EfeReport:
    """All per-action scores from one planning step plus the chosen action."""

    scores: tuple[ActionScore, ...]
    chosen: str

    def score_for(self, action: str) -> ActionScore:
        for s in self.scores:
            if s.action == action:
                return s
        raise KeyError(action)

    def as_dict(self) -> dict:
        return {"chosen": self.chosen, "scores": [s.as_dict() for s in self.scores]}


def predict_obs_dist(belief: Categorical, model, action: str) -> Categorical:
    """Distribution over next-turn cues under an action: sum_s' q(s'|a) p(o|s')."""
    q_next = predictive_prior(belief, model, action)
    out = np.zeros(len(model.cues))
    for i, s in enumerate(q_next.space.labels):
        w = q_next.probs[i]
        if w > 0:
            out += w * model.observation_prob(s).probs
    return Categorical(model.cues, out)


def _observation_column(model, cue_index: int, states: LabelSpace) -> np.ndarray:
    return np.array(
        [model.observation_prob(s).probs[cue_index] for s in states.labels]
    )


def epistemic_value(belief: Categorical, model, action: str) -> float:
    """Expected posterior entropy over the next state after observing a cue.

    For each cue the action could elicit, form the Bayes posterior over next
    states and weight its entropy by the cue's predicted probability.  Cues
    with zero predicted probability contribute nothing.
    """
    q_next = predictive_prior(belief, model, action)
    obs_dist = predict_obs_dist(belief, model, action)
    value = 0.0
    for j in range(len(model.cues)):
        p_o = obs_dist.probs[j]
        if p_o <= 0:
            continue
        posterior = bayes_update(q_next, _observation_column(model, j, q_next.space))
        value += p_o * entropy(posterior)
    return float(value)


def pragmatic_value(belief: Categorical, model, action: str, pref: PreferenceModel) -> float:
    """Expected negative log preference of the cue the action elicits."""
    obs_dist = predict_obs_dist(belief, model, action)
    return float(-np.sum(obs_dist.probs * pref.log_pref))


def _check_weights(lambda_e: float, lambda_p: float) -> None:
    if lambda_e < 0 or lambda_p < 0 or (lambda_e == 0 and lambda_p == 0):
        raise InvalidWeightsError(
            f"objective weights must be non-negative and not both zero, "
            f"got lambda_e={lambda_e}, lambda_p={lambda_p}"
        )


def expected_free_energy(
    belief: Categorical,
    model,
    action: str,
    pref: PreferenceModel,
    lambda_e: float = DEFAULT_LAMBDA_E,
    lambda_p: float = DEFAULT_LAMBDA_P,
) -> float:
    """Weighted sum of epistemic and pragmatic value for one action."""
    _check_weights(lambda_e, lambda_p)
    return lambda_e * epistemic_value(belief, model, action) + lambda_p * pragmatic_value(
        belief, model, action, pref
    )


def select_action(
    belief: Categorical,
    model,
    actions: LabelSpace | Sequence[str],
    pref: PreferenceModel,
    lambda_e: float = DEFAULT_LAMBDA_E,
    lambda_p: float = DEFAULT_LAMBDA_P,
    repeat_penalty: float = 0.0,
    last_action: str | None = None,
) -> EfeReport:
    """Score every candidate action and pick the one with minimal total.

    ``repeat_penalty`` is added to the total of ``last_action`` so the
    counselor can be discouraged from repeating itself; it defaults to off.
    Ties go to the earliest action in the candidate order.
    """
    _check_weights(lambda_e, lambda_p)
    if repeat_penalty < 0:
        raise ValueError("repeat_penalty must be non-negative")
    labels = tuple(actions.labels if isinstance(actions, LabelSpace) else actions)
    if not labels:
        raise EmptyActionSetError("no candidate actions to choose from")
    scores = []
    for a in labels:
        epi = epistemic_value(belief, model, a)
        prag = pragmatic_value(belief, model, a, pref)
        total = lambda_e * epi + lambda_p * prag
        if last_action is not None and a == last_action:
            total += repeat_penalty
        scores.append(
            ActionScore(a, epi, prag, total, predictive_prior(belief, model, a))
        )
    best = min(range(len(scores)), key=lambda i: (scores[i].total, i))
    return EfeReport(tuple(scores), scores[best].action)


def planner_prior(belief: Categorical, model, chosen: str) -> Categorical:
    """Predictive state distribution under the chosen action.

    This is what the next turn fuses with its observation estimate.
    """
    return predictive_prior(belief, model, chosen)
