"""Count-based generative model of the dialogue.

The model factorizes as p(o, s | s_prev, a_prev) = p(s | s_prev, a_prev) *
p(o | s): a stage-transition table conditioned on the counselor action, and a
cue-emission table conditioned on the stage.  Both are plain count arrays
turned into probabilities with symmetric Dirichlet smoothing, so a fresh
model predicts uniformly and every observed turn sharpens it.

Updates are soft by default: instead of committing to an argmax stage, each
turn deposits fractional counts weighted by the current belief, which keeps
the model honest about its own uncertainty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .probs import Categorical, LabelSpace
from .vocab import COUNSELOR_ACTIONS, CUES, STAGES

DEFAULT_KAPPA = 1.0


@dataclass(frozen=True)
class TurnEvidence:
    """One turn's worth of learning signal.

    ``q_prev`` is the belief before the counselor acted, ``action`` the
    counselor action taken, ``q_curr`` the belief after observing the reply,
    and ``cue`` the classified observation for that reply.
    """

    q_prev: Categorical
    action: str
    q_curr: Categorical
    cue: str


def _smoothed_row(counts: np.ndarray, kappa: float) -> np.ndarray:
    n = counts.shape[0]
    return (counts + kappa / n) / (counts.sum() + kappa)


class WorldModel:
    """Dirichlet-smoothed transition and observation tables."""

    def __init__(
        self,
        states: LabelSpace = STAGES,
        actions: LabelSpace = COUNSELOR_ACTIONS,
        cues: LabelSpace = CUES,
        kappa_t: float = DEFAULT_KAPPA,
        kappa_o: float = DEFAULT_KAPPA,
    ):
        if kappa_t <= 0 or kappa_o <= 0:
            raise ValueError("smoothing constants must be positive")
        self.states = states
        self.actions = actions
        self.cues = cues
        self.kappa_t = float(kappa_t)
        self.kappa_o = float(kappa_o)
        self.transition_counts = np.zeros((len(states), len(actions), len(states)))
        self.observation_counts = np.zeros((len(states), len(cues)))

    def transition_prob(self, state: str, action: str) -> Categorical:
        """p(s' | state, action) from smoothed counts; uniform when unseen."""
        row = self.transition_counts[self.states.index(state), self.actions.index(action)]
        return Categorical(self.states, _smoothed_row(row, self.kappa_t))

    def observation_prob(self, state: str) -> Categorical:
        """p(cue | state) from smoothed counts; uniform when unseen."""
        row = self.observation_counts[self.states.index(state)]
        return Categorical(self.cues, _smoothed_row(row, self.kappa_o))

    def observation_likelihood(self, cue: str) -> np.ndarray:
        """p(cue | s) for every state s — the evidence vector for inference."""
        j = self.cues.index(cue)
        return np.array(
            [self.observation_prob(s).probs[j] for s in self.states.labels]
        )

    def add_observation(self, q: Categorical, cue: str, hard: bool = False) -> None:
        """Credit the emission table only (used when no prior action exists)."""
        j = self.cues.index(cue)
        if hard:
            self.observation_counts[self.states.index(q.argmax_label()), j] += 1.0
        else:
            self.observation_counts[:, j] += q.probs

    def update(self, evidence: TurnEvidence, hard: bool = False) -> None:
        """Deposit one turn of counts into both tables.

        Soft updates spread mass across states according to the beliefs;
        hard updates commit a single count at the argmax states.
        """
        a = self.actions.index(evidence.action)
        if hard:
            i = self.states.index(evidence.q_prev.argmax_label())
            k = self.states.index(evidence.q_curr.argmax_label())
            self.transition_counts[i, a, k] += 1.0
        else:
            self.transition_counts[:, a, :] += np.outer(
                evidence.q_prev.probs, evidence.q_curr.probs
            )
        self.add_observation(evidence.q_curr, evidence.cue, hard=hard)

    def wm_loss(self, evidences: list[TurnEvidence], lam: float = 1.0) -> float:
        """Negative log likelihood of a trajectory under the current tables.

        Sums the expected observation NLL per turn plus ``lam`` times the
        expected transition NLL between consecutive turns.  With a single
        evidence item there are no consecutive pairs, so the transition term
        contributes nothing.
        """
        total = 0.0
        for ev in evidences:
            j = self.cues.index(ev.cue)
            for i, s in enumerate(self.states.labels):
                w = ev.q_curr.probs[i]
                if w > 0:
                    total -= w * np.log(self.observation_prob(s).probs[j])
        for prev, curr in zip(evidences, evidences[1:]):
            a = curr.action
            for i, s in enumerate(self.states.labels):
                wi = prev.q_curr.probs[i]
                if wi <= 0:
                    continue
                trans = self.transition_prob(s, a).probs
                for k in range(len(self.states)):
                    wk = curr.q_curr.probs[k]
                    if wk > 0:
                        total -= lam * wi * wk * np.log(trans[k])
        return float(total)

    def to_dict(self) -> dict:
        return {
            "states": list(self.states.labels),
            "actions": list(self.actions.labels),
            "cues": list(self.cues.labels),
            "kappa_t": self.kappa_t,
            "kappa_o": self.kappa_o,
            "transition_counts": self.transition_counts.tolist(),
            "observation_counts": self.observation_counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorldModel":
        model = cls(
            states=LabelSpace("states", tuple(data["states"])),
            actions=LabelSpace("actions", tuple(data["actions"])),
            cues=LabelSpace("cues", tuple(data["cues"])),
            kappa_t=data["kappa_t"],
            kappa_o=data["kappa_o"],
        )
        model.transition_counts = np.asarray(data["transition_counts"], dtype=float)
        model.observation_counts = np.asarray(data["observation_counts"], dtype=float)
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "WorldModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


class TableModel:
    """A fixed-probability stand-in for WorldModel, for tests and demos.

    Exposes the same ``transition_prob`` / ``observation_prob`` interface but
    reads from explicit probability tables, which makes it possible to build
    scenarios with exact zeros that smoothed counts can never produce.
    """

    def __init__(
        self,
        states: LabelSpace,
        actions: LabelSpace,
        cues: LabelSpace,
        transitions: dict[tuple[str, str], np.ndarray],
        observations: dict[str, np.ndarray],
    ):
        self.states = states
        self.actions = actions
        self.cues = cues
        self._transitions = {
            key: Categorical(states, np.asarray(row, dtype=float))
            for key, row in transitions.items()
        }
        self._observations = {
            s: Categorical(cues, np.asarray(row, dtype=float))
            for s, row in observations.items()
        }

    def transition_prob(self, state: str, action: str) -> Categorical:
        return self._transitions[(state, action)]

    def observation_prob(self, state: str) -> Categorical:
        return self._observations[state]

    def observation_likelihood(self, cue: str) -> np.ndarray:
        j = self.cues.index(cue)
        return np.array([self._observations[s].probs[j] for s in self.states.labels])
