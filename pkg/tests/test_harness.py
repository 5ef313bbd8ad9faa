"""Turn loop, counselor agents, transcripts, metrics, and offline scoring."""

import json

import numpy as np
import pytest

from statecoach.backends import DATA_DIR, BackendConfig, ScriptedBackend
from statecoach.client_sim import (
    ClientProfile,
    ClientSession,
    TalkTypeTable,
    load_pop_prior,
)
from statecoach.config import RunConfig
from statecoach.errors import EmptyInputError, NoGoldLabelsError
from statecoach.harness import (
    AUX_CUE_STAGE,
    FALLBACK_ROTATION,
    ActiveCounselor,
    FixedCounselor,
    RandomCounselor,
    ScriptedCounselor,
    Transcript,
    TurnRecord,
    init_world_model,
    load_annotated_sessions,
    offline_eval,
    run_dialogue,
)
from statecoach.metrics import Metrics, dynamic_metrics
from statecoach.probs import uniform
from statecoach.vocab import COUNSELOR_ACTIONS, STAGES


def scripted():
    return ScriptedBackend(BackendConfig(kind="scripted"))


def p01_session(backend, cfg=None):
    cfg = cfg or RunConfig()
    profile = ClientProfile.from_file(DATA_DIR / "profiles" / "p01_alcohol.json")
    table = TalkTypeTable.from_file(DATA_DIR / "talk_type_table.json")
    pop = load_pop_prior(DATA_DIR / "pop_prior.json")
    return ClientSession(
        profile, table, backend, pop,
        tau=cfg.tau, theta_cov=cfg.theta_cov, theta_prep=cfg.theta_prep,
        alpha=cfg.alpha_dirichlet, seed=cfg.seed,
    )


def make_record(turn=1, sim_stage="precontemplation", readiness=0.1, matched=()):
    return TurnRecord(
        turn=turn,
        counselor_action="Open Question",
        counselor_text="What brings you in?",
        client_action="Downplay",
        client_text="It's nothing really.",
        gold_stage=None,
        sim_stage=sim_stage,
        readiness=readiness,
        belief=None,
        efe=None,
        matched_trigger_ids=list(matched),
    )


def make_transcript(final_stage, n_triggers=6, discovered=(), n_records=2,
                    initial="precontemplation"):
    records = [
        make_record(turn=i + 1, sim_stage=initial) for i in range(n_records - 1)
    ]
    records.append(
        make_record(turn=n_records, sim_stage=final_stage, matched=discovered)
    )
    return Transcript(
        profile_id="px", initial_stage=initial, n_triggers=n_triggers,
        opening="hi", records=records,
    )


# --- transcripts ---


def test_turn_record_key_order_is_stable():
    assert list(make_record().to_dict()) == [
        "turn", "counselor_action", "counselor_text", "client_action",
        "client_text", "gold_stage", "sim_stage", "readiness", "belief",
        "efe", "matched_trigger_ids",
    ]


def test_turn_record_round_trips():
    rec = make_record(matched=("beliefs-0",))
    assert TurnRecord.from_dict(rec.to_dict()) == rec


def test_transcript_jsonl_round_trip(tmp_path):
    t = make_transcript("contemplation", discovered=("beliefs-0", "plans-1"))
    path = tmp_path / "t.jsonl"
    t.write(path)
    back = Transcript.from_jsonl(path)
    assert back == t
    assert back.final_stage == "contemplation"
    assert back.discovered_ids == {"beliefs-0", "plans-1"}


def test_transcript_without_records_reports_initial_stage():
    t = Transcript(
        profile_id="px", initial_stage="contemplation", n_triggers=6, opening="hi"
    )
    assert t.final_stage == "contemplation"
    assert t.discovered_ids == set()


# --- world-model seeding ---


def test_world_model_seeds_stage_and_aligned_cues():
    wm = init_world_model(RunConfig())
    for stage in STAGES.labels:
        i = STAGES.index(stage)
        assert wm.observation_counts[i, wm.cues.index(stage)] == 1.0
    for cue, stage in AUX_CUE_STAGE.items():
        assert wm.observation_counts[STAGES.index(stage), wm.cues.index(cue)] == 1.0
    assert np.all(wm.observation_counts[:, wm.cues.index("short_ack")] == 0.0)
    assert wm.observation_counts.sum() == 6.0
    assert wm.transition_counts.sum() == 0.0


def test_seed_count_is_configurable():
    wm = init_world_model(RunConfig(obs_seed_count=2.5))
    assert wm.observation_counts.sum() == 15.0


# --- active counselor belief pipeline ---


def test_first_turn_uses_uniform_prior_without_fusion():
    agent = ActiveCounselor(scripted())
    move = agent.counselor_turn("I'm only here because my family keeps pushing me.")
    b = move.belief
    assert b.beta == 0.0
    assert np.allclose(b.p_prior.probs, uniform(STAGES).probs)
    assert np.allclose(b.q.probs, b.p_obs.probs)
    assert move.efe is not None and move.action == move.efe.chosen


def test_second_turn_fuses_with_cached_planner_prior():
    agent = ActiveCounselor(scripted())
    agent.counselor_turn("I'm only here because my family keeps pushing me.")
    cached = agent.prior_cache
    move = agent.counselor_turn("Honestly, it's not a big deal.")
    b = move.belief
    assert b.beta == agent.cfg.beta == 0.35
    assert np.allclose(b.p_prior.probs, cached.probs)
    expected = 0.65 * b.p_obs.probs + 0.35 * cached.probs
    assert np.allclose(b.q.probs, expected)


def test_disable_planner_keeps_observation_only_belief():
    agent = ActiveCounselor(scripted(), RunConfig(disable_planner=True))
    agent.counselor_turn("I'm only here because my family keeps pushing me.")
    move = agent.counselor_turn("Honestly, it's not a big deal.")
    assert move.belief.beta == 0.0
    assert np.allclose(move.belief.p_prior.probs, uniform(STAGES).probs)
    assert np.allclose(move.belief.q.probs, move.belief.p_obs.probs)


def test_efe_off_walks_the_fallback_rotation():
    agent = ActiveCounselor(scripted(), RunConfig(efe_action=False))
    actions = [
        agent.counselor_turn(f"Filler client sentence number {i}.").action
        for i in range(4)
    ]
    assert actions == ["Open Question", "Complex Reflection", "Give Information",
                       "Open Question"]
    assert tuple(actions[:3]) == FALLBACK_ROTATION


def test_counselor_accumulates_soft_counts_across_turns():
    agent = ActiveCounselor(scripted())
    agent.counselor_turn("There's nothing wrong with how I live.")
    assert agent.wm.transition_counts.sum() == 0.0  # first turn has no pair yet
    agent.counselor_turn("I guess it does affect the people around me.")
    assert agent.wm.transition_counts.sum() == pytest.approx(1.0)
    assert agent.wm.observation_counts.sum() == pytest.approx(8.0)  # 6 seeds + 2


def test_counselor_cue_and_memory_plumbing():
    agent = ActiveCounselor(scripted())
    move = agent.counselor_turn("I could cut down to two a day.")
    assert move.cue == "preparation"
    assert move.text
    # Both sides of the turn land in short-term memory.
    assert len(agent.memory.entries) == 2


# --- baseline counselors ---


def test_random_counselor_is_seed_stable():
    texts = ["hello there"] * 5
    a = [RandomCounselor(scripted(), seed=7).counselor_turn(t).action for t in texts]
    b = [RandomCounselor(scripted(), seed=7).counselor_turn(t).action for t in texts]
    runs_a = [c for c in a]
    assert runs_a == b
    agent = RandomCounselor(scripted(), seed=7)
    seq = [agent.counselor_turn(t).action for t in texts]
    assert all(x in COUNSELOR_ACTIONS for x in seq)


def test_fixed_counselor_round_robins():
    agent = FixedCounselor(scripted())
    seq = [agent.counselor_turn("x").action for x in range(5)]
    assert seq == ["Open Question", "Complex Reflection", "Give Information",
                   "Open Question", "Complex Reflection"]


def test_scripted_counselor_cycles_or_clamps():
    cycling = ScriptedCounselor([("Affirm", "a"), ("Support", "b")])
    assert [cycling.counselor_turn("x").action for _ in range(3)] == [
        "Affirm", "Support", "Affirm"
    ]
    clamped = ScriptedCounselor([("Affirm", "a"), ("Support", "b")], cycle=False)
    assert [clamped.counselor_turn("x").action for _ in range(3)] == [
        "Affirm", "Support", "Support"
    ]
    with pytest.raises(ValueError):
        ScriptedCounselor([])


# --- dialogue loop ---


def test_zero_turn_budget_yields_header_only_transcript():
    backend = scripted()
    t = run_dialogue(
        FixedCounselor(backend), p01_session(backend), RunConfig(max_turns=0)
    )
    assert t.records == []
    assert t.final_stage == "precontemplation"
    assert t.opening
    assert t.n_triggers == 6


def test_early_stop_at_preparation():
    backend = scripted()
    client = p01_session(backend)
    profile = client.profile
    moves = [
        ("Simple Reflection", profile.beliefs[0]),
        ("Simple Reflection", profile.beliefs[1]),
        ("Give Information", profile.motivations[0]),
    ]
    t = run_dialogue(ScriptedCounselor(moves), client, RunConfig())
    assert len(t.records) == 3
    assert [r.sim_stage for r in t.records] == [
        "precontemplation", "contemplation", "preparation"
    ]


def test_early_stop_can_be_disabled():
    backend = scripted()
    client = p01_session(backend)
    profile = client.profile
    moves = [
        ("Simple Reflection", profile.beliefs[0]),
        ("Simple Reflection", profile.beliefs[1]),
        ("Give Information", profile.motivations[0]),
    ]
    t = run_dialogue(
        ScriptedCounselor(moves), client, RunConfig(early_stop=False)
    )
    assert len(t.records) == 20
    assert all(r.sim_stage == "preparation" for r in t.records[2:])


def test_crash_leaves_parseable_transcript_prefix(tmp_path):
    class Boom(Exception):
        pass

    class BoomCounselor:
        def __init__(self):
            self.turn = 0

        def counselor_turn(self, utterance):
            self.turn += 1
            if self.turn == 3:
                raise Boom()
            from statecoach.harness import CounselorMove

            return CounselorMove(action="Facilitate", text="Mm-hmm.")

    backend = scripted()
    path = tmp_path / "partial.jsonl"
    with pytest.raises(Boom):
        run_dialogue(BoomCounselor(), p01_session(backend), RunConfig(), out_path=path)
    t = Transcript.from_jsonl(path)
    assert t.profile_id == "p01-alcohol"
    assert len(t.records) == 2


def test_transcript_flush_matches_returned_object(tmp_path):
    backend = scripted()
    path = tmp_path / "full.jsonl"
    t = run_dialogue(
        FixedCounselor(backend), p01_session(backend), RunConfig(max_turns=4),
        out_path=path,
    )
    assert path.read_text(encoding="utf-8") == t.to_jsonl()


# --- offline evaluation ---


def test_offline_eval_hand_count_session():
    sessions = [s for s in load_annotated_sessions() if s["id"] == "hand-count"]
    for cfg in (RunConfig(), RunConfig(disable_planner=True)):
        got = offline_eval(sessions, cfg, scripted())
        assert got["curr_acc"] == pytest.approx(2 / 3)
        assert got["next_acc"] == pytest.approx(0.0)
        assert got["sessions_scored"] == 1
        assert got["eval_turns"] == 3


def test_offline_eval_stationary_session_is_perfect():
    sessions = [s for s in load_annotated_sessions() if s["id"] == "stationary"]
    got = offline_eval(sessions, RunConfig(), scripted())
    assert got["curr_acc"] == 1.0
    assert got["next_acc"] == 1.0
    assert got["eval_turns"] == 4


def test_offline_eval_skips_short_sessions_and_pools_the_rest():
    got = offline_eval(load_annotated_sessions(), RunConfig(), scripted())
    assert got["sessions_scored"] == 2
    assert got["eval_turns"] == 7
    assert got["curr_acc"] == pytest.approx(6 / 7)
    assert got["next_acc"] == pytest.approx(0.6)


def test_offline_eval_with_only_short_sessions_raises():
    sessions = [s for s in load_annotated_sessions() if s["id"] == "too-short"]
    with pytest.raises(EmptyInputError):
        offline_eval(sessions, RunConfig(), scripted())


def test_offline_eval_requires_gold_labels():
    sessions = [
        {
            "id": "unlabeled",
            "turns": [
                {"client_text": "hi", "gold_stage": "", "counselor_action": "Facilitate"}
            ] * 8,
        }
    ]
    with pytest.raises(NoGoldLabelsError):
        offline_eval(sessions, RunConfig(), scripted())


def test_load_annotated_sessions_default():
    ids = [s["id"] for s in load_annotated_sessions()]
    assert ids == ["hand-count", "stationary", "too-short"]


# --- metrics ---


def test_dynamic_metrics_hand_values():
    ts = [
        make_transcript("preparation", discovered=("beliefs-0", "beliefs-1",
                                                   "motivations-0"), n_records=3),
        make_transcript("contemplation", discovered=(), n_records=5),
    ]
    m = dynamic_metrics(ts)
    assert m.lift == pytest.approx(1.5)
    assert m.prep_rate == pytest.approx(0.5)
    assert m.trig_cov == pytest.approx(0.25)  # (3/6 + 0/6) / 2
    assert m.avg_turns == pytest.approx(4.0)


def test_dynamic_metrics_all_unchanged_is_zero():
    ts = [make_transcript("precontemplation") for _ in range(3)]
    m = dynamic_metrics(ts)
    assert m.lift == 0.0
    assert m.prep_rate == 0.0


def test_dynamic_metrics_handles_zero_trigger_profiles():
    t = make_transcript("precontemplation", n_triggers=0)
    assert dynamic_metrics([t]).trig_cov == 0.0


def test_dynamic_metrics_empty_batch_raises():
    with pytest.raises(EmptyInputError):
        dynamic_metrics([])


def test_metrics_as_dict_shape():
    m = Metrics(lift=1.0, prep_rate=0.5, trig_cov=0.25, avg_turns=8.0)
    d = m.as_dict()
    assert list(d) == ["lift", "prep_rate", "trig_cov", "avg_turns",
                       "curr_acc", "next_acc", "act_kl"]
    assert d["curr_acc"] is None


# --- configuration ---


def test_config_defaults():
    cfg = RunConfig()
    assert cfg.max_turns == 20
    assert cfg.beta == 0.35
    assert cfg.theta_prep == 0.5
    assert cfg.efe_action and cfg.early_stop and not cfg.disable_planner


def test_config_file_merge_and_extras(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 7, "beta": 0.5, "mystery_knob": 1}))
    cfg = RunConfig.from_file(path, seed=9)
    assert cfg.seed == 9  # explicit override beats the file
    assert cfg.beta == 0.5  # file beats the default
    assert cfg.max_turns == 20  # untouched default survives
    assert cfg.extra == {"mystery_knob": 1}


def test_dump_constants_reports_wired_defaults():
    consts = RunConfig().dump_constants()
    assert consts["tau"] == 0.45
    assert consts["theta_cov"] == 0.3
    assert consts["theta_prep_default"] == 0.5
    assert consts["talk_type_weights"] == {"change": 1.0, "neutral": 0.3,
                                           "sustain": -1.0}
    assert consts["alpha_dirichlet"] == 5.0
    assert consts["alpha_widths"] == [0.5, 0.65, 0.75, 0.85]
    assert consts["trigger_bonuses"] == {"beliefs": 0.2, "motivations": 0.4,
                                         "plans": 0.5}
    assert consts["lambda_e"] == 0.4 and consts["lambda_p"] == 0.6
    assert consts["dist_thres"] == 1.5 and consts["k_relevant"] == 1
    assert consts["consolidate_every"] == 12 and consts["context_n"] == 30
