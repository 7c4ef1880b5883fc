import json
import random

import pytest

from dialweave.backend import MockBackend
from dialweave.dialogue import AGENT, SpanAnnotation, Subdialogue, Turn, USER
from dialweave.errors import (
    GenerationError,
    InconsistencyError,
    NotFoundError,
    ParameterError,
    StaleReferenceError,
    StateError,
)
from dialweave.ontology import builtin_ontology
from dialweave.scenario import sample_scenario
from dialweave.session import (
    COMPLETED,
    DRAFTING,
    ENDING_PROPOSED,
    REVIEWING,
    STORY_PENDING,
    Session,
    generate_story,
    generate_subdialogue,
)
from dialweave.store import SessionStore

ONTOLOGY = builtin_ontology()


def new_session(session_id="s1", seed=7):
    spec = sample_scenario(ONTOLOGY, seed=seed)
    return Session.create(session_id, spec, ontology=ONTOLOGY)


def wire(session, *lines):
    rm = session.scenario.role_map
    names = {AGENT: rm.agent_name, USER: rm.user_name}
    ps = "".join(f"<p>{names[spk]}: {text}</p>" for spk, text in lines)
    return f"<div>{ps}</div>"


def drive_to_reviewing(session, *lines):
    if session.phase == STORY_PENDING:
        session.draft_story("A short story about the accident.")
    backend = MockBackend(responses=[wire(session, *lines)])
    generate_subdialogue(session, backend)


class TestLifecycle:
    def test_create_seeds_opening_exchange(self):
        s = new_session()
        assert s.phase == STORY_PENDING
        assert [t.speaker for t in s.committed] == [AGENT, USER]
        assert s.scenario.role_map.agent_name in s.committed[0].text

    def test_story_then_draft(self):
        s = new_session()
        s.draft_story("Crash at dawn.")
        assert s.phase == DRAFTING
        assert s.story == "Crash at dawn."

    def test_propose_requires_drafting(self):
        s = new_session()
        with pytest.raises(StateError):
            s.propose(Subdialogue(turns=(Turn(1, AGENT, "hi"),)))

    def test_full_cycle_to_completion(self):
        s = new_session()
        drive_to_reviewing(
            s,
            (AGENT, "Can you tell me more?"),
            (USER, "The other car ran a red light."),
        )
        assert s.phase == REVIEWING
        assert [t.index for t in s.draft] == [3, 4]
        s.commit()
        assert s.phase == DRAFTING
        backend = MockBackend(
            responses=[wire(s, (AGENT, "Thanks for calling, have a good day!"))]
        )
        generate_subdialogue(s, backend)
        s.commit()
        assert s.phase == ENDING_PROPOSED
        s.complete()
        assert s.phase == COMPLETED
        with pytest.raises(StateError):
            s.complete()

    def test_termination_by_user_does_not_end_call(self):
        s = new_session()
        drive_to_reviewing(s, (USER, "ok goodbye"))
        s.commit()
        assert s.phase == DRAFTING

    def test_reject_ending_resumes(self):
        s = new_session()
        drive_to_reviewing(s, (AGENT, "Have a good day!"))
        s.commit()
        assert s.phase == ENDING_PROPOSED
        s.reject_ending()
        assert s.phase == DRAFTING

    def test_force_complete_from_any_phase(self):
        s = new_session()
        s.complete(force=True)
        assert s.phase == COMPLETED


class TestReview:
    def make(self):
        s = new_session()
        drive_to_reviewing(
            s,
            (AGENT, "What was damaged?"),
            (USER, "The left door, maybe more."),
        )
        return s

    def test_edit_draft_turn(self):
        s = self.make()
        s.edit_turn(4, "The left door and the bumper.")
        assert s.draft[1].text == "The left door and the bumper."
        assert s.draft_provenance[1] == "human_edited"
        assert s.counters["turns_edited"] == 1

    def test_cannot_edit_committed_turn(self):
        s = self.make()
        with pytest.raises(NotFoundError):
            s.edit_turn(1, "rewritten opening")

    def test_delete_reindexes_draft(self):
        s = self.make()
        s.delete_turn(3)
        assert [t.index for t in s.draft] == [3]
        assert s.draft[0].text == "The left door, maybe more."

    def test_delete_all_returns_to_drafting(self):
        s = self.make()
        s.delete_turn(3)
        s.delete_turn(3)
        assert s.phase == DRAFTING
        with pytest.raises(StateError):
            s.commit()

    def test_regenerate_replaces_draft(self):
        s = self.make()
        backend = MockBackend(responses=[wire(s, (AGENT, "Let me rephrase that."))])
        generate_subdialogue(s, backend, instruction="ask about injuries", regenerate=True)
        assert len(s.draft) == 1
        assert s.counters["regenerations"] == 1
        assert s.events[-1].payload["instruction"] == "ask about injuries"

    def test_edit_annotated_turn_is_stale(self):
        s = self.make()
        s.annotate(SpanAnnotation(4, 4, 13, "Caller", "DamageDetails", "Damage Parts", "left"))
        with pytest.raises(StaleReferenceError):
            s.edit_turn(4, "new text")
        with pytest.raises(StaleReferenceError):
            s.delete_turn(4)
        backend = MockBackend(responses=["unused"])
        with pytest.raises(StaleReferenceError):
            generate_subdialogue(s, backend, regenerate=True)

    def test_unparseable_output_raises_generation_error(self):
        s = new_session()
        s.draft_story("story")
        backend = MockBackend(responses=["no markup at all", "<div>still broken"])
        with pytest.raises(GenerationError):
            generate_subdialogue(s, backend, parse_retries=1)
        assert backend.calls == 2
        assert s.phase == DRAFTING  # nothing staged

    def test_parse_retry_recovers(self):
        s = new_session()
        s.draft_story("story")
        ok = wire(s, (AGENT, "Hello again."))
        backend = MockBackend(responses=["garbage", ok])
        generate_subdialogue(s, backend, parse_retries=1)
        assert s.phase == REVIEWING


class TestAnnotationFlow:
    def make(self):
        s = new_session()
        drive_to_reviewing(
            s,
            (AGENT, "How many passengers?"),
            (USER, "Just one passenger with me."),
        )
        return s

    def ann(self, value="one", turn=4, start=5, end=8):
        return SpanAnnotation(turn, start, end, "Caller", "PassengerInfo",
                              "Number of Passengers", value)

    def test_accept_and_state(self):
        s = self.make()
        assert s.annotate(self.ann()) is None
        assert s.state().values_at("Caller", "PassengerInfo", "Number of Passengers") == ("one",)

    def test_same_value_reannotated_is_not_a_conflict(self):
        s = self.make()
        s.annotate(self.ann())
        assert s.annotate(self.ann(value="ONE")) is None
        assert s.state().values_at("Caller", "PassengerInfo", "Number of Passengers") == ("one",)

    def test_conflict_then_update(self):
        s = self.make()
        s.annotate(self.ann())
        prompt = s.annotate(self.ann(value="two"))
        assert prompt is not None
        assert prompt.existing_values == ("one",)
        with pytest.raises(StateError):
            s.commit()  # blocked while pending
        s.resolve_conflict(prompt.conflict_id, "update")
        assert s.state().values_at("Caller", "PassengerInfo", "Number of Passengers") == ("two",)

    def test_conflict_then_keep(self):
        s = self.make()
        s.annotate(self.ann())
        prompt = s.annotate(self.ann(value="two"))
        s.resolve_conflict(prompt.conflict_id, "keep")
        assert s.state().values_at("Caller", "PassengerInfo", "Number of Passengers") == ("one", "two")

    def test_conflict_then_concat(self):
        s = self.make()
        s.annotate(SpanAnnotation(4, 5, 8, "Caller", "AccidentDetails", "Time", "7"))
        prompt = s.annotate(SpanAnnotation(4, 9, 12, "Caller", "AccidentDetails", "Time", "AM"))
        s.resolve_conflict(prompt.conflict_id, "concat")
        assert s.state().values_at("Caller", "AccidentDetails", "Time") == ("7 AM",)

    def test_resolve_validates(self):
        s = self.make()
        s.annotate(self.ann())
        prompt = s.annotate(self.ann(value="two"))
        with pytest.raises(ParameterError):
            s.resolve_conflict(prompt.conflict_id, "merge")
        with pytest.raises(NotFoundError):
            s.resolve_conflict("c999", "keep")
        with pytest.raises(InconsistencyError):
            s.resolve_conflict(prompt.conflict_id, "update", target="three")
        s.resolve_conflict(prompt.conflict_id, "update", target="one")

    def test_annotation_must_fit_ontology(self):
        s = self.make()
        from dialweave.errors import ValidationError

        with pytest.raises(ValidationError):
            s.annotate(SpanAnnotation(4, 0, 4, "Caller", "NoDomain", "NoSlot", "x"))

    def test_annotate_allowed_after_final_commit(self):
        s = self.make()
        s.commit()
        backend = MockBackend(responses=[wire(s, (AGENT, "Good bye!"))])
        generate_subdialogue(s, backend)
        s.commit()
        assert s.phase == ENDING_PROPOSED
        assert s.annotate(self.ann()) is None

    def test_annotation_on_draft_withheld_from_document_until_commit(self):
        s = self.make()
        s.annotate(self.ann())
        assert len(s.to_document().annotations) == 0
        s.commit()
        assert len(s.to_document().annotations) == 1


class TestReplayAndStore:
    def scripted_session(self, session_id, seed):
        s = new_session(session_id, seed=seed)
        drive_to_reviewing(
            s,
            (AGENT, "How many passengers were there?"),
            (USER, "one passenger, then two got in."),
        )
        s.annotate(SpanAnnotation(4, 0, 3, "Caller", "PassengerInfo",
                                  "Number of Passengers", "one"))
        prompt = s.annotate(SpanAnnotation(4, 20, 23, "Caller", "PassengerInfo",
                                           "Number of Passengers", "two"))
        s.resolve_conflict(prompt.conflict_id, "update")
        s.edit_turn(3, "How many passengers rode along?")
        s.commit()
        backend = MockBackend(responses=[wire(s, (AGENT, "Thanks, have a good day!"))])
        generate_subdialogue(s, backend)
        s.commit()
        s.complete()
        return s

    def test_replay_equals_live(self):
        s = self.scripted_session("r1", seed=5)
        r = Session.replay(s.events, ontology=ONTOLOGY)
        assert r.state_dict() == s.state_dict()
        assert r.to_document().as_dict() == s.to_document().as_dict()

    def test_store_round_trip(self, tmp_path):
        s = self.scripted_session("r2", seed=6)
        store = SessionStore(tmp_path)
        store.save_new(s)
        loaded = store.load("r2", ontology=ONTOLOGY)
        assert loaded.state_dict() == s.state_dict()
        assert store.list_ids() == ["r2"]

    def test_snapshot_and_tail_replay_agree(self, tmp_path):
        store = SessionStore(tmp_path)
        s = new_session("r3", seed=8)
        store.save_new(s)
        persisted = s.version
        drive_to_reviewing(s, (AGENT, "More details please?"), (USER, "Sure, the road was icy."))
        for i in range(18):
            s.edit_turn(4, f"Sure, the road was icy. (rev {i})")
        s.commit()
        store.append_events(s, from_seq=persisted)
        snap = tmp_path / "r3" / "snapshot.json"
        assert snap.is_file(), "expected a snapshot after many events"
        fast = store.load("r3", ontology=ONTOLOGY)
        slow = store.load_by_replay("r3", ontology=ONTOLOGY)
        assert fast.state_dict() == slow.state_dict()

    def test_corrupt_log_is_reported(self, tmp_path):
        s = self.scripted_session("r4", seed=9)
        store = SessionStore(tmp_path)
        store.save_new(s)
        log = tmp_path / "r4" / "events.jsonl"
        log.write_text(log.read_text().replace('"kind"', '"kin d"', 1))
        from dialweave.errors import ValidationError

        with pytest.raises(ValidationError):
            store.load_by_replay("r4")

    def test_no_temp_files_left(self, tmp_path):
        s = self.scripted_session("r5", seed=10)
        store = SessionStore(tmp_path)
        store.save_new(s)
        leftovers = list(tmp_path.rglob("*.tmp"))
        assert leftovers == []


def test_random_action_sequences_replay(tmp_path):
    """Exercise arbitrary valid action interleavings; replay must agree."""
    for trial in range(10):
        rng = random.Random(trial)
        s = new_session(f"fuzz-{trial}", seed=trial)
        s.draft_story("A fuzzed story.")
        for step in range(rng.randint(3, 12)):
            if s.phase == DRAFTING:
                n = rng.randint(1, 3)
                lines = [
                    ((AGENT, USER)[i % 2], f"utterance {step}-{i} with words")
                    for i in range(n)
                ]
                generate_subdialogue(s, MockBackend(responses=[wire(s, *lines)]))
            elif s.phase == REVIEWING:
                roll = rng.random()
                if roll < 0.3 and s.draft:
                    idx = rng.choice([t.index for t in s.draft])
                    try:
                        s.edit_turn(idx, f"edited at step {step}")
                    except StaleReferenceError:
                        pass
                elif roll < 0.5:
                    user_turns = [t.index for t in s.all_turns() if t.speaker == USER]
                    if user_turns:
                        idx = rng.choice(user_turns)
                        text = s.turn_text(idx)
                        prompt = s.annotate(
                            SpanAnnotation(idx, 0, min(4, len(text)), "Caller",
                                           "AccidentDetails", "Date", f"day {step}")
                        )
                        if prompt is not None:
                            s.resolve_conflict(
                                prompt.conflict_id, rng.choice(["update", "keep"])
                            )
                else:
                    s.commit()
            elif s.phase == ENDING_PROPOSED:
                s.reject_ending()
        s.complete(force=True)
        r = Session.replay(s.events, ontology=ONTOLOGY)
        assert r.state_dict() == s.state_dict()
