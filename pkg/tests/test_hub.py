import itertools
import random

import pytest

from wallspace.corpus import CorpusEntry, CorpusManifest
from wallspace.eventlog import EventLog
from wallspace.geometry import RoomSpec
from wallspace.hub import Heartbeat, Hub
from wallspace.messages import Envelope, decode, encode
from wallspace.state import apply_changes


def make_manifest(topics=("dogs", "cats", "avocado"), per=4):
    entries = []
    for t in topics:
        for i in range(per):
            entries.append(CorpusEntry(path=f"{t}/{i}.png", tags=frozenset({t})))
    return CorpusManifest(entries=tuple(entries))


def seq_ids():
    counter = itertools.count(1)

    def factory():
        n = next(counter)
        return f"s{n}", f"resume{n}"

    return factory


def make_hub(log=None, **kwargs):
    hub = Hub(
        RoomSpec(),
        make_manifest(),
        seed=5,
        id_factory=seq_ids(),
        log=log,
        **kwargs,
    )
    hub.boot_fill_columns()
    hub.initial_snapshot()
    return hub


def env(kind, body, seq, sid, ts=0):
    return Envelope(kind=kind, seq=seq, sid=sid, ts=ts, body=body)


class Driver:
    """Minimal in-process client bundle around a hub."""

    def __init__(self, hub):
        self.hub = hub
        self.now = 0
        self.tracker_epoch = hub.connect_client("tracker", 0)
        self.seqs = {}

    def next_seq(self, key):
        self.seqs[key] = self.seqs.get(key, 0) + 1
        return self.seqs[key]

    def send_tracks(self, *entries, advance=33):
        self.now += advance
        body = {"tracks": [{"id": t, "x": x, "y": y} for t, x, y in entries]}
        return self.hub.dispatch(
            env("tracks", body, self.next_seq("tracker"), "tracker", self.now),
            role="tracker",
            epoch=self.tracker_epoch,
            now=self.now,
        )

    def send_gesture(self, session, gesture, epoch=None, **fields):
        self.now += 1
        body = {"gesture": gesture, **fields}
        return self.hub.dispatch(
            env("gesture", body, self.next_seq(session.session_id), session.session_id, self.now),
            role="pad",
            epoch=epoch if epoch is not None else session.epoch,
            now=self.now,
        )

    def send_voice(self, session, transcript):
        self.now += 1
        return self.hub.dispatch(
            env(
                "voice",
                {"transcript": transcript},
                self.next_seq("voice:" + session.session_id),
                session.session_id,
                self.now,
            ),
            role="voice",
            epoch=session.epoch,
            now=self.now,
        )


@pytest.fixture
def hub():
    return make_hub()


@pytest.fixture
def driver(hub):
    return Driver(hub)


def register_left(hub, driver):
    session, ok, _ = hub.register_pad("side=left", driver.now)
    driver.send_tracks(("t1", 1.0, 5.0))  # stands at left wall column
    return session


class TestDispatchLaws:
    def test_gesture_unknown_session(self, hub, driver):
        res = driver.send_gesture(type("S", (), {"session_id": "ghost", "epoch": 1})(), "tap")
        assert res.error_code == "unknown_session"

    def test_every_write_gets_ack_or_error(self, hub, driver):
        session = register_left(hub, driver)
        outcomes = []
        outcomes.append(driver.send_gesture(session, "tap"))
        outcomes.append(driver.send_gesture(session, "pinch"))  # no selection -> error
        outcomes.append(driver.send_tracks(("t1", 1.0, 5.0)))
        outcomes.append(driver.send_voice(session, "?!"))
        for res in outcomes:
            assert res.reply is not None
            assert res.reply.kind in ("ack", "error")

    def test_duplicate_seq_acked_not_reapplied(self, hub, driver):
        session = register_left(hub, driver)
        first = driver.send_gesture(session, "move", dy=0.5)
        v_after = hub.state.cursors[session.session_id].v
        dup = hub.dispatch(
            env("gesture", {"gesture": "move", "dy": 0.5}, driver.seqs[session.session_id],
                session.session_id, driver.now),
            role="pad",
            epoch=session.epoch,
            now=driver.now,
        )
        assert dup.reply.kind == "ack"
        assert dup.reply.body["applied"] is False
        assert hub.state.cursors[session.session_id].v == v_after
        assert dup.diff is None

    def test_inactive_session_gesture_rejected(self, hub, driver):
        session, _, _ = hub.register_pad("side=left", driver.now)
        driver.send_tracks(("t1", 6.0, 5.0))  # center of room: unbound
        res = driver.send_gesture(session, "tap")
        assert res.error_code == "inactive_session"

    def test_tracks_produce_ring_diffs(self, hub, driver):
        res = driver.send_tracks(("t9", 6.0, 1.0))
        assert res.applied
        ring_changes = [c for c in res.diff.body["changes"] if c["op"] == "ring"]
        assert ring_changes and ring_changes[0]["value"]["u"] == 1977

    def test_stale_epoch_rejected(self, hub, driver):
        session = register_left(hub, driver)
        hub.disconnect_pad(session.session_id, driver.now)
        hub.resume_pad(session.resume_token, driver.now)  # epoch 2
        res = driver.send_gesture(session, "tap", epoch=1)
        assert res.error_code == "stale_epoch"

    def test_unparseable_voice_errors_but_prompts(self, hub, driver):
        session = register_left(hub, driver)
        res = driver.send_voice(session, "???")
        assert res.error_code == "unparseable_utterance"
        assert res.diff is not None  # the on-screen error prompt
        prompts = [c for c in res.diff.body["changes"] if c["op"] == "prompt"]
        assert prompts and prompts[0]["value"]["style"] == "error"

    def test_forbidden_kind_by_role(self, hub, driver):
        res = hub.dispatch(
            env("tracks", {"tracks": []}, 1, "pad-1"), role="pad", epoch=1, now=0
        )
        assert res.error_code == "forbidden_kind"

    def test_ping_answered_with_pong(self, hub):
        res = hub.dispatch(env("ping", {}, 1, "d1", ts=77), role="display", epoch=1, now=0)
        assert res.reply.kind == "pong"
        assert res.reply.body["echo"] == 77

    def test_reordered_duplicated_delivery_applies_at_most_once_increasing(self, hub, driver):
        # any delivery schedule with duplicates and reordering within one
        # sender epoch: each seq applied at most once, in increasing order
        session = register_left(hub, driver)
        rng = random.Random(8)
        envelopes = [
            env("gesture", {"gesture": "move", "dy": 0.1}, seq=k, sid=session.session_id, ts=k)
            for k in range(1, 11)
        ]
        schedule = envelopes * 3
        rng.shuffle(schedule)
        applied_seqs = []
        for e in schedule:
            res = hub.dispatch(e, role="pad", epoch=session.epoch, now=driver.now)
            if res.applied:
                applied_seqs.append(e.seq)
        assert applied_seqs == sorted(applied_seqs)
        assert len(set(applied_seqs)) == len(applied_seqs)

    def test_voice_seq_independent_from_gesture_seq(self, hub, driver):
        session = register_left(hub, driver)
        driver.send_gesture(session, "move", dy=0.1)
        driver.send_gesture(session, "move", dy=0.1)
        res = driver.send_voice(session, "dogs")  # voice seq 1, phone seq already 2
        assert res.applied


class TestVoiceFlow:
    def test_populate_current_column(self, hub, driver):
        session = register_left(hub, driver)
        res = driver.send_voice(session, "Show me pictures of dogs")
        assert res.applied
        col_changes = [c for c in res.diff.body["changes"] if c["op"] == "column"]
        assert col_changes[0]["value"]["query"] == "dogs"


class TestDiffSoundness:
    def test_random_event_sequences(self):
        rng = random.Random(1234)
        for trial in range(40):
            hub = make_hub()
            driver = Driver(hub)
            sessions = []
            s, _, _ = hub.register_pad("side=left", 0)
            sessions.append(s)
            if rng.random() < 0.5:
                s2, _, _ = hub.register_pad("side=right", 0)
                sessions.append(s2)
            snapshot = hub.state.to_snapshot(hub.revision)
            diffs = []
            gestures = ["move", "tap", "swipe_left", "swipe_right", "swipe_up",
                        "swipe_down", "pinch", "zoom", "double_tap", "long_tap"]
            for step in range(25):
                roll = rng.random()
                if roll < 0.35:
                    entries = []
                    for i, sess in enumerate(sessions):
                        if rng.random() < 0.9:
                            side_x = rng.uniform(0.2, 1.9) if sess.side.value == "left" else rng.uniform(10.1, 11.8)
                            x = side_x if rng.random() < 0.8 else rng.uniform(0, 12)
                            entries.append((f"t{i}", x, rng.uniform(0.2, 9.8)))
                    res = driver.send_tracks(*entries)
                elif roll < 0.8:
                    sess = rng.choice(sessions)
                    g = rng.choice(gestures)
                    fields = {}
                    if g == "move":
                        fields = {"dx": rng.uniform(-1, 1), "dy": rng.uniform(-1, 1)}
                    elif g in ("pinch", "zoom"):
                        fields = {"scale": 1.25}
                    res = driver.send_gesture(sess, g, **fields)
                else:
                    sess = rng.choice(sessions)
                    res = driver.send_voice(
                        sess, rng.choice(["dogs", "cats", "show me pictures of avocado", "??"])
                    )
                if res.diff is not None:
                    diffs.append(res.diff.body)
            # snapshot(k-1) + diffs(k..n) == snapshot(n)
            rebuilt = snapshot
            for diff in diffs:
                rebuilt = apply_changes(rebuilt, diff["changes"])
                rebuilt["revision"] = diff["revision"]
            assert rebuilt == hub.state.to_snapshot(hub.revision)

    def test_snapshot_envelope_round_trips(self, hub, driver):
        register_left(hub, driver)
        snap_env = hub.snapshot_envelope(driver.now)
        assert decode(encode(snap_env)) == snap_env

    def test_reconnecting_display_converges(self, hub, driver):
        # Observer A watches from boot; observer B joins mid-stream from a
        # snapshot and applies only later diffs. They must agree.
        session = register_left(hub, driver)
        a_state = hub.state.to_snapshot(hub.revision)
        late_diffs = []
        b_state = None

        def act(i):
            if i % 3 == 0:
                return driver.send_tracks(("t1", 0.5 + (i % 5) * 0.2, 2.0 + i * 0.1))
            if i % 3 == 1:
                return driver.send_gesture(session, "move", dy=0.2)
            return driver.send_gesture(session, "tap")

        for i in range(30):
            res = act(i)
            if res.diff is not None:
                if b_state is None and i >= 15:
                    b_state = hub.state.to_snapshot(hub.revision)  # B connects here
                elif b_state is not None:
                    late_diffs.append(res.diff.body)
                a_state = apply_changes(a_state, res.diff.body["changes"])
                a_state["revision"] = res.diff.body["revision"]
        assert b_state is not None
        for diff in late_diffs:
            b_state = apply_changes(b_state, diff["changes"])
            b_state["revision"] = diff["revision"]
        assert a_state == b_state == hub.state.to_snapshot(hub.revision)


class TestHeartbeat:
    def test_two_missed_pongs_dead(self):
        hb = Heartbeat()
        hb.start(0)
        assert hb.poll(4999) is None
        assert hb.poll(5000) == "ping"
        assert hb.poll(10000) == "ping"
        assert hb.poll(15000) == "dead"

    def test_pong_keeps_alive(self):
        hb = Heartbeat()
        hb.start(0)
        for t in (5000, 10000, 15000, 20000):
            assert hb.poll(t) == "ping"
            hb.on_pong(t + 100)

    def test_session_survives_dead_connection(self, hub, driver):
        session = register_left(hub, driver)
        hub.disconnect_pad(session.session_id, driver.now)
        resumed, ok, _ = hub.resume_pad(session.resume_token, driver.now + 1000)
        assert resumed.session_id == session.session_id
        assert resumed.bound_track == session.bound_track


class TestLogging:
    def test_log_contains_envs_and_diffs(self):
        log = EventLog()
        hub = make_hub(log=log)
        driver = Driver(hub)
        register_left(hub, driver)
        driver.send_tracks(("t1", 1.2, 5.0))
        kinds = {r["line"] for r in log.records}
        assert {"ctl", "env", "diff"} <= kinds
        env_lines = [r for r in log.records if r["line"] == "env"]
        assert all("rev" in r and "applied" in r for r in env_lines)
