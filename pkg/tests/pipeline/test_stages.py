import queue
import threading

import pytest

from tacslam.pipeline import END, NonBlockingSender, Stage, drain, join_all, put_latest


def test_sender_never_blocks_and_keeps_order():
    q = queue.Queue(maxsize=2)
    sender = NonBlockingSender(q)
    for k in range(5):
        sender.send(k)
    assert q.qsize() == 2 and list(sender.backlog) == [2, 3, 4]
    assert sender.max_backlog == 3

    got = [q.get_nowait(), q.get_nowait()]
    sender.flush()
    got += [q.get_nowait(), q.get_nowait()]
    assert got == [0, 1, 2, 3] and list(sender.backlog) == [4]


def test_sender_close_delivers_backlog_then_end():
    q = queue.Queue(maxsize=1)
    sender = NonBlockingSender(q)
    sender.send("a")
    sender.send("b")
    received = []

    def consume():
        while True:
            item = q.get()
            received.append(item)
            if item is END:
                return

    t = threading.Thread(target=consume)
    t.start()
    sender.close()
    t.join(timeout=5)
    assert received == ["a", "b", END]


def test_put_latest_replaces_waiting_item():
    q = queue.Queue(maxsize=1)
    put_latest(q, 1)
    put_latest(q, 2)
    assert q.get_nowait() == 2 and q.empty()


def test_drain_takes_everything_up_to_end():
    q = queue.Queue()
    for item in (1, 2, END, 3):
        q.put(item)
    assert drain(q) == [1, 2, END]
    assert drain(q) == [3]

    stop = threading.Event()
    stop.set()
    assert drain(queue.Queue(), stop) == [END]


def test_stage_failure_stops_the_pipeline():
    stop = threading.Event()

    def boom():
        raise RuntimeError("tracking exploded")

    def waits():
        stop.wait(5)

    stages = [Stage("tracking", boom, stop), Stage("loop", waits, stop)]
    for s in stages:
        s.start()
    with pytest.raises(RuntimeError, match="exploded"):
        join_all(stages)
    assert stop.is_set() and stages[1].error is None


def test_sender_reports_a_backlog_past_its_limit(caplog):
    sender = NonBlockingSender(queue.Queue(maxsize=1), limit=2)
    with caplog.at_level("WARNING", logger="tacslam.pipeline.stages"):
        for k in range(5):
            sender.send(k)
    assert list(sender.backlog) == [1, 2, 3, 4]
    assert sender.overflows == 1 and sender.max_backlog == 4
    assert "backlog passed 2 items" in caplog.text
    assert NonBlockingSender(queue.Queue(maxsize=3)).limit == 3
