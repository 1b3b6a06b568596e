'''
Module: stages.py
Description: Thread plumbing for the online pipeline (tracking -> loop closure -> reconstruction)

Usage:
[Channels]
- END: end-of-stream marker
- NonBlockingSender: ordered sender that never blocks its producer (local backlog when the queue is full,
  overflows past a limit are logged and counted)
- put_latest(): replace whatever is waiting in a size-1 queue
- drain(): block for one item, then take everything already queued

[Stages]
- Stage: named worker thread; an exception stops the pipeline and is re-raised by join_all()
- join_all(): join stages in order, re-raising the first stage failure
'''
# Import packages
from __future__ import annotations
import logging
import queue
import threading
from collections import deque
from typing import Any, Callable, Optional

log = logging.getLogger(__name__)

END = object()


class NonBlockingSender:
    '''
    NonBlockingSender: ordered producer side of a bounded queue; items that do not fit wait in a local backlog

    The backlog itself has no cap, so send() never blocks or drops. Crossing limit is logged and counted in
    overflows, and max_backlog keeps the high-water mark for the run report.

    Parameters:
    q (queue.Queue): bounded consumer queue
    limit (int, optional): backlog length that is reported as an overflow (Default: q.maxsize, or 64 if unbounded)
    '''

    def __init__(self, q: queue.Queue, limit: Optional[int] = None):
        self.queue = q
        self.limit = limit if limit is not None else (q.maxsize if q.maxsize > 0 else 64)
        self.backlog: deque = deque()
        self.max_backlog = 0
        self.overflows = 0

    def send(self, item: Any) -> None:
        self.backlog.append(item)
        if len(self.backlog) == self.limit + 1:
            self.overflows += 1
            log.warning("sender backlog passed %d items; the consumer is falling behind", self.limit)
        self.flush()

    def flush(self) -> None:
        while self.backlog:
            try:
                self.queue.put_nowait(self.backlog[0])
            except queue.Full:
                self.max_backlog = max(self.max_backlog, len(self.backlog))
                return
            self.backlog.popleft()

    def close(self, stop: Optional[threading.Event] = None) -> None:
        """Deliver the backlog (blocking) followed by END."""
        self.backlog.append(END)
        while self.backlog:
            if stop is not None and stop.is_set():
                return
            try:
                self.queue.put(self.backlog[0], timeout=0.1)
            except queue.Full:
                continue
            self.backlog.popleft()


def put_latest(q: queue.Queue, item: Any) -> None:
    """Keep only the newest item in q (maxsize 1); older snapshots are discarded."""
    while True:
        try:
            q.put_nowait(item)
            return
        except queue.Full:
            try:
                q.get_nowait()
            except queue.Empty:
                pass


def drain(q: queue.Queue, stop: Optional[threading.Event] = None, timeout: float = 0.1) -> list:
    '''
    drain(): wait for at least one item, then return everything queued (END included, and last)
    '''
    items = []
    while not items:
        if stop is not None and stop.is_set():
            return [END]
        try:
            items.append(q.get(timeout=timeout))
        except queue.Empty:
            continue
    while items[-1] is not END:
        try:
            items.append(q.get_nowait())
        except queue.Empty:
            break
    return items


class Stage(threading.Thread):
    '''
    Stage: worker thread running target(); a failure sets the shared stop event

    Parameters:
    name (str): stage name (tracking, loop, recon)
    target (callable): stage body, called without arguments
    stop (threading.Event): pipeline-wide abort flag
    '''
    def __init__(self, name: str, target: Callable[[], None], stop: threading.Event):
        super().__init__(name=f"tacslam-{name}", daemon=True)
        self.stage = name
        self._body = target
        self.stop = stop
        self.error: Optional[BaseException] = None

    def run(self) -> None:
        try:
            self._body()
        except BaseException as e:      # re-raised in the caller's thread
            self.error = e
            self.stop.set()
            log.error("%s stage failed: %s", self.stage, e)


def join_all(stages: list[Stage]) -> None:
    for s in stages:
        s.join()
    for s in stages:
        if s.error is not None:
            raise s.error
