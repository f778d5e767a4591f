"""Discrete-event simulation of duty-cycled lossy links.

A link is characterized by a bandwidth source (constant, or gamma-drawn
per resampling interval and clamped to a configured range), a duty-cycle
budget of d*W airtime seconds per window of W seconds, an i.i.d.
per-packet loss probability, and a per-packet byte overhead. Time is
continuous double precision.

The stream header is sent first and is loss-protected: attempts repeat
until one gets through, each consuming airtime. Data packets then follow
one of three policies:

  * ``priority_retransmit``: always (re)send the lowest-seq unacked
    packet, so the delivered set is a prefix of the priority order;
  * ``index_retransmit``: one pass in seq order, then retry the lost ones
    in seq order, round after round;
  * ``index_skip``: a single pass in seq order, losses are never retried.

ACKs are modeled as instantaneous and reliable (the feedback channel is
idealized; loss detection is otherwise undefined). A transmission starts
only when it fits the remaining window budget, the window itself and the
deadline, so per-window airtime never exceeds d*W.

Determinism: a simulation draws loss coins and bandwidth samples from two
rng streams derived from the seed, one coin per attempt in send order, so
identical (bitstream, link, policy, deadline) inputs reproduce the trace
byte for byte, and policies compared under the same seed see the same
coin sequence.
"""

from __future__ import annotations

import csv
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .codec import OffloadBitstream


class Policy(str, Enum):
    PRIORITY_RETRANSMIT = "priority_retransmit"
    INDEX_RETRANSMIT = "index_retransmit"
    INDEX_SKIP = "index_skip"


@dataclass(frozen=True)
class GammaBandwidth:
    """Bandwidth (bytes/s) redrawn every ``interval`` seconds from a gamma
    distribution, clamped to [lo, hi]."""

    shape: float = 2.0
    scale: float = 3125.0  # mean shape*scale = 6.25 KB/s
    lo: float = 300.0
    hi: float = 50_000.0
    interval: float = 1.0


@dataclass(frozen=True)
class LinkModel:
    bandwidth: float = 2500.0  # bytes/s, used when gamma is None
    gamma: GammaBandwidth | None = None
    duty: float = 1.0  # fraction of each window usable as airtime
    window: float = 60.0  # seconds
    loss: float = 0.0  # per-packet loss probability
    overhead_bytes: int = 13  # PHY/MAC bytes added to every transmission
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.duty <= 1.0:
            raise ValueError(f"duty must be in (0, 1], got {self.duty}")
        if self.window <= 0.0:
            raise ValueError(f"window must be positive, got {self.window}")
        if not 0.0 <= self.loss < 1.0:
            raise ValueError(f"loss must be in [0, 1), got {self.loss}")

    def with_seed(self, seed: int) -> "LinkModel":
        return replace(self, seed=seed)


def sample_bandwidths(gamma: GammaBandwidth, n: int, seed: int = 0, clamp: bool = True) -> np.ndarray:
    """Draw n bandwidth samples (the simulator's generator, exposed for tests)."""
    rng = np.random.default_rng([int(seed), 1])
    s = rng.gamma(gamma.shape, gamma.scale, size=n)
    return np.clip(s, gamma.lo, gamma.hi) if clamp else s


class _BandwidthProcess:
    """Fill-forward per-interval samples so the draw count depends only on
    how far time has advanced, not on the query pattern."""

    def __init__(self, link: LinkModel, rng: np.random.Generator):
        self.link = link
        self.rng = rng
        self.samples: list[float] = []

    def at(self, t: float) -> float:
        g = self.link.gamma
        if g is None:
            return self.link.bandwidth
        idx = int(t // g.interval)
        while len(self.samples) <= idx:
            s = float(self.rng.gamma(g.shape, g.scale))
            self.samples.append(min(max(s, g.lo), g.hi))
        return self.samples[idx]


HEADER_SEQ = -1


@dataclass(frozen=True)
class TraceEvent:
    time: float
    seq: int
    outcome: str  # sent | lost | delivered | acked


@dataclass
class LinkTrace:
    events: list[TraceEvent] = field(default_factory=list)
    delivered: frozenset = frozenset()
    deadline: float = 0.0
    total_packets: int = 0
    payload_bytes_delivered: int = 0
    header_attempts: int = 0
    header_delivered: bool = False
    window_airtime: dict = field(default_factory=dict)
    window_bytes: dict = field(default_factory=dict)

    def max_window_airtime(self) -> float:
        return max(self.window_airtime.values(), default=0.0)


def simulate(bitstream: OffloadBitstream, link: LinkModel, policy: Policy, deadline: float) -> LinkTrace:
    """Transmit one bitstream over the link until the deadline or full delivery."""
    if deadline <= 0.0:
        raise ValueError(f"deadline must be positive, got {deadline}")
    rng_loss = np.random.default_rng([int(link.seed), 0])
    bw = _BandwidthProcess(link, np.random.default_rng([int(link.seed), 1]))

    events: list[TraceEvent] = []
    window_airtime: dict[int, float] = defaultdict(float)
    window_bytes: dict[int, int] = defaultdict(int)
    budget = link.duty * link.window
    state = {"t": 0.0}

    def try_send(nbytes: int, seq: int):
        """Returns True (delivered), False (lost) or None (no slot before the
        deadline is over)."""
        t = state["t"]
        while True:
            if t >= deadline:
                state["t"] = t
                return None
            w = int(t // link.window)
            win_end = (w + 1) * link.window
            airtime = nbytes / bw.at(t)
            fits_budget = window_airtime[w] + airtime <= budget + 1e-12
            fits_window = t + airtime <= win_end + 1e-12
            fits_deadline = t + airtime <= deadline + 1e-12
            if fits_budget and fits_window and fits_deadline:
                break
            if not fits_deadline and fits_budget and fits_window:
                state["t"] = deadline
                return None
            t = win_end  # wait for the next duty window
        events.append(TraceEvent(time=t, seq=seq, outcome="sent"))
        done = t + airtime
        window_airtime[w] += airtime
        window_bytes[w] += nbytes
        state["t"] = done
        if rng_loss.random() < link.loss:
            events.append(TraceEvent(time=done, seq=seq, outcome="lost"))
            return False
        events.append(TraceEvent(time=done, seq=seq, outcome="delivered"))
        events.append(TraceEvent(time=done, seq=seq, outcome="acked"))
        return True

    # Header first: the decoder cannot place a single value without it.
    header_nbytes = len(bitstream.header.to_bytes()) + 4 + link.overhead_bytes
    header_attempts = 0
    header_ok = False
    while not header_ok:
        res = try_send(header_nbytes, HEADER_SEQ)
        if res is None:
            return LinkTrace(
                events=events,
                delivered=frozenset(),
                deadline=deadline,
                total_packets=len(bitstream.packets),
                header_attempts=header_attempts,
                header_delivered=False,
                window_airtime=dict(window_airtime),
                window_bytes=dict(window_bytes),
            )
        header_attempts += 1
        header_ok = res

    policy_state = _make_policy_state(policy, len(bitstream.packets))
    delivered: set[int] = set()
    payload_delivered = 0
    while True:
        seq = policy_state.next()
        if seq is None:
            break
        nbytes = 2 + len(bitstream.packets[seq].payload) + link.overhead_bytes
        res = try_send(nbytes, seq)
        if res is None:
            break
        policy_state.on_result(seq, res)
        if res:
            delivered.add(seq)
            payload_delivered += len(bitstream.packets[seq].payload)

    return LinkTrace(
        events=events,
        delivered=frozenset(delivered),
        deadline=deadline,
        total_packets=len(bitstream.packets),
        payload_bytes_delivered=payload_delivered,
        header_attempts=header_attempts,
        header_delivered=True,
        window_airtime=dict(window_airtime),
        window_bytes=dict(window_bytes),
    )


class _PriorityRetransmit:
    def __init__(self, n):
        self.n = n
        self.ptr = 0

    def next(self):
        return self.ptr if self.ptr < self.n else None

    def on_result(self, seq, ok):
        if ok:
            self.ptr += 1


class _IndexRetransmit:
    def __init__(self, n):
        self.queue = deque(range(n))
        self.retry: list[int] = []

    def next(self):
        if not self.queue:
            if not self.retry:
                return None
            self.queue = deque(self.retry)
            self.retry = []
        return self.queue[0]

    def on_result(self, seq, ok):
        self.queue.popleft()
        if not ok:
            self.retry.append(seq)


class _IndexSkip:
    def __init__(self, n):
        self.queue = deque(range(n))

    def next(self):
        return self.queue[0] if self.queue else None

    def on_result(self, seq, ok):
        self.queue.popleft()


def _make_policy_state(policy: Policy, n: int):
    if policy == Policy.PRIORITY_RETRANSMIT:
        return _PriorityRetransmit(n)
    if policy == Policy.INDEX_RETRANSMIT:
        return _IndexRetransmit(n)
    return _IndexSkip(n)


def delivered_prefix_fraction(trace: LinkTrace) -> tuple[float, float]:
    """(fully delivered prefix / total, raw delivered / total)."""
    if trace.total_packets == 0:
        return 1.0, 1.0
    m = 0
    while m in trace.delivered:
        m += 1
    return m / trace.total_packets, len(trace.delivered) / trace.total_packets


def write_trace_csv(trace: LinkTrace, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "seq", "outcome"])
        for e in trace.events:
            w.writerow([f"{e.time:.9f}", e.seq, e.outcome])
