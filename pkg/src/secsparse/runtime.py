"""In-process simulation of N parties communicating in synchronised rounds.

Every protocol message goes through :meth:`ProtocolContext.exchange` (or its
dense variant), which is the only place where the cost ledger moves. One call
is one barrier, however many messages it carries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import DEFAULT_FIELD, PrimeField


class ConfigurationError(ValueError):
    """Invalid party count or threshold."""


@dataclass(frozen=True)
class CostLedger:
    """Immutable view of the counters of one protocol execution.

    ``opened_elements`` counts values revealed to all parties,
    ``input_elements`` counts shares uploaded by data owners and
    ``offline_elements`` counts dealer-supplied preprocessing material. None of
    the three is included in ``elements_sent``, which only covers
    server-to-server traffic.
    """

    rounds: int = 0
    elements_sent: int = 0
    bytes_sent: int = 0
    peak_stored_elements: int = 0
    opened_elements: int = 0
    input_elements: int = 0
    offline_elements: int = 0

    def __sub__(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(
            rounds=self.rounds - other.rounds,
            elements_sent=self.elements_sent - other.elements_sent,
            bytes_sent=self.bytes_sent - other.bytes_sent,
            peak_stored_elements=self.peak_stored_elements,
            opened_elements=self.opened_elements - other.opened_elements,
            input_elements=self.input_elements - other.input_elements,
            offline_elements=self.offline_elements - other.offline_elements,
        )


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    payload: np.ndarray


class ProtocolContext:
    """Parties ``1..N`` with threshold ``t`` and deterministic randomness.

    Each party owns a generator derived from the seed. A separate dealer
    stream supplies correlated preprocessing (masks, random bits) and an owner
    stream is used when data owners share their inputs.
    """

    def __init__(self, n_parties: int, threshold: int, seed: int = 0, field: PrimeField = DEFAULT_FIELD):
        if n_parties < 3:
            raise ConfigurationError("need at least 3 parties")
        if threshold < 1 or 2 * threshold >= n_parties:
            raise ConfigurationError(f"threshold {threshold} invalid for {n_parties} parties (need 1 <= t, 2t < N)")
        self.n = int(n_parties)
        self.t = int(threshold)
        self.seed = int(seed)
        self.field = field
        self.parties = tuple(range(1, self.n + 1))
        seq = np.random.SeedSequence(self.seed)
        children = seq.spawn(self.n + 2)
        self.party_rngs = [np.random.default_rng(c) for c in children[: self.n]]
        self.dealer_rng = np.random.default_rng(children[self.n])
        self.owner_rng = np.random.default_rng(children[self.n + 1])
        # evaluation points 1..N; vandermonde rows for polynomial evaluation
        self.points = np.arange(1, self.n + 1, dtype=np.int64)
        self._vander_cache: dict[int, np.ndarray] = {}
        self._lagrange_small: tuple[int, ...] | None = None
        self._rounds = 0
        self._elements = 0
        self._opened = 0
        self._inputs = 0
        self._offline = 0
        self._live = 0
        self._peak = 0
        self.transcript: list[tuple[int, int]] | None = None

    def __repr__(self) -> str:
        return f"ProtocolContext(N={self.n}, t={self.t}, seed={self.seed})"

    # polynomial helpers
    def vandermonde(self, degree: int) -> np.ndarray:
        """Integer matrix ``V[i, k] = x_i ** k`` for ``k <= degree``."""
        if degree not in self._vander_cache:
            rows = [[int(x) ** k for k in range(degree + 1)] for x in self.points]
            if max(max(r) for r in rows) >= 1 << 32:
                raise ConfigurationError("too many parties for small evaluation points")
            self._vander_cache[degree] = np.array(rows, dtype=np.int64)
        return self._vander_cache[degree]

    def lagrange_small(self) -> tuple[int, ...]:
        """Signed integer Lagrange coefficients at 0 for the points 1..N."""
        if self._lagrange_small is None:
            coeffs = []
            for i in self.parties:
                num, den = 1, 1
                for j in self.parties:
                    if j != i:
                        num *= j
                        den *= j - i
                coeffs.append(num // den)
            if max(abs(c) for c in coeffs) >= 1 << 32:
                raise ConfigurationError("too many parties for small Lagrange coefficients")
            self._lagrange_small = tuple(coeffs)
        return self._lagrange_small

    def lagrange(self, parties: Sequence[int] | None = None) -> tuple[int, ...]:
        xs = self.parties if parties is None else tuple(parties)
        return self.field.lagrange_at_zero(xs)

    # storage accounting, driven by Shares construction and destruction
    def _alloc(self, count: int) -> None:
        self._live += count

    def _free(self, count: int) -> None:
        self._live -= count

    def _barrier(self) -> None:
        if self._live > self._peak:
            self._peak = self._live

    # communication
    def exchange(self, messages: Sequence[Message]) -> dict[int, list[Message]]:
        """Deliver one barrier's worth of point-to-point messages."""
        inbox: dict[int, list[Message]] = {p: [] for p in self.parties}
        if not messages:
            return inbox
        count = 0
        for msg in messages:
            if msg.src not in inbox or msg.dst not in inbox:
                raise ValueError(f"unknown party in message {msg.src}->{msg.dst}")
            if msg.src != msg.dst:
                count += int(np.size(msg.payload))
            inbox[msg.dst].append(msg)
        self._charge(count)
        return inbox

    def exchange_all(self, outbox: np.ndarray) -> np.ndarray:
        """Dense all-to-all barrier.

        ``outbox[i, j, ...]`` is what party ``i + 1`` sends to party ``j + 1``.
        Returns the inbox view ``inbox[j, i, ...]``. Diagonal entries stay
        local and are free.
        """
        per_pair = int(np.prod(outbox.shape[2:], dtype=np.int64))
        if per_pair:
            self._charge(self.n * (self.n - 1) * per_pair)
        return np.swapaxes(outbox, 0, 1)

    def _charge(self, elements: int) -> None:
        if elements == 0:
            return
        self._barrier()
        self._rounds += 1
        self._elements += elements
        if self.transcript is not None:
            self.transcript.append((self._rounds, elements))

    def record_open(self, count: int) -> None:
        self._opened += int(count)

    def record_input(self, count: int) -> None:
        self._inputs += int(count)

    def record_offline(self, count: int) -> None:
        self._offline += int(count)

    @property
    def ledger(self) -> CostLedger:
        return CostLedger(
            rounds=self._rounds,
            elements_sent=self._elements,
            bytes_sent=self._elements * self.field.wire_bytes,
            peak_stored_elements=self._peak,
            opened_elements=self._opened,
            input_elements=self._inputs,
            offline_elements=self._offline,
        )

    @property
    def live_elements(self) -> int:
        return self._live


def spawn(n_parties: int, threshold: int, seed: int = 0, field: PrimeField = DEFAULT_FIELD) -> ProtocolContext:
    return ProtocolContext(n_parties, threshold, seed, field)


def ledger_snapshot(ctx: ProtocolContext) -> CostLedger:
    return ctx.ledger
