import numpy as np
import pytest

from secsparse.runtime import ConfigurationError, CostLedger, Message, ProtocolContext
from secsparse.shamir import mul, share


def test_valid_and_invalid_contexts():
    ProtocolContext(3, 1)
    ProtocolContext(7, 3)
    with pytest.raises(ConfigurationError):
        ProtocolContext(2, 1)
    with pytest.raises(ConfigurationError):
        ProtocolContext(4, 2)
    with pytest.raises(ConfigurationError):
        ProtocolContext(5, 0)


def test_fresh_ledger_is_zero():
    assert ProtocolContext(3, 1).ledger == CostLedger()


def test_exchange_counting():
    ctx = ProtocolContext(3, 1)
    ctx.exchange([])
    assert ctx.ledger.rounds == 0
    msgs = [Message(i, j, np.zeros(1)) for i in ctx.parties for j in ctx.parties if i != j]
    ctx.exchange(msgs)
    assert (ctx.ledger.rounds, ctx.ledger.elements_sent) == (1, 6)
    ctx.exchange([Message(1, 2, np.zeros(10))])
    ctx.exchange([Message(2, 3, np.zeros(10))])
    assert (ctx.ledger.rounds, ctx.ledger.elements_sent) == (3, 26)
    assert ctx.ledger.bytes_sent == 26 * ctx.field.wire_bytes
    with pytest.raises(ValueError):
        ctx.exchange([Message(1, 9, np.zeros(1))])


def test_exchange_all_skips_diagonal():
    ctx = ProtocolContext(5, 2)
    inbox = ctx.exchange_all(np.arange(5 * 5 * 4).reshape(5, 5, 4))
    assert ctx.ledger.elements_sent == 20 * 4
    assert inbox[1, 0, 0] == 4 * 5 * 0 + 4 * 1  # party 1 -> party 2
    ctx.exchange_all(np.zeros((5, 5, 0)))
    assert ctx.ledger.rounds == 1


def _run(seed):
    ctx = ProtocolContext(7, 3, seed=seed)
    ctx.transcript = []
    a = share(ctx, np.arange(20))
    b = share(ctx, np.arange(20, 40))
    out = mul(a, b)
    return ctx.transcript, ctx.ledger, ctx.field.to_int(out.data).tolist()


def test_determinism_under_seed():
    assert _run(3) == _run(3)
    assert _run(3)[2] != _run(4)[2]


def test_counters_monotone_and_peak_storage():
    ctx = ProtocolContext(3, 1)
    ctx.transcript = []
    a = share(ctx, np.arange(100))
    before = ctx.ledger
    mul(a, a)
    after = ctx.ledger
    assert after.rounds >= before.rounds and after.elements_sent >= before.elements_sent
    assert after.peak_stored_elements >= 200  # the operand and its product-in-flight
    diff = after - before
    assert diff.rounds == 1 and diff.elements_sent == 600
