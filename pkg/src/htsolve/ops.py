"""Operation-count model.

Every dense linear-algebra primitive reports an estimated flop-like count;
handling one matrix entry counts as one operation.  Counters live in a
context variable so nested runs can be isolated.
"""

from collections import Counter
from contextlib import contextmanager
import contextvars

_current = contextvars.ContextVar("htsolve_ops", default=None)


class OpsModel:
    def __init__(self):
        self.counts = Counter()

    def add(self, kind, n):
        self.counts[kind] += int(n)

    @property
    def total(self):
        return int(sum(self.counts.values()))

    def snapshot(self):
        return dict(self.counts)


_global = OpsModel()


def current():
    m = _current.get()
    return _global if m is None else m


def count(kind, n):
    current().add(kind, n)


def total():
    return current().total


@contextmanager
def tracking():
    """Fresh counter for the duration of the block."""
    m = OpsModel()
    tok = _current.set(m)
    try:
        yield m
    finally:
        _current.reset(tok)
