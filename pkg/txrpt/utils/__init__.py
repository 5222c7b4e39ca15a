# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division

import hashlib
from functools import wraps
from time import time

import numpy as np
from twisted.internet import defer, reactor

from txrpt.errors import TimeExceeded


def timeout(func):
    """Decorator to add timeout to Deferred calls.

    The wrapped callable receives the absolute deadline as ``_deadline``
    so long-running work can poll :func:`check_deadline` on its own.
    """

    @wraps(func)
    def _timeout(*args, **kwargs):
        now = time()
        deadline = kwargs.pop("deadline", None)
        seconds = kwargs.pop("timeout", None)

        if deadline is None and seconds is not None:
            deadline = now + seconds

        if deadline is not None and deadline < now:
            raise TimeExceeded("TxRPT: run time exceeded by {0}s.".format(now - deadline))

        kwargs["_deadline"] = deadline
        raw_d = func(*args, **kwargs)

        if deadline is None:
            return raw_d

        if seconds is None:
            seconds = max(deadline - now, 0)

        timeout_d = defer.Deferred()
        times_up = reactor.callLater(seconds, timeout_d.callback, None)

        def on_ok(result):
            value, index = result
            if index == 1:
                raw_d.cancel()
                raise TimeExceeded("TxRPT: run time of {0}s exceeded.".format(seconds))
            times_up.cancel()
            return value

        def on_fail(failure):
            failure.trap(defer.FirstError)
            assert failure.value.index == 0
            if times_up.active():
                times_up.cancel()
            failure.value.subFailure.raiseException()

        return defer.DeferredList([raw_d, timeout_d], fireOnOneCallback=True,
                                  fireOnOneErrback=True, consumeErrors=True).addCallbacks(on_ok, on_fail)

    return _timeout


def check_deadline(_deadline):
    if _deadline is not None and _deadline < time():
        raise TimeExceeded("TxRPT: now '{0}', deadline '{1}'".format(time(), _deadline))


def digest(named_tensors):
    """SHA-1 over (name, shape, bytes) of every tensor, in the given order."""
    sha = hashlib.sha1()
    for name, tensor in named_tensors:
        data = np.ascontiguousarray(getattr(tensor, "data", tensor))
        sha.update(name.encode("utf-8"))
        sha.update(repr(data.shape).encode("ascii"))
        sha.update(data.tobytes())
    return sha.hexdigest()
