"""Deterministic random streams.

Everything stochastic in the package draws from counter-based Philox
generators keyed by (seed, stream). Streams keep independent concerns
(weight init, shuffling, augmentation, synthesis) reproducible in isolation:
adding draws to one stream never shifts another. Per-record substreams make
augmentation order-independent, so records can be processed in parallel and
still come out bitwise identical.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_AUGMENT = 2
STREAM_SYNTH = 3
STREAM_CHECK = 4

_NAMES = {
    "init": STREAM_INIT,
    "shuffle": STREAM_SHUFFLE,
    "augment": STREAM_AUGMENT,
    "synth": STREAM_SYNTH,
    "check": STREAM_CHECK,
}

_SUBSTREAM_SPAN = 1 << 32


def make_rng(seed: int, stream=0, substream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream, substream).

    stream may be a name from the table above or a raw integer id.
    substream < 2**32 selects an independent lane within the stream
    (one per record index during augmentation).
    """
    if isinstance(stream, str):
        if stream not in _NAMES:
            raise ConfigError("unknown rng stream %r (known: %s)" % (stream, sorted(_NAMES)))
        stream = _NAMES[stream]
    if not 0 <= substream < _SUBSTREAM_SPAN:
        raise ConfigError("substream %d out of range" % substream)
    key = np.array(
        [np.uint64(seed), np.uint64(int(stream) * _SUBSTREAM_SPAN + substream)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
