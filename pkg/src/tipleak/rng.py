"""Deterministic random-stream derivation.

All randomness in the simulator flows from a single root seed.  Every
consumer (a node answering a request, a light node picking a response,
an experiment drawing a layout) gets its own ``random.Random`` stream,
derived by hashing the root seed together with an integer key path that
identifies the consumer and the round.  Because the derivation is a pure
function of ``(root_seed, key path)``, results never depend on scheduling
or worker count: two runs with the same seed produce bit-identical draws
no matter how the work is split up.
"""

from __future__ import annotations

import hashlib
import random
import struct

# Domain tags keep key paths from different subsystems disjoint.
DOMAIN_LAYOUT = 1      # node placement
DOMAIN_ADVERSARY = 2   # adversary subset draws
DOMAIN_REQUEST = 3     # a light node's per-round request/follow choices
DOMAIN_RESPONSE = 4    # a full node answering one request
DOMAIN_LOCAL = 5       # local tip selection (no request issued)
DOMAIN_EXPERIMENT = 6  # experiment-level draws (samples, subsets, ...)


def substream(root_seed: int, *path: int) -> random.Random:
    """Return an independent RNG for the given integer key path.

    The stream is seeded with a BLAKE2b hash of the root seed and path,
    so distinct paths yield unrelated streams and the same path always
    yields the same stream.
    """
    h = hashlib.blake2b(digest_size=16)
    h.update(struct.pack("<q", root_seed))
    for part in path:
        h.update(struct.pack("<q", part))
    return random.Random(int.from_bytes(h.digest(), "little"))
