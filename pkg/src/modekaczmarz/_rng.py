"""Named, independent random streams derived from one seed."""

import numpy as np

STREAMS = ("rows", "workers", "ties", "noise")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}
