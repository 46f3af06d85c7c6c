import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

import numpy as np

from frag_core.services.logger import get_logger, log_experiment_event, log_performance
from .config import DEFAULT_THREADS

logger = get_logger(__name__)

T = TypeVar("T")

_U64 = (1 << 64) - 1


def derive_seed(master: int, tag: str, index: int) -> int:
    """64-bit replicate seed mixed from (master seed, stream tag, replicate index).

    The three words are fed to numpy's SeedSequence, whose hash mixes every
    input bit into the generated state; the tag enters as its CRC-32.
    """
    ss = np.random.SeedSequence([master & _U64, zlib.crc32(tag.encode()), index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replicate_rng(master: int, tag: str, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, tag, index))


class ReplicateExecutor:
    """Runs independent replicates on a thread pool.

    Replicate i always receives the generator seeded by derive_seed(master, tag, i)
    and results come back in index order, so the thread count never changes output.
    """

    def __init__(self, threads: int = DEFAULT_THREADS):
        self.threads = max(1, int(threads))

    def map(self, fn: Callable[[int, np.random.Generator], T], master: int, tag: str,
            count: int) -> List[T]:
        start = time.time()

        def run(i: int) -> T:
            return fn(i, replicate_rng(master, tag, i))

        if self.threads == 1 or count <= 1:
            results = [run(i) for i in range(count)]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(run, range(count)))

        elapsed = time.time() - start
        log_experiment_event(tag, "replicates finished", {"count": count, "threads": self.threads})
        log_performance(f"replicates:{tag}", elapsed, {"count": count})
        return results
