import os
from concurrent.futures import ThreadPoolExecutor


def max_threads() -> int:
    try:
        n = int(os.environ.get("REEBLAB_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def pmap(fn, items):
    """Ordered map honouring ``REEBLAB_THREADS``; results come back in input order."""
    items = list(items)
    n = min(max_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
