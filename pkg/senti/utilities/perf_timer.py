import functools
import logging
import time

log = logging.getLogger(__name__)


def perf_timer(debug: bool = True):
    def inner(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            val = func(*args, **kwargs)
            stop = time.perf_counter()
            if debug:
                log.debug(f"Ran {func.__name__} in {stop - start:.3f} sec.")

            return val

        return wrapper

    return inner
