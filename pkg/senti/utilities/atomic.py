import contextlib
import os
import pathlib
import tempfile
import threading

_lock = threading.Lock()


@contextlib.contextmanager
def atomic_write(filename: str | pathlib.Path, mode: str = "wb"):
    """Write to a temporary file beside `filename`, then swap it into place.

    Nothing appears at `filename` unless the block finishes without raising.
    """
    filename = pathlib.Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)
    encoding = None if "b" in mode else "utf-8"
    with tempfile.NamedTemporaryFile(
        mode=mode, delete=False, dir=filename.parent, prefix=f".{filename.name}.", encoding=encoding
    ) as tf:
        try:
            yield tf
        except BaseException:
            tf.close()
            os.unlink(tf.name)
            raise
    with _lock:
        os.replace(tf.name, filename)
