import appdirs
import numpy as np
import pytest

from ..color import hsv_pixels, palettes_from_dict
from ..loggers import senti_logger
from ..nets import NetConfig, init_params
from ..tensor import RngState
from ..training import CorpusObject, CorpusSample, SyntheticCorpusSpec, TrainConfig, generate_corpus

MINI_NET = dict(
    image_size=8,
    content_channels=4,
    style_dim=3,
    mlp_hidden=6,
    res_blocks=1,
    encoder_width=3,
    style_widths=(3, 4),
    decoder_widths=(4, 3),
    disc_widths=(3, 4, 5),
)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long training tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long training runs, skipped unless --runslow is given")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_user_dirs(tmp_path, monkeypatch):
    monkeypatch.setattr(senti_logger, "LOG_FILE", tmp_path / "logs" / "senti.log")
    monkeypatch.setattr(appdirs, "user_config_dir", lambda *args, **kwargs: str(tmp_path / "user-config"))


@pytest.fixture
def mini_config():
    return NetConfig(**MINI_NET)


@pytest.fixture
def mini_params(mini_config):
    return init_params(mini_config, RngState(7))


def random_images(count: int, size: int, seed: int = 0) -> np.ndarray:
    gen = np.random.default_rng(seed)
    return gen.uniform(-1, 1, size=(count, size, size, 3)).astype(np.float32)


def square_mask(size: int, top: int, left: int, side: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=np.float32)
    mask[top : top + side, left : left + side] = 1.0
    return mask


@pytest.fixture
def palettes():
    return palettes_from_dict(
        {
            "warm": {"adjective": "sunny", "hue_low": 0.0, "hue_high": 60.0},
            "cold": {"adjective": "gloomy", "hue_low": 180.0, "hue_high": 260.0},
        }
    )


@pytest.fixture
def mini_corpus(palettes):
    return generate_corpus(SyntheticCorpusSpec(count=6, image_size=8, palettes=palettes, seed=5))


@pytest.fixture
def mini_train_config(mini_config):
    return TrainConfig(net=mini_config, iters=5, batch_size=2, seed=0, log_every=1)


def two_palette_corpus():
    """Four 8×8 images, each holding one solid square: two warm, two cold."""
    samples = []
    for hue, adjective in ((30.0, "sunny"), (220.0, "gloomy"), (45.0, "sunny"), (200.0, "gloomy")):
        image = np.full((8, 8, 3), -0.1, dtype=np.float32)
        mask = square_mask(8, 2, 2, 4)
        image[mask > 0] = hsv_pixels(np.full((8, 8), hue), 0.8, 0.8)[mask > 0]
        samples.append(CorpusSample(image, (CorpusObject("rectangle", mask),), (adjective, "rectangle")))
    return samples
