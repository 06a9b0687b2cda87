"""Embeddings that turn the two input views into attention tokens.

The rendered image passes through a small convolutional stem (three stride-2
convolutions then one stride-1, each with a channel norm and ReLU) whose
flattened map a two-layer perceptron compresses into a single image token.
The kinematic signal matrix is pooled per channel, lifted by two normalized
fully connected layers, and projected per channel into one token each; a
pointwise convolution over the channel axis also produces the pooled 1D map
that the refinement path keeps shrinking.
"""

from __future__ import annotations

from typing import Tuple

from .. import diffcore as dc
from ..diffcore import Tensor
from ..errors import ConfigError
from .config import ModelConfig
from .layers import ChannelNorm2d, Conv1d, Conv2d, LayerNorm, Linear, Mlp, Module


class ImageStem(Module):
    def __init__(self, cfg: ModelConfig, rng):
        c_full = cfg.stem_channels
        c_quarter = max(1, c_full // 4)
        c_half = max(1, c_full // 2)
        self.conv1 = Conv2d(3, c_quarter, 3, rng, stride=2, padding=1)
        self.norm1 = ChannelNorm2d(c_quarter)
        self.conv2 = Conv2d(c_quarter, c_half, 3, rng, stride=2, padding=1)
        self.norm2 = ChannelNorm2d(c_half)
        self.conv3 = Conv2d(c_half, c_full, 3, rng, stride=2, padding=1)
        self.norm3 = ChannelNorm2d(c_full)
        self.conv4 = Conv2d(c_full, c_full, 3, rng, stride=1, padding=1)
        self.norm4 = ChannelNorm2d(c_full)
        self.canvas_size = cfg.canvas_size
        map_hw = cfg.stem_map_size
        self.token_mlp = Mlp(c_full * map_hw * map_hw, cfg.token_mlp_hidden, cfg.d, rng)

    def __call__(self, image: Tensor) -> Tuple[Tensor, Tensor]:
        if image.shape != (3, self.canvas_size, self.canvas_size):
            raise ConfigError(
                "stem expects a (3, %d, %d) image, got %s"
                % (self.canvas_size, self.canvas_size, image.shape)
            )
        x = dc.relu(self.norm1(self.conv1(image)))
        x = dc.relu(self.norm2(self.conv2(x)))
        x = dc.relu(self.norm3(self.conv3(x)))
        x = dc.relu(self.norm4(self.conv4(x)))
        token = self.token_mlp(dc.flatten(x))  # (1, d)
        return token, x


class SignalEmbed(Module):
    def __init__(self, cfg: ModelConfig, rng):
        self.n_channels = cfg.n_channels
        self.pool_len = cfg.signal_pool_len
        self.fc1 = Linear(cfg.signal_pool_len, cfg.signal_hidden, rng)
        self.norm1 = LayerNorm(cfg.signal_hidden)
        self.fc2 = Linear(cfg.signal_hidden, cfg.signal_hidden, rng)
        self.norm2 = LayerNorm(cfg.signal_hidden)
        self.token_mlp = Mlp(cfg.signal_hidden, cfg.token_mlp_hidden, cfg.d, rng)
        self.map_len = cfg.signal_map_len
        self.map_conv = Conv1d(cfg.n_channels, cfg.signal_map_channels, 1, rng)

    def __call__(self, signal: Tensor) -> Tuple[Tensor, Tensor]:
        if signal.shape[0] != self.n_channels:
            raise ConfigError(
                "signal embed expects %d channels, got %s" % (self.n_channels, signal.shape)
            )
        if signal.shape[1] < 1:
            raise ConfigError("signal embed needs at least one time step")
        pooled = dc.adaptive_avg_pool1d(signal, self.pool_len)  # (n, pool_len)
        h = dc.relu(self.norm1(self.fc1(pooled)))
        h = dc.relu(self.norm2(self.fc2(h)))
        tokens = self.token_mlp(h)  # (n, d)
        pooled_map = dc.adaptive_avg_pool1d(signal, self.map_len)
        map1d = self.map_conv(pooled_map)  # (map_channels, map_len)
        return tokens, map1d
