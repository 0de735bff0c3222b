"""Synthetic scenes: sub-Gaussian dry sources, exponential-decay room
filters, and convolutive mixing with ground-truth source images.

Everything is deterministic given (seed, spec); per-(source, mic)
filter randomness comes from spawned seed-sequence children so the
pairs could be generated in any order or in parallel.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .audio import Waveform
from .errors import DimensionMismatchError, EmptyInputError

LOG_1000 = 3.0 * np.log(10.0)


def default_delays(n_sources: int, n_mics: int, base: int = 4) -> np.ndarray:
    """Distinct inter-mic delay patterns per source: base + n + m*(n+1)."""
    n = np.arange(n_sources)[:, None]
    m = np.arange(n_mics)[None, :]
    return (base + n + m * (n + 1)).astype(np.int64)


@dataclass
class RoomSpec:
    n_sources: int = 2
    n_mics: int = 2
    rt60: float = 0.3
    direct_delay: np.ndarray = None
    filter_length: int = 4800
    seed: int = 0
    sample_rate: int = 16000
    tail_gain: float = 0.05

    def __post_init__(self):
        if self.n_sources < 1 or self.n_mics < 1:
            raise ValueError("need at least one source and one mic")
        if self.rt60 < 0:
            raise ValueError("rt60 must be >= 0")
        if self.filter_length < 1:
            raise ValueError("filter_length must be >= 1")
        if self.direct_delay is None:
            self.direct_delay = default_delays(self.n_sources, self.n_mics)
        else:
            self.direct_delay = np.asarray(self.direct_delay, dtype=np.int64)
        if self.direct_delay.shape != (self.n_sources, self.n_mics):
            raise DimensionMismatchError(
                f"direct_delay shape {self.direct_delay.shape} != "
                f"({self.n_sources}, {self.n_mics})"
            )
        if (self.direct_delay < 0).any() or (
            self.direct_delay >= self.filter_length
        ).any():
            raise ValueError("delays must lie inside the filter")


@dataclass
class MixtureBundle:
    mixture: Waveform
    images: list
    dries: list
    rirs: np.ndarray


def gen_subgaussian_source(length: int, kind: str, seed, sample_rate: int = 16000) -> Waveform:
    """Dry test signals with sub-Gaussian amplitude statistics.

    uniform_iid: i.i.d. uniform on [-1, 1] (excess kurtosis -1.2).
    am_tone: random-phase sinusoid with a slow random amplitude
    modulation; a sine's excess kurtosis is -1.5, the modulation keeps
    it negative while spreading energy over neighboring bins.
    """
    if length <= 0:
        raise EmptyInputError("source length must be positive")
    rng = np.random.default_rng(seed)
    if kind == "uniform_iid":
        data = rng.uniform(-1.0, 1.0, size=length)
    elif kind == "am_tone":
        t = np.arange(length, dtype=np.float64)
        f_c = rng.uniform(0.02, 0.18)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        f_am = rng.uniform(2e-5, 2e-4)
        phase_am = rng.uniform(0.0, 2.0 * np.pi)
        depth = rng.uniform(0.3, 0.7)
        env = 1.0 - depth / 2.0 + (depth / 2.0) * np.sin(
            2.0 * np.pi * f_am * t + phase_am
        )
        data = env * np.sin(2.0 * np.pi * f_c * t + phase)
    else:
        raise ValueError(f"unknown source kind {kind!r}")
    return Waveform(sample_rate, data[:, None])


def synth_rir(spec: RoomSpec) -> np.ndarray:
    """(N, M, filter_length) filters: unit direct impulse + decaying tail.

    The tail is white noise shaped by exp(-3 ln10 (t - d)/(rt60 fs))
    starting one sample after the direct path, so its energy envelope
    falls 60 dB over rt60 seconds; rt60 = 0 gives pure delays.
    """
    n_src, n_mic, length = spec.n_sources, spec.n_mics, spec.filter_length
    rirs = np.zeros((n_src, n_mic, length))
    children = np.random.SeedSequence(spec.seed).spawn(n_src * n_mic)
    t = np.arange(length, dtype=np.float64)
    for n in range(n_src):
        for m in range(n_mic):
            d = int(spec.direct_delay[n, m])
            h = rirs[n, m]
            h[d] = 1.0
            if spec.rt60 > 0:
                rng = np.random.default_rng(children[n * n_mic + m])
                noise = rng.standard_normal(length)
                env = np.exp(-LOG_1000 * (t - d) / (spec.rt60 * spec.sample_rate))
                h += spec.tail_gain * noise * env * (t > d)
    return rirs


def mix(dries, rirs: np.ndarray, snr_db: float = 0.0) -> MixtureBundle:
    """Convolve, balance source-image powers at channel 1, and sum.

    Dries are rescaled so the first source's channel-1 image power
    exceeds every other source's by snr_db (all equal at 0 dB); images
    are truncated to the dry length and the mixture is their exact sum.
    """
    n_src, n_mic, _ = rirs.shape
    if len(dries) != n_src:
        raise DimensionMismatchError(f"{len(dries)} dries vs {n_src} filter sets")
    lengths = {d.n_samples for d in dries}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"dry lengths differ: {sorted(lengths)}")
    length = lengths.pop()
    sample_rate = dries[0].sample_rate

    images = np.empty((n_src, length, n_mic))
    for n in range(n_src):
        dry = dries[n].channel(0)
        for m in range(n_mic):
            images[n, :, m] = fftconvolve(dry, rirs[n, m])[:length]

    scaled_dries = []
    for n in range(n_src):
        power = np.mean(images[n, :, 0] ** 2)
        if power == 0.0:
            raise EmptyInputError(f"source {n} image has zero power at channel 1")
        gain = 1.0 / np.sqrt(power)
        if n > 0:
            gain *= 10.0 ** (-snr_db / 20.0)
        images[n] *= gain
        scaled_dries.append(Waveform(sample_rate, dries[n].data * gain))

    mixture = np.sum(images, axis=0)
    return MixtureBundle(
        mixture=Waveform(sample_rate, mixture),
        images=[Waveform(sample_rate, images[n].copy()) for n in range(n_src)],
        dries=scaled_dries,
        rirs=rirs,
    )
