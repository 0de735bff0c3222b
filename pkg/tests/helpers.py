"""Shared builders for randomized states and small synthetic scenes."""

import numpy as np

from sgmnmf import audio, model, simulate


def random_state(
    rng,
    n_bins=5,
    n_frames=7,
    n_channels=2,
    n_sources=2,
    n_bases=3,
    beta=3.4,
    algorithm="subgaussian",
    iterations=5,
):
    """A fully scrambled, valid separation state (Q pushed off identity)."""
    hyper = model.Hyperparams(
        beta=beta,
        n_sources=n_sources,
        n_bases=n_bases,
        iterations=iterations,
        seed=int(rng.integers(2**31)),
        algorithm=algorithm,
    )
    st = model.init_state(hyper, n_bins, n_frames, n_channels)
    st.source.T[...] = rng.uniform(0.2, 2.0, st.source.T.shape)
    st.source.V[...] = rng.uniform(0.2, 2.0, st.source.V.shape)
    st.source.Z[...] = rng.uniform(0.2, 2.0, st.source.Z.shape)
    st.spatial.G[...] = rng.uniform(0.2, 2.0, st.spatial.G.shape)
    m = n_channels
    jitter = rng.standard_normal((n_bins, m, m)) + 1j * rng.standard_normal((n_bins, m, m))
    st.spatial.Q = np.eye(m, dtype=np.complex128) + 0.3 * jitter
    st.validate()
    return st


def random_mixture(rng, n_bins=5, n_frames=7, n_channels=2):
    shape = (n_bins, n_frames, n_channels)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def comod_multitone(seed, length, n_tones=8, depth=0.8, sample_rate=16000):
    """Sum of random sinusoids under one shared slow AM envelope.

    Each occupied bin sees a near-constant-modulus phasor across frames
    (ring-like, negative excess kurtosis), while the shared envelope
    co-modulates every band of the source -- the cue a shared-activation
    factorization needs to keep a source's bands together.
    """
    rng = np.random.default_rng([seed, 77])
    t = np.arange(length)
    carriers = rng.uniform(0.02, 0.18, n_tones)
    phases = rng.uniform(0.0, 2 * np.pi, n_tones)
    tones = np.zeros(length)
    for f, p in zip(carriers, phases):
        tones += np.sin(2 * np.pi * f * t + p)
    f_am = rng.uniform(2e-5, 2e-4)
    p_am = rng.uniform(0.0, 2 * np.pi)
    env = 1.0 - depth / 2 + (depth / 2) * np.sin(2 * np.pi * f_am * t + p_am)
    return audio.Waveform(sample_rate, (env * tones / np.sqrt(n_tones))[:, None])


def trend_scene(seed, length=30000, rt60=0.3, tail_gain=0.05):
    """Two co-modulated multitone sources through seeded synthetic RIRs."""
    room = simulate.RoomSpec(rt60=rt60, filter_length=4800, seed=seed, tail_gain=tail_gain)
    dries = [comod_multitone(1000 * seed + n, length) for n in range(2)]
    return simulate.mix(dries, simulate.synth_rir(room))


def stft_16k():
    """The 64 ms / 16 ms analysis grid used throughout the tests."""
    return audio.StftConfig.from_ms(64.0, 16.0, 16000)
