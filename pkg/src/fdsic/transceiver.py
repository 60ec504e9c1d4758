"""Full-duplex transceiver chain: transmitter, auxiliary receiver (wired tap
of the PA output, no LNA) and ordinary receiver (wireless SI channel, LNA),
with the two receivers optionally sharing one PLL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import AuxChannel, ChannelRealization, apply_channel
from .impairments import (
    NoiseConfig,
    NonlinearityConfig,
    PhaseNoiseConfig,
    add_gaussian_noise,
    apply_nonlinearity,
    apply_phase_noise,
    gen_phase_noise,
    linear,
    no_phase_noise,
    quantize_detailed,
    third_order,
)
from .seeding import Seed, derive
from .signal_core import (
    ComplexSignal,
    FrameStructure,
    OfdmGrid,
    dbm_to_mw,
    measure_power_dbm,
    ofdm_demodulate,
    ofdm_modulate,
)

GROUND_TRUTH_TERMS = (
    "linear_si",
    "tx_phase_noise",
    "tx_distortion",
    "rx_distortion",
    "rx_phase_noise",
    "gaussian",
    "quantization",
    "soi",
)


@dataclass(frozen=True)
class TransceiverConfig:
    tx_power_dbm: float = 20.0
    tx_nonlinearity: NonlinearityConfig = field(default_factory=lambda: third_order(-45.0))
    tx_phase_noise: PhaseNoiseConfig = field(default_factory=PhaseNoiseConfig)
    rx_phase_noise: PhaseNoiseConfig = field(default_factory=PhaseNoiseConfig)
    rx_lna_nonlinearity: NonlinearityConfig = field(default_factory=lambda: third_order(-45.0))
    aux_noise: NoiseConfig = field(default_factory=NoiseConfig)
    ord_noise: NoiseConfig = field(default_factory=NoiseConfig)
    share_pll: bool = True
    aux_input_power_dbm: float = -25.0

    def aux_channel(self) -> AuxChannel:
        """Splitter gain that puts the auxiliary input at ``aux_input_power_dbm``."""
        return AuxChannel(gain=float(np.sqrt(dbm_to_mw(self.aux_input_power_dbm - self.tx_power_dbm))))

    @classmethod
    def ideal(cls, tx_power_dbm: float = 20.0, **kw) -> TransceiverConfig:
        """Every impairment disabled."""
        off = NoiseConfig(adc_bits=None, mode="off")
        base = dict(
            tx_power_dbm=tx_power_dbm,
            tx_nonlinearity=linear(),
            tx_phase_noise=no_phase_noise(),
            rx_phase_noise=no_phase_noise(),
            rx_lna_nonlinearity=linear(),
            aux_noise=off,
            ord_noise=off,
        )
        base.update(kw)
        return cls(**base)


@dataclass(frozen=True)
class TxSignals:
    """Transmitter internals: ``output = a1 * with_pn + distortion``."""

    clean: ComplexSignal
    with_pn: ComplexSignal
    distortion: ComplexSignal
    output: ComplexSignal
    phi: np.ndarray
    pa: NonlinearityConfig


def transmit_detailed(grid: OfdmGrid, cfg: TransceiverConfig, seed: Seed) -> TxSignals:
    clean = ofdm_modulate(grid).scaled(np.sqrt(dbm_to_mw(cfg.tx_power_dbm)))
    phi = gen_phase_noise(len(clean), cfg.tx_phase_noise, derive(seed, "tx_phase"))
    with_pn = apply_phase_noise(clean, phi)
    pa = cfg.tx_nonlinearity.calibrated(with_pn)
    out, dist = apply_nonlinearity(with_pn, pa)
    return TxSignals(clean, with_pn, dist, out, phi, pa)


def transmit(grid: OfdmGrid, cfg: TransceiverConfig, seed: Seed) -> ComplexSignal:
    """PA output ``x e^{j phi_tx} + d_tx`` with ``x`` at ``tx_power_dbm``."""
    return transmit_detailed(grid, cfg, seed).output


@dataclass(frozen=True)
class ReceptionResult:
    y_aux: OfdmGrid
    y_ord: OfdmGrid
    ground_truth: dict[str, OfdmGrid]
    aux_ground_truth: dict[str, OfdmGrid]
    phi_rx: np.ndarray
    phi_rx_aux: np.ndarray
    lna: NonlinearityConfig
    info: dict[str, float]

    def reconstructed_ord(self) -> np.ndarray:
        return sum(g.symbols for g in self.ground_truth.values())


def _demod(samples: np.ndarray, frame: FrameStructure | None, fs: float) -> OfdmGrid:
    return ofdm_demodulate(ComplexSignal(samples, fs), frame)


def receive(
    y_tx: ComplexSignal,
    ch_ord: ChannelRealization,
    ch_aux: AuxChannel,
    soi: ComplexSignal | None,
    cfg: TransceiverConfig,
    seed: Seed,
    frame: FrameStructure | None = None,
    tx: TxSignals | None = None,
) -> ReceptionResult:
    """Run the auxiliary and ordinary receive chains.

    ``tx`` (from :func:`transmit_detailed`) only refines the ground-truth
    split of the SI into linear, transmitter phase-noise and PA-distortion
    parts; without it the whole SI lands in ``linear_si``.
    """
    fs = y_tx.sample_rate_hz
    n = len(y_tx)
    zeros = np.zeros(n, dtype=complex)

    phi_rx = gen_phase_noise(n, cfg.rx_phase_noise, derive(seed, "rx_phase"))
    if cfg.share_pll:
        phi_aux = phi_rx
    else:
        phi_aux = gen_phase_noise(n, cfg.rx_phase_noise, derive(seed, "rx_phase_aux"))

    # auxiliary chain: wired tap, shared oscillator, noise, ADC
    a = apply_channel(y_tx, ch_aux.as_realization(ch_ord.n_symbols, ch_ord.n_subcarriers))
    aux_in_dbm = measure_power_dbm(a)
    a_pn = apply_phase_noise(a, phi_aux)
    a_noisy, aux_noise_dbm = add_gaussian_noise(a_pn, cfg.aux_noise, aux_in_dbm, derive(seed, "aux_noise"))
    aq = quantize_detailed(a_noisy, cfg.aux_noise)
    aux_terms = {
        "signal": a.samples,
        "rx_phase_noise": a_pn.samples - a.samples,
        "gaussian": a_noisy.samples - a_pn.samples,
        "quantization": aq.signal.samples - a_noisy.samples,
    }

    # ordinary chain: wireless channel, LNA, shared oscillator, SoI, noise, ADC
    g = apply_channel(y_tx, ch_ord)
    soi_s = soi.samples if soi is not None else zeros
    if soi_s.size != n:
        raise ValueError("signal of interest must match the transmit length")
    ord_in_dbm = measure_power_dbm(ComplexSignal(g.samples + soi_s, fs))
    lna = cfg.rx_lna_nonlinearity.calibrated(g)
    g_nl, d_rx = apply_nonlinearity(g, lna)
    v_pn = apply_phase_noise(g_nl, phi_rx)
    v = ComplexSignal(v_pn.samples + soi_s, fs)
    v_noisy, ord_noise_dbm = add_gaussian_noise(v, cfg.ord_noise, ord_in_dbm, derive(seed, "ord_noise"))
    oq = quantize_detailed(v_noisy, cfg.ord_noise)

    a1 = lna.alpha1
    if tx is not None:
        pa_a1 = tx.pa.alpha1
        lin = apply_channel(tx.clean, ch_ord).samples * pa_a1
        tx_pn = apply_channel(tx.with_pn - tx.clean, ch_ord).samples * pa_a1
        tx_d = apply_channel(tx.distortion, ch_ord).samples
    else:
        lin, tx_pn, tx_d = g.samples, zeros, zeros
    terms = {
        "linear_si": a1 * lin,
        "tx_phase_noise": a1 * tx_pn,
        "tx_distortion": a1 * tx_d,
        "rx_distortion": d_rx.samples,
        "rx_phase_noise": v_pn.samples - g_nl.samples,
        "gaussian": v_noisy.samples - v.samples,
        "quantization": oq.signal.samples - v_noisy.samples,
        "soi": soi_s,
    }

    info = {
        "ord_input_dbm": ord_in_dbm,
        "aux_input_dbm": aux_in_dbm,
        "ord_noise_dbm": ord_noise_dbm,
        "aux_noise_dbm": aux_noise_dbm,
        "ord_clipped": oq.n_clipped,
        "aux_clipped": aq.n_clipped,
        "lna_alpha3": lna.alpha3,
    }
    return ReceptionResult(
        y_aux=_demod(aq.signal.samples, frame, fs),
        y_ord=_demod(oq.signal.samples, frame, fs),
        ground_truth={k: _demod(v, frame, fs) for k, v in terms.items()},
        aux_ground_truth={k: _demod(v, frame, fs) for k, v in aux_terms.items()},
        phi_rx=phi_rx,
        phi_rx_aux=phi_aux,
        lna=lna,
        info=info,
    )
