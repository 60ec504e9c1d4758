"""All-digital self-interference cancellation for full-duplex OFDM radios
using an auxiliary receiver chain."""

__version__ = "0.1.0"
