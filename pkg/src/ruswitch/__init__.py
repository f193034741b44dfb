"""Link-level simulator and energy-efficiency optimizer for radio units
that switch waveform (CP-OFDM vs DFT-spread OFDM) and antenna mode."""

__version__ = "0.1.0"
