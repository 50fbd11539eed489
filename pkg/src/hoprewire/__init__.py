"""
Receptive-field expansion, lossless positional encodings and toy experiments for graphs.
"""
