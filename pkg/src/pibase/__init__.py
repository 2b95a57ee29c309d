"""Hardware-free intrusion detection stack.

Subpackages:
    imaging    - grayscale rasters, PGM I/O, integral images
    detector   - Haar feature cascade face detector and its trainer
    recognizer - LBPH face recognizer with a labeled master list
    pipeline   - motion-gated capture, decide/publish flow, metrics
    broker     - auth + JSON tree DB + storage + topic messaging backend
    cli        - operator entry points
"""

__version__ = "0.1.0"
