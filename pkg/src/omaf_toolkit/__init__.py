"""Toolkit for OMAF 2nd-edition omnidirectional media presentations.

Library modules:

* geometry     - sphere/projection math (ERP, CMP, viewports, regions)
* model        - presentation document model and structural validation
* codec        - OMB binary container serialization (docs/format.md)
* conformance  - media profile and operation point matching
* dash         - minimal DASH MPD generation/parsing with VWPT/OVLY
* playback     - overlay, viewpoint-switch and timed-metadata engines
* strategy     - viewport-dependent tile streaming simulator
* cli          - command-line front end (`omaf-toolkit`)
"""

__version__ = "0.1.0"
