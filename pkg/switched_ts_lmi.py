#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
switched_ts_lmi.py - v1.0

Decentralized switched T-S output-feedback synthesis from the command line:

    python switched_ts_lmi.py validate switched_ts_lmi/data/paper_siv.sys
    python switched_ts_lmi.py synth --system <file> --zeta 1.7,1.5 --out artifacts
    python switched_ts_lmi.py simulate --system <file> --controller artifacts/controller.json
    python switched_ts_lmi.py verify --system <file> --controller artifacts/controller.json
    python switched_ts_lmi.py repro --out artifacts

Thin wrapper; the logic lives in the switched_ts_lmi package.
"""

from switched_ts_lmi.core import main

if __name__ == "__main__":
    main()
