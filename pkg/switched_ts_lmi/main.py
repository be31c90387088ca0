#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Entry point for `python -m switched_ts_lmi`; delegates to core.
"""

from .core import main

if __name__ == "__main__":
    main()
