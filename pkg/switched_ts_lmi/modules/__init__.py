"""
Building blocks of the switched_ts_lmi pipeline.
"""
