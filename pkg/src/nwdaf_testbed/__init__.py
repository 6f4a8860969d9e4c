"""Desk-scale 5G core testbed with an event-collecting NWDAF and next-cell prediction."""

__version__ = "0.1.0"
