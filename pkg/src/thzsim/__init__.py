"""Desk-scale 300 GHz channel toolkit: QD multipath clusters, MIMO/PRS capacity and human-body shadowing."""

__version__ = "0.1.0"
