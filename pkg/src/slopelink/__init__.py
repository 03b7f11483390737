"""Slopelink: guide-to-skier terrain annotation sync for backcountry descents.

A guide annotates a heightfield terrain model with hazard points, slow-down
zones, and safe zones; a session server synchronizes the annotation set to
skier clients and pushes prioritized, occlusion-tested screen overlays plus
zone/proximity alerts for each incoming skier pose.
"""

__version__ = "0.1.0"
