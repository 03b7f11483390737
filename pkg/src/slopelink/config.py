"""Tunable constants shared across modules.

Everything here is a deployment knob, not physics: values were chosen to
suppress GPS-jitter flapping and interpolation artifacts at desk scale while
keeping alert latency low.
"""

import math

# World frame: right-handed, X east, Y north, Z up, meters.

# Occlusion test: a ray may dip this far below the surface before it counts
# as blocked (absorbs bilinear interpolation error on ridgelines).
OCCLUSION_EPS = 0.05

# Draped outlines sit this far above the surface and are resampled so
# consecutive samples are at most DRAPE_MAX_SPACING apart in XY.
DRAPE_LIFT = 0.3
DRAPE_MAX_SPACING = 2.0

# Hazards without an authored influence radius get this one.
HAZARD_DEFAULT_RADIUS = 15.0

# Overlay selection.
DEFAULT_OVERLAY_BUDGET = 5
VIEW_DISTANCE_MAX = 2000.0
FRUSTUM_NEAR = 0.1
FRUSTUM_EDGE_EPS = 1e-9    # tolerance so points exactly on the screen edge stay in
PRIORITY = {"hazard": 3, "slow_zone": 2, "safe_zone": 1}

# Default camera for poses built from bare X,Y,yaw,pitch input.
DEFAULT_HFOV = math.radians(70.0)
DEFAULT_ASPECT = 16.0 / 9.0
EYE_HEIGHT = 1.7

# Alert discipline.
HYSTERESIS_MARGIN = 2.0        # meters outside a zone edge before an exit fires
ALERT_COOLDOWN_MS = 10_000     # per-annotation floor between rate-limited alerts

# Skier simulator.
GRAVITY = 9.81
SIM_DT = 0.1
SIM_V_MAX = 25.0
SIM_DRAG = 0.01
SIM_INERTIA = 0.85
REST_SPEED = 0.05
HEADING_JITTER = 0.2           # max |radians| the seed tilts the start heading off the fall line

# Session protocol.
PROTOCOL_VERSION = 1
SERVER_SENDER_ID = "server"
HEARTBEAT_INTERVAL_S = 5.0
HEARTBEAT_TIMEOUT_S = 15.0
