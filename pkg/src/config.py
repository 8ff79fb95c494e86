OUTPUT_PATH = "runs/"
MANIFEST_NAME = "manifest.json"

# process exit codes not carried by a LabError
EXIT_IO = 4
EXIT_UNEXPECTED = 1

# containment: outermost share of grid points on each side
BOUNDARY_FRACTION = 0.025
CONSTRUCTION_BOUNDARY_TOL = 1e-8
DRIFT_BOUNDARY_TOL = 1e-4

# grid-scaling anchor: n = 4096 resolves hbar = 1e-3 on a width-4 window
GRID_ANCHOR_HBAR = 1e-3
GRID_ANCHOR_N = 4096
GRID_ANCHOR_WIDTH = 4.0

# classical
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
NEWTON_FD_STEP = 1e-6
SEPARATION_SATURATION = 1e-2
SEPARATION_TRANSIENT_FACTOR = 10.0
MIN_FIT_SAMPLES = 10
LEVEL_SET_TOL = 1e-12

# quantum
STABILITY_LIMIT = 0.5
SUPPORT_THRESHOLD = 1e-10
EMPTY_BIN_PROBABILITY = 1e-14

# diagnostics
TUBE_RADIUS_FACTOR = 5.0
HUSIMI_SPACING_FACTOR = 0.25
REVIVAL_THRESHOLD = 0.1
REVIVAL_GUARD_STEPS = 8
FIT_XTOL = 1e-10
FIT_MAX_SWEEPS = 400
FIT_GRADIENT_TOL = 1e-5
OFF_MANIFOLD_ENERGY = 0.2

# fractions of the Ehrenfest time lambda^-1 log(1/hbar)
SCHEDULE_FRACTIONS = (0.25, 0.5, 1.0, 2.0)

DIAGNOSTICS = (
    "moments",
    "husimi",
    "coherent-fit",
    "egorov",
    "revivals",
    "tube-mass",
    "measurement-samples",
)

SWEEP_DIAGNOSTICS = ("coherent-fit", "egorov", "spread")

SCENARIO_PRESETS = {
    "dilation": {
        "hbar": 1e-3,
        "x_min": -16.0,
        "x_max": 16.0,
        "n": 4096,
        "dt": 1e-2,
        "t_final": 6.907755278982137,
        "snapshot_stride": 10,
        "q0": 0.0,
        "p0": 0.0,
        "diagnostics": ["moments", "revivals"],
    },
    "double-well": {
        "hbar": 1e-3,
        "x_min": -2.0,
        "x_max": 2.0,
        "n": 4096,
        "dt": 1e-3,
        "t_final": 9.768653995111967,
        "snapshot_stride": 100,
        "q0": 0.0,
        "p0": 0.0,
        "diagnostics": ["moments", "revivals", "tube-mass"],
    },
    "harmonic": {
        "hbar": 1e-3,
        "x_min": -2.0,
        "x_max": 2.0,
        "n": 4096,
        "dt": 5e-4,
        "t_final": 6.283185307179586,
        "snapshot_stride": 100,
        "q0": 1.0,
        "p0": 0.0,
        "omega": 1.0,
        "diagnostics": ["moments", "revivals"],
    },
    "free": {
        "hbar": 1e-3,
        "x_min": -2.0,
        "x_max": 2.0,
        "n": 4096,
        "dt": 5e-4,
        "t_final": 2.0,
        "snapshot_stride": 100,
        "q0": -1.0,
        "p0": 1.0,
        "diagnostics": ["moments"],
    },
}
