import os

from dotenv import load_dotenv

load_dotenv()

# Geometry
VOXEL_SIZE_NM = 10.0

# Labeling
R_L = 7.0
NEGATIVE_RATIO = 1.0
LABEL_SEED = 0

# Multi-scale patch features
PATCH_SCALES = (1, 2, 4)
PATCH_RADIUS = 2  # 5^3 cube per scale

# MLP training
HIDDEN_SIZES = (64,)
LEARNING_RATE = 0.01
EPOCHS = 50
MINIBATCH_SIZE = 32
L2_PENALTY = 1e-4
TRAIN_SEED = 0
STD_FLOOR = 1e-8

# Averaging + non-maximum suppression
R_A = 7.0
R_N = 21.0
CONFIDENCE_FLOOR = 1e-6
AVERAGING_WINDOWS = ("ball", "cube")
NMS_METRICS = ("euclidean", "chebyshev")

# Evaluation
R_MATCH = 30.0
TARGET_RECALL = 0.9

# Synthetic volumes
SYNTH_DIMS = (64, 64, 64)
SYNTH_N_OBJECTS = 8
SYNTH_OBJECT_RADIUS = 3.0
SYNTH_OBJECT_INTENSITY = 1.0
SYNTH_NOISE_STD = 0.25
SYNTH_MIN_SEPARATION = 22.0  # must exceed R_N or suppression merges objects
SYNTH_ELONGATION = 1.8
SYNTH_CLAMP = (0.0, 2.0)
SYNTH_ATTEMPTS_PER_OBJECT = 1000

# Pipeline
PIPELINE_SEED = 7
N_TRAIN_VOLUMES = 1
N_TEST_VOLUMES = 5
INFER_SLAB_DEPTH = 4  # z-slices per inference work unit

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO_ERROR = 3
EXIT_VALIDATION_ERROR = 4
EXIT_INFEASIBLE_CONFIG = 5
EXIT_TRAINING_DIVERGED = 6

# Environment
DATA_DIR = os.environ.get("VOXDET_DATA_DIR", os.path.join(os.getcwd(), "voxdet-out"))
LOG_LEVEL = os.environ.get("VOXDET_LOG_LEVEL", "INFO").upper()
THREADS = int(os.environ.get("VOXDET_THREADS", "0")) or (os.cpu_count() or 1)
