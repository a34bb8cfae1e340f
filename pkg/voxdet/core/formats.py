import json
import os

from voxdet.core.errors import FormatError, InputFileError, UnsupportedVersionError

# Format tags
FORMAT_VOLUME = "vvol"      # {dims, dtype, order, voxel_size_nm, data}
FORMAT_POINTS = "vpts"      # {points: [{x, y, z, confidence?}]}
FORMAT_MODEL = "vmlp"       # {patch_spec, layer_sizes, feature_mean, ...}
FORMAT_VERSION = 1

VOLUME_DTYPE = "f32le"
VOLUME_ORDER = "x-fastest"


def encode_document(fmt, body):
    """Encode a tagged JSON document as UTF-8 text (sorted keys, no timestamps)."""
    doc = {"format": fmt, "version": FORMAT_VERSION}
    doc.update(body)
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def decode_document(text, fmt, path=None):
    """
    Parse a tagged JSON document and check its format/version.
    Returns the decoded dict.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"malformed JSON: {e}", path) from e
    if not isinstance(doc, dict):
        raise FormatError("top-level JSON value must be an object", path)
    if doc.get("format") != fmt:
        raise UnsupportedVersionError(f"expected format {fmt!r}, got {doc.get('format')!r}", path)
    if doc.get("version") != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported {fmt} version {doc.get('version')!r}", path)
    return doc


def read_document(path, fmt):
    if not os.path.exists(path):
        raise InputFileError(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InputFileError(path, f"cannot read ({e.strerror})") from e
    return decode_document(text, fmt, path)


def write_document(path, fmt, body):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(encode_document(fmt, body))


def header_path(path):
    """Normalize a volume path or prefix to its `.json` header path."""
    path = str(path)
    return path if path.endswith(".json") else path + ".json"
