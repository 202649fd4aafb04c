"""PNG read/write. All internal math is linear; gamma 2.2 applies only here."""

import io

import numpy as np
from PIL import Image

GAMMA = 2.2


def encode_png(image: np.ndarray) -> bytes:
    """Linear float (H, W, 3) -> PNG bytes (8-bit, display gamma)."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    display = np.power(img, 1.0 / GAMMA)
    data = (display * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_png(image: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_png(image))


def decode_png(data: bytes) -> np.ndarray:
    """PNG bytes -> linear float (H, W, 3)."""
    img = Image.open(io.BytesIO(data)).convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return np.power(arr, GAMMA)


def read_png(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_png(f.read())
