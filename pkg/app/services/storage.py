"""
File import and export.

QPH is the lossless raw container: the ASCII magic "QPH1", a u8 dtype code
(1 float32, 2 float64, 3 complex64), u32 rows and u32 cols, all little
endian, followed by the row-major samples. PNG files are previews and
masks; a 16-bit PNG carries its value scaling in a JSON sidecar.
"""

from pathlib import Path
from typing import Optional, TypeVar, Union

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from app.core.exceptions import FormatError, ParameterError
from app.core.logging import get_logger
from app.models.fields import RealImage, SpectralWindow
from app.models.metrics import CellMask, CorpusReport
from app.models.patching import MosaicManifest
from app.models.reconstruction import CalibrationFrame, LobeLocation
from app.models.sidecars import CalibrationSidecar, PngScaling

logger = get_logger(__name__)

PathLike = Union[str, Path]
Model = TypeVar("Model", bound=BaseModel)

QPH_MAGIC = b"QPH1"
QPH_HEADER = np.dtype([("magic", "S4"), ("dtype", "u1"), ("rows", "<u4"), ("cols", "<u4")])
QPH_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<c8")}
_CODE_FOR_DTYPE = {dtype: code for code, dtype in QPH_CODES.items()}

PNG16_MAX = 65535


def sidecar_path(path: PathLike) -> Path:
    """JSON sidecar next to a binary file: image.png -> image.png.json."""
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_qph(path: PathLike, array: np.ndarray) -> Path:
    """
    Write a 2D array as QPH.

    Args:
        path: Output file
        array: float32, float64 or complex64 samples

    Returns:
        The written path
    """
    array = np.asarray(array)
    if array.ndim != 2:
        raise ParameterError(f"QPH holds 2D arrays, got {array.ndim}D")
    code = _CODE_FOR_DTYPE.get(array.dtype.newbyteorder("<"))
    if code is None:
        raise ParameterError(f"no QPH dtype code for {array.dtype}")

    header = np.zeros(1, dtype=QPH_HEADER)
    header["magic"] = QPH_MAGIC
    header["dtype"] = code
    header["rows"], header["cols"] = array.shape
    payload = np.ascontiguousarray(array, dtype=QPH_CODES[code])

    path = Path(path)
    path.write_bytes(header.tobytes() + payload.tobytes())
    logger.debug(f"Wrote {path} ({array.shape[0]}x{array.shape[1]}, code {code})")
    return path


def read_qph(path: PathLike) -> np.ndarray:
    """Read a QPH file; FormatError names the file on any corruption."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < QPH_HEADER.itemsize:
        raise FormatError(str(path), "truncated QPH header")
    header = np.frombuffer(raw, dtype=QPH_HEADER, count=1)[0]
    if bytes(header["magic"]) != QPH_MAGIC:
        raise FormatError(str(path), f"bad magic {bytes(header['magic'])!r}, expected {QPH_MAGIC!r}")
    code = int(header["dtype"])
    if code not in QPH_CODES:
        raise FormatError(str(path), f"unknown dtype code {code}")

    rows, cols = int(header["rows"]), int(header["cols"])
    dtype = QPH_CODES[code]
    expected = rows * cols * dtype.itemsize
    payload = raw[QPH_HEADER.itemsize :]
    if rows < 1 or cols < 1 or len(payload) != expected:
        raise FormatError(
            str(path), f"payload of {len(payload)} bytes does not match {rows}x{cols} code {code}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(rows, cols).copy()


def read_real_qph(path: PathLike) -> RealImage:
    array = read_qph(path)
    if np.iscomplexobj(array):
        raise FormatError(str(path), "expected real samples, found complex64")
    try:
        return RealImage(data=array)
    except ValueError as exc:
        raise FormatError(str(path), str(exc)) from exc


def write_json(path: PathLike, document: BaseModel) -> Path:
    path = Path(path)
    path.write_text(document.model_dump_json(indent=2))
    return path


def read_json(path: PathLike, model: type[Model]) -> Model:
    """Validate a JSON document; pydantic errors propagate with field locations."""
    return model.model_validate_json(Path(path).read_text())


def _open_png(path: Path) -> Image.Image:
    try:
        image = Image.open(path)
        image.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(str(path), f"unreadable PNG ({exc})") from exc
    return image


def write_png16(path: PathLike, image: RealImage, unit: str = "") -> Path:
    """
    Linearly scale an image to 16-bit codes and record the scale.

    The sidecar holds the sample values of codes 0 and 65535; a constant
    image is stored as all zeros with min == max.
    """
    path = Path(path)
    data = image.data.astype(np.float64)
    low, high = float(data.min()), float(data.max())
    span = high - low
    if span > 0:
        codes = np.rint((data - low) / span * PNG16_MAX)
    else:
        codes = np.zeros_like(data)
    Image.fromarray(codes.astype(np.uint16)).save(path, format="PNG")
    write_json(sidecar_path(path), PngScaling(min_value=low, max_value=high, unit=unit))
    logger.debug(f"Wrote preview {path} [{low:.4g}, {high:.4g}] {unit}")
    return path


def read_png16(path: PathLike) -> RealImage:
    """Read a grayscale PNG, applying the sidecar scaling when present."""
    path = Path(path)
    image = _open_png(path)
    if image.mode not in ("I;16", "I;16B", "I", "L"):
        raise FormatError(str(path), f"expected a grayscale PNG, found mode {image.mode}")
    codes = np.asarray(image).astype(np.float64)

    sidecar = sidecar_path(path)
    if not sidecar.exists():
        return RealImage(data=codes)
    scale = read_json(sidecar, PngScaling)
    full_scale = PNG16_MAX if image.mode != "L" else 255
    data = scale.min_value + codes / full_scale * (scale.max_value - scale.min_value)
    return RealImage(data=data)


def write_mask_png(path: PathLike, mask: CellMask) -> Path:
    """8-bit mask, 255 inside and 0 outside."""
    path = Path(path)
    Image.fromarray(np.where(mask.mask, 255, 0).astype(np.uint8)).save(path, format="PNG")
    return path


def read_mask_png(path: PathLike) -> CellMask:
    """Read an 8-bit mask; values > 0 are inside."""
    path = Path(path)
    image = _open_png(path)
    if image.mode != "L":
        image = image.convert("L")
    return CellMask(mask=np.asarray(image) > 0)


def load_image(path: PathLike) -> RealImage:
    """Hologram, phase or reference image by extension: .png or QPH."""
    path = Path(path)
    if not path.exists():
        raise FormatError(str(path), "no such file")
    if path.suffix.lower() == ".png":
        return read_png16(path)
    return read_real_qph(path)


def save_calibration(path: PathLike, cal: CalibrationFrame) -> Path:
    """QPH float64 frame with gx_ref stacked above gy_ref, plus sidecar."""
    path = Path(path)
    stacked = np.vstack([cal.gx_ref.data, cal.gy_ref.data]).astype(np.float64)
    write_qph(path, stacked)
    sidecar = CalibrationSidecar(
        source_rows=cal.source_dims[0],
        source_cols=cal.source_dims[1],
        x_lobe=cal.lobes.x_lobe.as_list() if cal.lobes else None,
        y_lobe=cal.lobes.y_lobe.as_list() if cal.lobes else None,
    )
    write_json(sidecar_path(path), sidecar)
    logger.info(f"Saved calibration {path} ({cal.shape[0]}x{cal.shape[1]})")
    return path


def _window(values: list[int]) -> SpectralWindow:
    return SpectralWindow(center_row=values[0], center_col=values[1], half_size=values[2])


def load_calibration(path: PathLike) -> CalibrationFrame:
    path = Path(path)
    sidecar_file = sidecar_path(path)
    if not sidecar_file.exists():
        raise FormatError(str(path), f"missing calibration sidecar {sidecar_file.name}")
    meta = read_json(sidecar_file, CalibrationSidecar)
    stacked = read_real_qph(path).data
    if stacked.shape[0] % 2:
        raise FormatError(str(path), "calibration frame must stack two equally sized fields")
    half = stacked.shape[0] // 2

    lobes: Optional[LobeLocation] = None
    if meta.x_lobe is not None and meta.y_lobe is not None:
        lobes = LobeLocation(x_lobe=_window(meta.x_lobe), y_lobe=_window(meta.y_lobe))
    return CalibrationFrame(
        gx_ref=RealImage(data=stacked[:half]),
        gy_ref=RealImage(data=stacked[half:]),
        source_dims=(meta.source_rows, meta.source_cols),
        lobes=lobes,
    )


def load_manifest(path: PathLike) -> tuple[MosaicManifest, list[list[RealImage]]]:
    """
    Read a mosaic manifest and every tile it lists.

    Returns:
        (manifest, tiles) with tiles[i][j] in grid order
    """
    path = Path(path)
    manifest = read_json(path, MosaicManifest)
    tiles: list[list[RealImage]] = []
    for i, row in enumerate(manifest.resolve(path.parent)):
        loaded: list[RealImage] = []
        for j, tile_path in enumerate(row):
            if not tile_path.exists():
                raise FormatError(str(tile_path), f"tile ({i}, {j}) is missing")
            tile = load_image(tile_path)
            if tile.shape != (manifest.tile_rows, manifest.tile_cols):
                raise ParameterError(
                    f"tile ({i}, {j}) {tile_path.name} is {tile.shape}, "
                    f"manifest declares {manifest.tile_rows}x{manifest.tile_cols}"
                )
            loaded.append(tile)
        tiles.append(loaded)
    logger.info(f"Loaded {sum(len(r) for r in tiles)} tiles from {path.name}")
    return manifest, tiles


def write_report_csv(path: PathLike, report: CorpusReport) -> Path:
    """Case rows followed by the summary rows."""
    path = Path(path)
    report.combined().to_csv(path, index=False, float_format="%.12g")
    return path
