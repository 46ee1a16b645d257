"""
JSON documents written next to binary outputs.
"""

from typing import Optional

from pydantic import BaseModel, Field


class PngScaling(BaseModel):
    """Linear map between 16-bit PNG codes and sample values"""

    min_value: float = Field(..., description="Sample value stored as code 0")
    max_value: float = Field(..., description="Sample value stored as code 65535")
    unit: str = ""


class CalibrationSidecar(BaseModel):
    """Metadata of a stored calibration frame"""

    source_rows: int = Field(..., ge=1)
    source_cols: int = Field(..., ge=1)
    x_lobe: Optional[list[int]] = Field(None, min_length=3, max_length=3)
    y_lobe: Optional[list[int]] = Field(None, min_length=3, max_length=3)


class SynthManifest(BaseModel):
    """Files produced by one synth run"""

    hologram: str
    hologram_preview: str
    phase: str
    mask: str
    rows: int
    cols: int
    seed: int
    wavelength_um: float


class CorpusEntry(BaseModel):
    """One case of an evaluation corpus document; paths are relative to it"""

    case_id: str
    reference: str
    candidate: str
    mask: str
    candidate_mdi: Optional[str] = None


class CorpusManifest(BaseModel):
    """Evaluation corpus listing"""

    cases: list[CorpusEntry] = Field(..., min_length=1)
