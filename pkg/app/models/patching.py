"""
Whole-slide mosaic geometry.
"""

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.fields import RealImage


class PatchLayout(BaseModel):
    """Grid geometry of a patched whole-slide hologram"""

    model_config = ConfigDict(frozen=True)

    tile_rows: int = Field(..., ge=1)
    tile_cols: int = Field(..., ge=1)
    grid_rows: int = Field(..., ge=1)
    grid_cols: int = Field(..., ge=1)
    patch_lines_r: list[int] = Field(default_factory=list)
    patch_lines_c: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _validate_lines(self) -> "PatchLayout":
        expected_r = [i * self.tile_rows for i in range(1, self.grid_rows)]
        expected_c = [j * self.tile_cols for j in range(1, self.grid_cols)]
        if self.patch_lines_r != expected_r or self.patch_lines_c != expected_c:
            raise ValueError("patch lines do not match the tile grid")
        return self

    @classmethod
    def from_grid(
        cls, tile_rows: int, tile_cols: int, grid_rows: int, grid_cols: int
    ) -> "PatchLayout":
        """Derive the patch-line coordinates from tile size and grid shape."""
        return cls(
            tile_rows=tile_rows,
            tile_cols=tile_cols,
            grid_rows=grid_rows,
            grid_cols=grid_cols,
            patch_lines_r=[i * tile_rows for i in range(1, grid_rows)],
            patch_lines_c=[j * tile_cols for j in range(1, grid_cols)],
        )

    @property
    def tile_shape(self) -> tuple[int, int]:
        return self.tile_rows, self.tile_cols

    @property
    def mosaic_shape(self) -> tuple[int, int]:
        return self.tile_rows * self.grid_rows, self.tile_cols * self.grid_cols

    def tile_slices(self, i: int, j: int) -> tuple[slice, slice]:
        """Global slices covered by tile (i, j)."""
        r0, c0 = i * self.tile_rows, j * self.tile_cols
        return slice(r0, r0 + self.tile_rows), slice(c0, c0 + self.tile_cols)


class WsiMosaic(BaseModel):
    """Patched intensity mosaic and its layout"""

    model_config = ConfigDict(frozen=True)

    hologram: RealImage
    layout: PatchLayout

    @model_validator(mode="after")
    def _validate_dims(self) -> "WsiMosaic":
        if self.hologram.shape != self.layout.mosaic_shape:
            raise ValueError(
                f"mosaic {self.hologram.shape} does not match layout {self.layout.mosaic_shape}"
            )
        return self


class MosaicManifest(BaseModel):
    """JSON manifest listing tile files in grid order"""

    tile_rows: int = Field(..., ge=1)
    tile_cols: int = Field(..., ge=1)
    grid: list[list[str]] = Field(..., min_length=1)

    def resolve(self, base_dir: Path) -> list[list[Path]]:
        """Tile paths resolved against the manifest directory."""
        return [[base_dir / entry for entry in row] for row in self.grid]
