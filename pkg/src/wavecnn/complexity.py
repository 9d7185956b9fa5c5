"""Multiply-add accounting for the 2D transforms and whole models.

The transform counts follow the dense truncated-matrix reading: each subband
is a chained product of a ``m/2 x m`` operator, the image, and a ``n x n/2``
transposed operator, evaluated left to right, counting every scalar multiply
and add.  Conv and dense layers use the usual fused kernel-size times
output-size convention.  Reports also expose two alternative readings of the
wavelet cost (ll-subband-only quarter count, and the banded cost of the
actual filtering implementation) so the headline convention is auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidConfig, NonPositive, ShapeMismatch, OddSpatial


def _check_dims(m: int, n: int, c: int):
    if m < 1 or n < 1 or c < 1:
        raise NonPositive(f"dimensions must be >= 1, got m={m}, n={n}, c={c}")


def dwt2d_madds(m: int, n: int, c: int) -> int:
    """Multiply-adds of a dense 2D analysis over c channels: 4c(m^2 n + m n^2/2 - 3mn/4)."""
    _check_dims(m, n, c)
    return c * (4 * m * m * n + 2 * m * n * n - 3 * m * n)


def idwt2d_madds(m: int, n: int, c: int) -> int:
    """Multiply-adds of a dense 2D synthesis: 4c(m n^2 + m^2 n/2 - 3mn/4) + 3."""
    _check_dims(m, n, c)
    return c * (4 * m * n * n + 2 * m * m * n - 3 * m * n) + 3


def dwt2d_banded_madds(m: int, n: int, c: int, taps: int) -> int:
    """Fused multiply-adds of the banded filtering path actually implemented.

    Two stride-2 row passes shared by the four subbands, then four column
    passes, each output coefficient costing ``taps`` fused multiply-adds.
    Not a published counting convention; reported for contrast only.
    """
    _check_dims(m, n, c)
    row = 2 * (m // 2) * n * taps
    col = 4 * (m // 2) * (n // 2) * taps
    return c * (row + col)


@dataclass(frozen=True)
class LayerMadds:
    index: int
    kind: str
    in_shape: tuple
    out_shape: tuple
    madds: int
    wavelet: bool
    ll_only: int = 0
    banded: int = 0


@dataclass(frozen=True)
class MaddsReport:
    """Per-layer multiply-add table with wavelet/non-wavelet subtotals.

    ``ratio_percent`` is 100 * wavelet / (wavelet + other).  The secondary
    wavelet columns (``wavelet_ll_only_subtotal``, ``wavelet_banded_subtotal``)
    restate the wavelet rows under the quarter-count and banded conventions.
    """

    rows: tuple
    wavelet_subtotal: int
    other_subtotal: int
    wavelet_ll_only_subtotal: int
    wavelet_banded_subtotal: int

    @property
    def total(self) -> int:
        return self.wavelet_subtotal + self.other_subtotal

    @property
    def ratio_percent(self) -> float:
        if self.total == 0:
            return 0.0
        return 100.0 * self.wavelet_subtotal / self.total

    def to_json_dict(self) -> dict:
        return {
            "layers": [
                {
                    "index": r.index, "kind": r.kind,
                    "in_shape": list(r.in_shape), "out_shape": list(r.out_shape),
                    "madds": r.madds, "wavelet": r.wavelet,
                    "ll_only": r.ll_only, "banded": r.banded,
                }
                for r in self.rows
            ],
            "wavelet_subtotal": self.wavelet_subtotal,
            "other_subtotal": self.other_subtotal,
            "total": self.total,
            "ratio_percent": self.ratio_percent,
            "wavelet_ll_only_subtotal": self.wavelet_ll_only_subtotal,
            "wavelet_banded_subtotal": self.wavelet_banded_subtotal,
        }

    def to_csv(self) -> str:
        lines = ["index,kind,in_shape,out_shape,madds,wavelet,ll_only,banded"]
        for r in self.rows:
            in_s = "x".join(str(d) for d in r.in_shape)
            out_s = "x".join(str(d) for d in r.out_shape)
            lines.append(f"{r.index},{r.kind},{in_s},{out_s},{r.madds},"
                         f"{int(r.wavelet)},{r.ll_only},{r.banded}")
        lines.append(f"wavelet_subtotal,{self.wavelet_subtotal},,,,,,")
        lines.append(f"other_subtotal,{self.other_subtotal},,,,,,")
        lines.append(f"total,{self.total},,,,,,")
        lines.append(f"ratio_percent,{self.ratio_percent!r},,,,,,")
        lines.append(f"wavelet_ll_only_subtotal,{self.wavelet_ll_only_subtotal},,,,,,")
        lines.append(f"wavelet_banded_subtotal,{self.wavelet_banded_subtotal},,,,,,")
        return "\n".join(lines) + "\n"


def model_madds(model, input_shape) -> MaddsReport:
    """Trace a built model at ``input_shape`` ((C,H,W) or (N,C,H,W)) and count.

    Wavelet down-sampling layers are counted at the full dense 2D-analysis
    cost; conv/dense at fused kernel-times-output cost; everything else at 0.
    """
    shape = tuple(int(d) for d in input_shape)
    if len(shape) == 4:
        shape = shape[1:]
    if len(shape) != 3:
        raise InvalidConfig(f"input shape must be (C,H,W) or (N,C,H,W), got {input_shape}")

    rows = []
    w_total = other_total = ll_total = banded_total = 0
    for i, layer in enumerate(model.layers):
        try:
            count = layer.madds(shape)
            out_shape = layer.output_shape(shape)
        except (ShapeMismatch, OddSpatial) as exc:
            raise InvalidConfig(f"layer {i} does not fit input {shape}: {exc}") from exc
        is_wavelet = type(layer).__name__ == "WaveletDown"
        ll_only = banded = 0
        if is_wavelet:
            c, h, w = shape
            h, w = h + h % 2, w + w % 2
            ll_only = round(count / 4)
            banded = dwt2d_banded_madds(h, w, c, len(layer.spec.analysis_low))
            w_total += count
            ll_total += ll_only
            banded_total += banded
        else:
            other_total += count
        rows.append(LayerMadds(
            index=i, kind=type(layer).__name__, in_shape=shape, out_shape=out_shape,
            madds=count, wavelet=is_wavelet, ll_only=ll_only, banded=banded))
        shape = out_shape

    return MaddsReport(
        rows=tuple(rows),
        wavelet_subtotal=w_total,
        other_subtotal=other_total,
        wavelet_ll_only_subtotal=ll_total,
        wavelet_banded_subtotal=banded_total,
    )
