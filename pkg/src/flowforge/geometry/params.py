"""Parametric description of a parallel-channel flow field."""

from dataclasses import dataclass

from ..errors import ConstructionError


@dataclass(frozen=True)
class FlowFieldParams:
    """Dimensions of the parallel flow-field geometry (full geometry, SI units).

    The channel array consists of ``n_channels`` vertical channels of width
    ``channel_width`` at pitch ``channel_spacing``, running between an inlet
    distributor (top) and an outlet distributor (bottom).  The distributor
    floor is a symmetric wedge of slope ``taper``: it peaks at the array
    midline, where the nominal channel length is ``channel_length_center``,
    and a channel centered a distance ``d`` from the midline has mean length
    ``channel_length_center - taper * d`` (outer channels are shorter).
    ``taper = 0`` gives equal-length channels and a flat floor.

    ``depth_h`` is the out-of-plane channel depth used to convert volumetric
    flow rates to the planar model and to build the out-of-plane drag
    closure; set it to ``None`` for a pure 2D model with unit depth.

    With ``half_symmetry`` only the left half of the geometry is meshed and
    the cut is tagged as a symmetry boundary; ``n_channels`` still refers to
    the full geometry and must be even.
    """

    n_channels: int = 6
    channel_width: float = 1.2e-3
    channel_spacing: float = 3.0e-3
    channel_length_center: float = 30.0e-3
    taper: float = 0.4
    distributor_depth_in: float = 1.1e-3
    distributor_depth_out: float = 1.1e-3
    inlet_width: float = 2.4e-3
    outlet_width: float = 2.4e-3
    depth_h: float | None = 2.0e-3
    half_symmetry: bool = True

    def validate(self) -> None:
        if self.n_channels < 2:
            raise ConstructionError("n_channels must be >= 2")
        if self.half_symmetry and self.n_channels % 2 != 0:
            raise ConstructionError(
                "n_channels must be even under half symmetry "
                "(the symmetry plane bisects the channel array)"
            )
        positive = {
            "channel_width": self.channel_width,
            "channel_spacing": self.channel_spacing,
            "channel_length_center": self.channel_length_center,
            "distributor_depth_in": self.distributor_depth_in,
            "distributor_depth_out": self.distributor_depth_out,
            "inlet_width": self.inlet_width,
            "outlet_width": self.outlet_width,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ConstructionError(f"{name} must be strictly positive, got {value}")
        if self.depth_h is not None and not self.depth_h > 0.0:
            raise ConstructionError(f"depth_h must be strictly positive, got {self.depth_h}")
        if not self.channel_spacing > self.channel_width:
            raise ConstructionError(
                "channel_spacing must exceed channel_width "
                f"({self.channel_spacing} <= {self.channel_width})"
            )
        if self.taper < 0.0:
            raise ConstructionError("taper must be non-negative")
        if self.inlet_width > self.n_channels * self.channel_spacing:
            raise ConstructionError("inlet_width exceeds the distributor width")
        if self.outlet_width > self.n_channels * self.channel_spacing:
            raise ConstructionError("outlet_width exceeds the distributor width")
        # The wedge floor must not collapse the domain ends.
        shortest = self.channel_length_center - self.taper * (
            self.n_channels * self.channel_spacing / 2.0
        )
        if not shortest > 0.0:
            raise ConstructionError(
                "taper collapses the floor at the domain ends "
                f"(end height {shortest:.3e} m <= 0); reduce taper"
            )

    def channel_length(self, i: int) -> float:
        """Mean length of channel ``i`` (1-based, full geometry)."""
        center = self.n_channels * self.channel_spacing / 2.0
        ci = (i - 0.5) * self.channel_spacing
        return self.channel_length_center - self.taper * abs(ci - center)
