from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from nph2ph.model.legendre import MAX_ORDER, legendre_all

KINDS = ("constant", "piecewise", "polynomial")
SCALES = ("unit", "original")


@dataclass(frozen=True)
class BetaFunction:
    """Time-varying log hazard ratio beta(t) of group 1 against group 0.

    constant
        beta(t) = beta0
    piecewise
        beta(t) = beta0 * r_j on the j-th segment, with r_0 = 1. Segment j
        starts at changepoint j (inclusive), so beta switches at t = tau.
        Stored as the segment levels beta0 * r_j.
    polynomial
        beta(t) = sum_k c_k dP_k/dt(t), Legendre derivatives on [0, 1].

    Fitted functions live on the unit (transformed) scale. Simulation
    uses the original time scale, where piecewise changepoints are plain
    study times.
    """

    kind: str
    levels: Tuple[float, ...] = (0.0,)
    changepoints: Tuple[float, ...] = ()
    coefficients: Tuple[float, ...] = ()
    scale: str = "unit"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown beta kind '{self.kind}'. Use one of {KINDS}")
        if self.scale not in SCALES:
            raise ValueError(f"Unknown time scale '{self.scale}'")
        tau = np.asarray(self.changepoints, dtype=float)
        if self.kind == "piecewise":
            if tau.size == 0:
                raise ValueError("A piecewise beta needs at least one changepoint")
            if np.any(np.diff(tau) <= 0):
                raise ValueError(f"Changepoints must increase, got {self.changepoints}")
            if self.scale == "unit" and (tau[0] <= 0 or tau[-1] >= 1):
                raise ValueError(
                    f"Unit-scale changepoints must lie in (0, 1), got {self.changepoints}"
                )
            if tau[0] <= 0:
                raise ValueError(f"Changepoints must be positive, got {self.changepoints}")
        if len(self.levels) != tau.size + 1:
            raise ValueError(
                f"{tau.size} changepoints need {tau.size + 1} levels, got {len(self.levels)}"
            )
        if self.kind == "polynomial":
            if not 1 <= len(self.coefficients) <= MAX_ORDER:
                raise ValueError(
                    f"Polynomial beta takes 1 to {MAX_ORDER} coefficients, "
                    f"got {len(self.coefficients)}"
                )
            if self.scale != "unit":
                raise ValueError("Polynomial beta is only defined on the unit scale")
        if not np.all(np.isfinite(self.levels)) or not np.all(
            np.isfinite(self.coefficients)
        ):
            raise ValueError("Beta values must be finite")

    @classmethod
    def constant(cls, beta0: float) -> "BetaFunction":
        return cls("constant", levels=(float(beta0),))

    @classmethod
    def piecewise(
        cls,
        beta0: float,
        changepoints: Sequence[float],
        ratios: Sequence[float],
        scale: str = "unit",
    ) -> "BetaFunction":
        """beta0 before the first changepoint, beta0 * ratios[j] after changepoint j"""
        multipliers = np.concatenate([[1.0], np.asarray(ratios, dtype=float)])
        return cls.from_levels(changepoints, beta0 * multipliers, scale=scale)

    @classmethod
    def from_levels(
        cls,
        changepoints: Sequence[float],
        levels: Sequence[float],
        scale: str = "unit",
    ) -> "BetaFunction":
        levels = tuple(float(x) for x in levels)
        changepoints = tuple(float(x) for x in changepoints)
        if len(changepoints) == 0:
            return cls("constant", levels=levels[:1], scale=scale)
        return cls("piecewise", levels=levels, changepoints=changepoints, scale=scale)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "BetaFunction":
        return cls(
            "polynomial",
            levels=(0.0,),
            coefficients=tuple(float(c) for c in coefficients),
        )

    @property
    def beta0(self) -> Optional[float]:
        """Level before the first changepoint; None for polynomials"""
        if self.kind == "polynomial":
            return None
        return self.levels[0]

    @property
    def ratios(self) -> Tuple[float, ...]:
        """Segment multipliers r_1.. relative to the first segment"""
        if self.kind != "piecewise":
            return ()
        if self.levels[0] == 0:
            return tuple(np.nan for _ in self.levels[1:])
        return tuple(level / self.levels[0] for level in self.levels[1:])

    @property
    def is_constant(self) -> bool:
        if self.kind == "polynomial":
            return len(self.coefficients) == 1
        return len(set(self.levels)) == 1

    def segment(self, t):
        """Index of the piecewise segment holding t"""
        return np.searchsorted(np.asarray(self.changepoints), t, side="right")

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "polynomial":
            order = len(self.coefficients)
            _, dp, _ = legendre_all(order, t_arr)
            coef = np.asarray(self.coefficients).reshape((-1,) + (1,) * t_arr.ndim)
            out = np.sum(coef * dp[1:], axis=0)
        else:
            out = np.asarray(self.levels)[self.segment(t_arr)]
        return float(out) if np.ndim(t) == 0 else out

    def scaled(self, factor: float) -> "BetaFunction":
        """The same shape multiplied by `factor`"""
        if self.kind == "polynomial":
            return BetaFunction.polynomial(np.asarray(self.coefficients) * factor)
        return BetaFunction(
            self.kind,
            levels=tuple(float(x) * factor for x in self.levels),
            changepoints=self.changepoints,
            scale=self.scale,
        )

    def describe(self) -> str:
        """Readable form, e.g. '-2.08 x (I{t<0.46} - 0.024 x I{t>=0.46})'"""
        if self.kind == "constant":
            return f"{self.levels[0]:.4g}"
        if self.kind == "polynomial":
            terms = []
            for k, c in enumerate(self.coefficients, start=1):
                sign = "-" if c < 0 else "+"
                terms.append(f"{sign} {abs(c):.3g} dP{k}(t)")
            text = " ".join(terms)
            return text[2:] if text.startswith("+ ") else "-" + text[2:]
        tau = (0.0,) + self.changepoints + (np.inf,)
        ratios = (1.0,) + self.ratios
        parts = []
        for j, r in enumerate(ratios):
            lower, upper = tau[j], tau[j + 1]
            if j == 0:
                cond = f"I{{t<{upper:.3g}}}"
            elif np.isinf(upper):
                cond = f"I{{t>={lower:.3g}}}"
            else:
                cond = f"I{{{lower:.3g}<=t<{upper:.3g}}}"
            if j == 0:
                parts.append(cond)
            else:
                sign = "-" if r < 0 else "+"
                parts.append(f"{sign} {abs(r):.3g} x {cond}")
        return f"{self.levels[0]:.3g} x ({' '.join(parts)})"

    def on_grid(self, points: int = 512) -> pd.DataFrame:
        """beta(t) on an evenly spaced grid of [0, 1]"""
        t = np.linspace(0.0, 1.0, points)
        return pd.DataFrame({"t": t, "beta": self(t)})

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "scale": self.scale,
            "beta0": self.beta0,
            "changepoints": list(self.changepoints),
            "ratios": list(self.ratios),
            "levels": list(self.levels) if self.kind != "polynomial" else [],
            "coefficients": list(self.coefficients),
            "form": self.describe(),
        }


def beta_values(beta, t) -> np.ndarray:
    """Evaluates a BetaFunction, or broadcasts a plain number, at t"""
    if isinstance(beta, BetaFunction):
        return np.asarray(beta(t), dtype=float)
    if callable(beta):
        return np.asarray(beta(np.asarray(t, dtype=float)), dtype=float) * np.ones(
            np.shape(t)
        )
    return np.full(np.shape(t), float(beta))
