"""Radiative cooldown of an unpowered body.

The body loses heat only by radiation to a uniform environment::

    m c dT/dt = eps * sigma * A * (T_amb**4 - T**4)

Integrated with fixed-step classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ThermalBody

SIGMA = 5.670374419e-8  # W m^-2 K^-4


@dataclass(frozen=True)
class CoolingCurve:
    times: np.ndarray
    temperatures: np.ndarray
    time_to_limit: float | None  # None when max_time was reached first

    @property
    def reached_limit(self) -> bool:
        return self.time_to_limit is not None


def cooling_rate(body: ThermalBody, temp: float) -> float:
    """dT/dt in K/s at temperature ``temp``."""
    k = body.emissivity * SIGMA * body.area / (body.mass * body.specific_heat)
    return k * (body.t_ambient**4 - temp**4)


def cooldown(body: ThermalBody, step: float = 1.0, max_time: float = 86400.0) -> CoolingCurve:
    if not step > 0.0:
        raise ValueError("step must be positive")
    k = body.emissivity * SIGMA * body.area / (body.mass * body.specific_heat)
    amb4 = body.t_ambient**4

    def f(temp):
        return k * (amb4 - temp**4)

    temp = body.t_initial
    times = [0.0]
    temps = [temp]
    if temp <= body.t_limit:
        return CoolingCurve(np.array(times), np.array(temps), 0.0)

    n_max = int(math.ceil(max_time / step))
    hit = None
    for i in range(n_max):
        k1 = f(temp)
        k2 = f(temp + 0.5 * step * k1)
        k3 = f(temp + 0.5 * step * k2)
        k4 = f(temp + step * k3)
        new = temp + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        t_new = (i + 1) * step
        times.append(t_new)
        temps.append(new)
        if new <= body.t_limit:
            # linear interpolation inside the bracketing step
            hit = t_new - step * (body.t_limit - new) / (temp - new)
            break
        temp = new
    return CoolingCurve(np.array(times), np.array(temps), hit)


def cooldown_closed_form_check(body: ThermalBody) -> float:
    """Analytic cooldown time when the environment is at absolute zero.

    With ``T_amb = 0`` the ODE separates: ``t = m c / (3 eps sigma A) * (T_lim**-3 - T_0**-3)``.
    """
    if body.t_ambient != 0.0:
        raise ValueError("closed form only holds for t_ambient == 0 K")
    return (
        body.mass
        * body.specific_heat
        / (3.0 * body.emissivity * SIGMA * body.area)
        * (body.t_limit**-3 - body.t_initial**-3)
    )


def radiated_energy(body: ThermalBody, curve: CoolingCurve) -> np.ndarray:
    """Trapezoid-integrated radiative heat flow per step, in joules (negative = loss)."""
    power = body.emissivity * SIGMA * body.area * (body.t_ambient**4 - curve.temperatures**4)
    return 0.5 * (power[1:] + power[:-1]) * np.diff(curve.times)
