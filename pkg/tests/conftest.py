from dataclasses import replace

import pytest

from sagnacfwm.scenario import resolve_scenario


@pytest.fixture(scope="session")
def base():
    """Experiment configuration of the packaged operating-point scenario."""
    return resolve_scenario("operating_point").experiment


def at_power(cfg, power_mw, copol=None, **kw):
    scat = cfg.scatter if copol is None else replace(cfg.scatter, copol_selection=copol)
    return replace(cfg, pump=replace(cfg.pump, avg_power_mw=power_mw), scatter=scat, **kw)
