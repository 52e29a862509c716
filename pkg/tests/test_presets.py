import numpy as np
import pytest

from dualloop.errors import ValidationError
from dualloop.gaussian import LossModel, simulate
from dualloop.linops import symplectic_from_unitary
from dualloop.loopcompiler import timeline_to_unitary
from dualloop.metrics import INSEPARABILITY_PAIRS, combo, combo_variance, inseparability
from dualloop.presets import (ACTIVE_INTERACTIONS, NULLIFIERS, PRESET_NAMES, PRESET_SETTINGS,
                              TARGETS, preset_timeline)

ENTANGLED = [n for n in PRESET_NAMES if n != "op1"]


def test_nine_presets():
    assert len(PRESET_NAMES) == 9
    assert set(PRESET_SETTINGS) == set(NULLIFIERS) == set(TARGETS) == set(PRESET_NAMES)
    assert set(INSEPARABILITY_PAIRS) == set(ENTANGLED)


def test_unknown_preset():
    with pytest.raises(ValidationError):
        preset_timeline("op5")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_inactive_interactions_only_route(name):
    settings, _ = PRESET_SETTINGS[name]
    for i, (T, theta) in enumerate(settings):
        if i not in ACTIVE_INTERACTIONS[name]:
            assert (T, theta) == (1.0, 0.0)
        else:
            assert 0.0 < T < 1.0


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_nullifiers_have_no_antisqueezed_part(name):
    U, _ = timeline_to_unitary(preset_timeline(name)[0])
    S = symplectic_from_unitary(U)
    for expr in NULLIFIERS[name]:
        assert np.max(np.abs((S.T @ combo(expr, 3).vector)[0::2])) < 1e-10


@pytest.mark.parametrize("name", ENTANGLED)
def test_lossless_limit(name):
    G = simulate(preset_timeline(name)[0], lm=LossModel.lossless(20.0))
    assert all(e.value < 0.1 for e in inseparability(G, name).entries)
    G0 = simulate(preset_timeline(name)[0], lm=LossModel.lossless(0.0))
    assert np.allclose(G0, np.eye(6), atol=1e-12)


@pytest.mark.parametrize("name", ENTANGLED)
def test_default_losses_stay_below_threshold(name):
    rep = inseparability(simulate(preset_timeline(name)[0]), name)
    assert rep.passes


def test_ghz_uses_one_third_then_half():
    settings, _ = PRESET_SETTINGS["op3i"]
    assert settings[0][0] == pytest.approx(1 / 3) and settings[1][0] == pytest.approx(0.5)


def test_op1_outputs_are_independent_p_squeezed():
    G = simulate(preset_timeline("op1")[0], lm=LossModel.lossless(7.4))
    assert np.allclose(G, np.diag([10 ** 0.74, 10 ** -0.74] * 3))
    assert all(combo_variance(G, combo(e, 3)) < 1 for e in NULLIFIERS["op1"])
