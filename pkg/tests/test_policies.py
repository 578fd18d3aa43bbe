import pytest

from ehrx.channel import SlotRealization
from ehrx.controller import EnergyConfig
from ehrx.policies import PolicyKind, always_harvest_decide, genie_decide, greedy_decide

CFG = EnergyConfig(gamma_max=50.0, decode_cost_c=1.0, decode_cost_offset=0.5)
SUCCESS = SlotRealization((3,), (1.0,), 1.0, True)
COLLISION = SlotRealization((1, 4), (0.5, 0.5), 1.0, False)


def test_genie():
    assert genie_decide(1e6, COLLISION, CFG) == 0
    assert genie_decide(0.0, SUCCESS, CFG) == 0
    assert genie_decide(1e6, SUCCESS, CFG) == 1
    # cost at gamma = 1 is 1.5 + 0.02
    assert genie_decide(1.52, SUCCESS, CFG) == 1
    assert genie_decide(1.51, SUCCESS, CFG) == 0


def test_greedy():
    assert greedy_decide(1e6, 0.0, CFG) == 0
    assert greedy_decide(1.0, 1.0, CFG) == 0
    assert greedy_decide(2.0, 1.0, CFG) == 1


def test_always_harvest():
    assert always_harvest_decide(1e9, SUCCESS, CFG) == 0
    assert always_harvest_decide() == 0


@pytest.mark.parametrize("text, kind", [("lyapunov", PolicyKind.LYAPUNOV), ("always-harvest", PolicyKind.ALWAYS_HARVEST),
                                        ("GENIE", PolicyKind.GENIE), (PolicyKind.GREEDY, PolicyKind.GREEDY)])
def test_parse(text, kind):
    assert PolicyKind.parse(text) is kind


def test_parse_unknown():
    with pytest.raises(ValueError):
        PolicyKind.parse("oracle")
