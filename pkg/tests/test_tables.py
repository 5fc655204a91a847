from __future__ import annotations

from fractions import Fraction

import pytest

from lpirsi.core import RetrievalRequest, SchemeParams
from lpirsi.tables import (
    check_fixture,
    find_fixture,
    group_probabilities,
    load_fixtures,
    render_table,
    support_table,
    symbolic_answer,
)


def test_fixture_inventory():
    fixtures = {fx.name: fx for fx in load_fixtures()}
    assert sorted(fixtures) == ["I", "II", "III", "IV"]
    assert [len(fixtures[n].rows) for n in ("I", "II", "III")] == [10, 14, 10]
    assert not fixtures["IV"].complete


@pytest.mark.parametrize("t", [Fraction(1), Fraction(3, 4)], ids=str)
def test_all_fixtures_match(t):
    for fx in load_fixtures(t):
        result = check_fixture(fx)
        assert result.ok, (fx.name, result.missing, result.extra, result.group_sizes)


def test_ws_support_shrinks_at_r_one():
    # with r = 1 the non-inference side weight is forced to 0 on level 1
    fx = next(f for f in load_fixtures(Fraction(1, 2)) if f.name == "II")
    result = check_fixture(fx)
    assert result.group_sizes == {0: 2, 1: 4}
    assert all(row[2] != "0" for row in result.missing)


def test_elided_fixture_checked_as_subset():
    fx = find_fixture(SchemeParams(3, 4, 1, variant="ws"))
    assert fx.name == "IV"
    result = check_fixture(fx)
    assert result.group_sizes == {0: 2, 1: 24, 2: 36}
    assert len(fx.rows) < sum(result.group_sizes.values())
    assert result.ok


def test_find_fixture_unknown():
    assert find_fixture(SchemeParams(4, 4, 1)) is None


def test_table_three_group_totals():
    t = Fraction(1, 2)
    rows = support_table(SchemeParams(3, 4, 1, t), RetrievalRequest(1, (2,)), (0, 1, 2))
    P0 = 1 / (1 + 2 * t)
    assert group_probabilities(rows) == {0: P0 / 6, 1: (1 - P0) / 6}


def test_ws_table_rows_follow_conditionals():
    """Rows at level 1 are not equiprobable: the side weight follows its conditional law."""
    params = SchemeParams(3, 3, 1, variant="ws")
    rows = support_table(params, RetrievalRequest(1, (2,)), (0, 1, 2))
    assert len(rows) == 14
    probs = {r.prob for r in rows if r.level == 1}
    assert len(probs) > 1
    assert sum(r.prob for r in rows) == Fraction(1, 6)


def test_symbolic_answer_and_render():
    assert symbolic_answer((0, 0, 0)) == "(empty)"
    assert symbolic_answer((1, 0, 2)) == "X1[1]+X3[2]"
    params = SchemeParams(3, 3, 1)
    text = render_table(params, support_table(params, RetrievalRequest(1, (2,)), (0, 1, 2)))
    lines = text.splitlines()
    assert lines[0].split() == ["f_U", "f_S0", "f_S1", "q1", "a1", "q2", "a2", "q3", "a3", "level", "prob"]
    assert "level 0: total 1/12 = (1/6) * 1/2" in text
    assert "(empty)" in text
