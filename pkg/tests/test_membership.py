"""
Unit tests for the membership-function grammar.
"""

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from switched_ts_lmi.modules.errors import InvalidMembershipError, MembershipGrammarError
from switched_ts_lmi.modules.membership import (
    MembershipFn, evaluate_family, reference_cycle, tokenize,
)


class TestTokenize:
    def test_state_and_function_tokens(self):
        kinds = [t[0] for t in tokenize("sin(x[1])^2")]
        assert kinds == ["func", "op", "state", "op", "square"]

    def test_scientific_number(self):
        tokens = tokenize("2.5e-3 * x[2]")
        assert tokens[0] == ("number", "2.5e-3", 0)

    def test_rejects_foreign_character(self):
        with pytest.raises(MembershipGrammarError) as exc:
            tokenize("x[1] / 2")
        assert exc.value.position == 5


class TestParseAndEvaluate:
    def test_sin_squared(self):
        fn = MembershipFn.parse("sin(x[1])^2")
        assert fn.evaluate([0.7, 0.0], None) == pytest.approx(math.sin(0.7) ** 2)

    def test_precedence(self):
        fn = MembershipFn.parse("1 - 2 * x[1] + -x[2]")
        assert fn.evaluate([0.25, 0.5], None) == pytest.approx(1 - 0.5 - 0.5)

    def test_parentheses_and_square(self):
        fn = MembershipFn.parse("(x[1] + 1)^2 * 0.5")
        assert fn.evaluate([1.0], None) == pytest.approx(2.0)

    def test_max_state_index_is_zero_based(self):
        assert MembershipFn.parse("cos(x[3]) * x[1]").max_state_index == 2

    def test_constant_has_no_state_reference(self):
        assert MembershipFn.parse("1").max_state_index == -1

    def test_unbalanced_parenthesis(self):
        with pytest.raises(MembershipGrammarError):
            MembershipFn.parse("sin(x[1]")

    def test_trailing_token(self):
        with pytest.raises(MembershipGrammarError):
            MembershipFn.parse("x[1] x[2]")

    def test_zero_state_index_rejected(self):
        with pytest.raises(MembershipGrammarError):
            MembershipFn.parse("x[0]")


class TestFamilies:
    def test_one_minus_sibling(self):
        fns = [MembershipFn.parse("sin(x[1])^2"), MembershipFn.parse("one_minus(1)")]
        h = evaluate_family(fns, [1.1, 0.0])
        assert h.sum() == pytest.approx(1.0)
        assert h[1] == pytest.approx(math.cos(1.1) ** 2)

    def test_references_are_zero_based(self):
        assert MembershipFn.parse("one_minus(2)").references == {1}

    def test_cycle_detected(self):
        fns = [MembershipFn.parse("one_minus(2)"), MembershipFn.parse("one_minus(1)")]
        assert reference_cycle(fns) is not None

    def test_no_cycle(self):
        fns = [MembershipFn.parse("x[1]"), MembershipFn.parse("one_minus(1)")]
        assert reference_cycle(fns) is None

    def test_evaluating_a_cycle_raises(self):
        fns = [MembershipFn.parse("one_minus(2)"), MembershipFn.parse("one_minus(1)")]
        with pytest.raises(InvalidMembershipError, match="cycle"):
            evaluate_family(fns, [0.0, 0.0])
