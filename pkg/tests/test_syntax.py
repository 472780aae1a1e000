"""Lexer, parser, and canonical formatter."""

import glob
from pathlib import Path

import pytest
from conftest import FIXTURES, parse_text

from sbc import syntax
from sbc.model import Gesture, Literal, OperationUse, ParamRef, WidgetKind

ALL_FIXTURES = sorted(glob.glob(str(FIXTURES / "**" / "*.sbd"), recursive=True))


class TestParse:
    def test_messenger_screens(self):
        out = syntax.parse((FIXTURES / "messenger.sbd").read_text(), "messenger.sbd")
        assert out.ok
        assert [s.name for s in out.model.screens] == ["Messenger", "Contacts", "MsgStatus", "SaveStatus"]

    def test_empty_screen(self):
        m = parse_text('app "a" screen S { }')
        assert m.start == "S"
        assert m.screens[0].widgets == ()

    def test_unknown_widget_kind(self):
        out = syntax.parse('app "a" screen S { Foo x = "v" }', "t")
        assert not out.ok
        assert any("Foo" in d.message for d in out.diagnostics)

    def test_failure_never_yields_model(self):
        out = syntax.parse('app "a" screen S { Button }', "t")
        assert out.model is None and out.diagnostics

    def test_recovers_to_report_multiple_errors(self):
        out = syntax.parse(
            'app "a"\nscreen S { Button B = =\nTextView T = =\nButton C = "b" }', "t"
        )
        assert not out.ok
        assert len(out.diagnostics) >= 2

    def test_spans_point_into_input(self):
        text = 'app "a" screen S { Foo x = "v" }'
        out = syntax.parse(text, "t")
        d = out.diagnostics[0]
        assert d.span.line == 1
        assert 1 <= d.span.column <= len(text)

    def test_uri_params_extracted(self):
        m = parse_text('app "a" screen S uri "app://contacts/{y}" { }')
        assert m.screens[0].uris[0].base == "app://contacts"
        assert m.screens[0].uris[0].params == ("y",)
        assert m.screens[0].all_params == ("y",)

    def test_gesture_kinds(self):
        m = parse_text(
            'app "a" screen S { Button B = "b"\n'
            "transition t1 order 1 dest S cond B.swipe\n"
            "transition t2 order 2 dest S cond B.drag }"
        )
        actions = [t.user_action[1] for t in m.screens[0].transitions]
        assert actions == [Gesture.SWIPE, Gesture.DRAG]

    def test_string_escapes(self):
        m = parse_text(r'app "a" screen S { TextView T = "say \"hi\" \\ there" }')
        assert m.screens[0].widgets[0].value == Literal('say "hi" \\ there')

    def test_comments_ignored(self):
        m = parse_text('app "a" # trailing\n# whole line\nscreen S { }')
        assert m.app_id == "a"

    def test_trusted_patterns_alias(self):
        m = parse_text('app "a" screen S { WebView w = "u" [trusted-patterns={"p"}] }')
        assert m.screens[0].widgets[0].attr("trust-patterns") == ("p",)

    def test_widget_attrs_lifted_off_opcall_value(self):
        m = parse_text('app "a" screen S { WebView w = f() use HTTPS.get [allowJS=true, trust-patterns={"p"}] }')
        w = m.screens[0].widgets[0]
        assert w.attr("trust-patterns") == ("p",)
        assert isinstance(w.value, OperationUse) and w.value.attributes == ()

    def test_safe_arg_and_binding(self):
        m = parse_text(
            'app "a" screen S { Button B = "b"\n'
            "transition t order 1 dest T cond B.click and f(safe B) { param x = safe B } }\n"
            "screen T { param x }"
        )
        t = m.screens[0].transitions[0]
        assert t.guard.op.args[0].safe
        assert t.bindings[0].safe

    def test_boolean_precedence_left_assoc(self):
        m = parse_text(
            'app "a" screen S { Button B = "b"\n'
            "transition t order 1 dest S cond B.click and not f() and g() or h() }"
        )
        g = m.screens[0].transitions[0].guard
        # ((not f) and g) or h
        assert type(g).__name__ == "BOr"
        assert type(g.left).__name__ == "BAnd"
        assert type(g.left.left).__name__ == "BNot"

    def test_name_resolution_param_vs_widget(self):
        m = parse_text('app "a" screen S { param p\nTextView T = p\nTextView U = f(T) }')
        s = m.screens[0]
        assert isinstance(s.widgets[0].value, ParamRef)
        assert type(s.widgets[1].value.args[0].value).__name__ == "WidgetRef"


class TestFormat:
    @pytest.mark.parametrize("path", ALL_FIXTURES, ids=lambda p: Path(p).stem)
    def test_round_trip_fixed_point(self, path):
        m = syntax.parse(Path(path).read_text(), path).model
        once = syntax.format_model(m)
        again = syntax.parse(once, path)
        assert again.ok
        assert again.model == m  # structural equality
        assert syntax.format_model(again.model) == once  # fixed point

    def test_empty_screen_layout(self):
        text = syntax.format_model(parse_text('app "a" screen S { }'))
        assert "screen S {\n}" in text

    def test_deterministic(self, messenger):
        assert syntax.format_model(messenger) == syntax.format_model(messenger)

    def test_start_marker_preserved_when_not_first(self):
        m = parse_text('app "a" screen S { } start screen T { }')
        assert "start screen T" in syntax.format_model(m)
