import pytest
from hypothesis import given
from hypothesis import strategies as st

from thzicl.prompts import (
    AmbiguousReply,
    ImagePart,
    Label,
    MissingDemonstration,
    MissingPlaceholder,
    Role,
    ShotFormat,
    TextPart,
    UnparseableReply,
    assemble,
    build_demonstration,
    build_query,
    load_templates,
    parse_classification,
)

PNG_A = b"\x89PNG-fake-a"
PNG_B = b"\x89PNG-fake-b"


@pytest.fixture(scope="module")
def templates():
    return load_templates()


class TestLoadTemplates:
    def test_embedded_goal_text(self, templates):
        assert "Identify the presence of C4 explosive" in templates.task_instruction
        assert "<BEGIN Return Format Each Image>" in templates.task_instruction
        assert "<END Return Format Each Image>" in templates.task_instruction

    def test_override_missing_placeholder(self, tmp_path):
        (tmp_path / "2_frame_prompt.txt").write_text("no placeholder here")
        with pytest.raises(MissingPlaceholder):
            load_templates(tmp_path)

    def test_partial_override_keeps_defaults(self, tmp_path, templates):
        (tmp_path / "40_in_context_learning_prompt.txt").write_text("custom demo")
        loaded = load_templates(tmp_path)
        assert loaded.demo_template == "custom demo"
        assert loaded.task_instruction == templates.task_instruction
        assert loaded.query_template == templates.query_template

    def test_round_trip_produces_identical_bundles(self, tmp_path, templates):
        for name, text in (
            ("1_system_prompt.txt", templates.task_instruction),
            ("2_frame_prompt.txt", templates.query_template),
            ("40_in_context_learning_prompt.txt", templates.demo_template),
        ):
            (tmp_path / name).write_text(text, encoding="utf-8")
        reloaded = load_templates(tmp_path)
        a = assemble(ShotFormat.ONE_SHOT, templates, 611, PNG_A, PNG_B)
        b = assemble(ShotFormat.ONE_SHOT, reloaded, 611, PNG_A, PNG_B)
        assert a == b


class TestBuildQuery:
    def test_frame_611(self, templates):
        msg = build_query(templates, 611, PNG_A)
        assert "Image Nr. 0611" in msg.parts[0].text

    def test_frame_0(self, templates):
        msg = build_query(templates, 0, PNG_A)
        assert "Image Nr. 0000" in msg.parts[0].text

    def test_part_order(self, templates):
        msg = build_query(templates, 5, PNG_A)
        assert isinstance(msg.parts[0], TextPart)
        assert isinstance(msg.parts[1], ImagePart)
        assert msg.role == Role.USER


class TestBuildDemonstration:
    def test_exact_text(self, templates):
        msg = build_demonstration(templates, PNG_B)
        assert (
            msg.parts[0].text.strip()
            == 'Use this Image as a reference for Classifying. It has the Class "YES C4"'
        )

    def test_part_order_and_bytes(self, templates):
        msg = build_demonstration(templates, PNG_B)
        assert isinstance(msg.parts[0], TextPart)
        assert msg.parts[1].png == PNG_B


class TestAssemble:
    def test_zero_shot_shape(self, templates):
        bundle = assemble(ShotFormat.ZERO_SHOT, templates, 3, PNG_A)
        assert len(bundle.messages) == 2
        assert bundle.image_count() == 1

    def test_one_shot_shape(self, templates):
        bundle = assemble(ShotFormat.ONE_SHOT, templates, 3, PNG_A, PNG_B)
        assert len(bundle.messages) == 3
        assert bundle.image_count() == 2
        images = [
            p.png for m in bundle.messages for p in m.parts if isinstance(p, ImagePart)
        ]
        assert images == [PNG_B, PNG_A]  # demonstration strictly before query

    def test_missing_demonstration(self, templates):
        with pytest.raises(MissingDemonstration):
            assemble(ShotFormat.ONE_SHOT, templates, 3, PNG_A)

    def test_system_role_default_and_downgrade(self, templates):
        bundle = assemble(ShotFormat.ZERO_SHOT, templates, 3, PNG_A)
        assert bundle.messages[0].role == Role.SYSTEM
        bundle = assemble(ShotFormat.ZERO_SHOT, templates, 3, PNG_A, system_as_user=True)
        assert bundle.messages[0].role == Role.USER

    @given(frame=st.integers(0, 9999), one_shot=st.booleans())
    def test_invariants(self, frame, one_shot):
        templates = load_templates()
        shot = ShotFormat.ONE_SHOT if one_shot else ShotFormat.ZERO_SHOT
        bundle = assemble(shot, templates, frame, PNG_A, PNG_B if one_shot else None)
        assert bundle.image_count() == (2 if one_shot else 1)
        for msg in bundle.messages:
            seen_text = False
            for part in msg.parts:
                if isinstance(part, TextPart):
                    seen_text = True
                if isinstance(part, ImagePart):
                    assert seen_text  # every image is introduced by earlier text


class TestParseClassification:
    def test_structured_yes(self):
        parsed = parse_classification(
            "### Frame Number: 0611\n### Description: blob\n### Classification: Yes C4\n"
        )
        assert parsed.label == Label.YES_C4
        assert parsed.source == "STRUCTURED"

    def test_structured_no(self):
        parsed = parse_classification("Classification: No C4")
        assert parsed.label == Label.NO_C4
        assert parsed.source == "STRUCTURED"

    def test_fallback_case_insensitive(self):
        parsed = parse_classification("i think there is no c4 here")
        assert parsed.label == Label.NO_C4
        assert parsed.source == "FALLBACK"

    def test_empty_reply(self):
        with pytest.raises(UnparseableReply):
            parse_classification("")

    def test_ambiguous_structured_line(self):
        with pytest.raises(AmbiguousReply):
            parse_classification("### Classification: Yes C4 or No C4, unclear")

    def test_fallback_earliest_occurrence(self):
        parsed = parse_classification("maybe Yes C4, though earlier I said no c4... wait")
        assert parsed.label == Label.YES_C4

    def test_matched_span_is_substring(self):
        raw = "### Classification: YES C4"
        parsed = parse_classification(raw)
        assert parsed.matched_span in raw

    def test_structured_preferred_over_fallback(self):
        raw = "the demo shows Yes C4.\n### Classification: No C4\n"
        parsed = parse_classification(raw)
        assert parsed.label == Label.NO_C4
        assert parsed.source == "STRUCTURED"

    @given(text=st.text(max_size=200))
    def test_never_crosses_labels(self, text):
        try:
            parsed = parse_classification(text)
        except (UnparseableReply, AmbiguousReply):
            return
        lowered = text.lower()
        if parsed.label == Label.YES_C4:
            assert "yes" in lowered
        else:
            assert "no" in lowered
