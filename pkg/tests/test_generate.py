from __future__ import annotations

import json

import numpy as np
import pytest

from algen.corpus import Instance, Pool, Taxonomy
from algen.generate import (
    GenerationError,
    LlmConfig,
    Template,
    TemplateError,
    call_llm,
    default_template,
    filter_variations,
    generate_variations,
    mock_response,
    parse_variations,
    render,
)
from algen.testing import MockChatServer

from conftest import make_labeled

TAX = Taxonomy(["Self-Harm", "Medical-Advice", "Legal-Advice", "Financial-Advice", "Emergency-Situation", "Not-Harmful"])


class TestTemplate:
    def test_default_template_loads_with_all_placeholders(self):
        template = default_template()
        assert template.k == 5
        for placeholder in ("{text}", "{label}", "{k}"):
            assert template.user_text.count(placeholder) == 1

    def test_missing_placeholder_fails_at_load_time(self):
        with pytest.raises(TemplateError, match=r"\{label\}"):
            Template(name="bad", system_text="s", user_text="only {text} and {k}")

    def test_duplicated_placeholder_rejected(self):
        with pytest.raises(TemplateError):
            Template(name="bad", system_text="s", user_text="{text} {label} {k} {k}")

    def test_file_round_trip(self, tmp_path):
        template = default_template()
        path = tmp_path / "template.json"
        path.write_text(json.dumps(template.to_dict()))
        assert Template.load(path) == template


class TestRender:
    def test_substitutes_all_three_values(self):
        template = default_template()
        inst = Instance(id="x", text="Feeling depressed again")
        prompt = render(template, inst, "Self-Harm")
        assert "Feeling depressed again" in prompt.user
        assert "Self-Harm" in prompt.user
        assert "5" in prompt.user
        assert prompt.system == template.system_text

    def test_k1_renders_one_element_request(self):
        template = Template(name="t", system_text="s", user_text="give {k} takes on {text} as {label}", k=1)
        prompt = render(template, Instance(id="x", text="hello"), "Not-Harmful")
        assert "give 1 takes" in prompt.user

    def test_single_pass_substitution(self):
        # Text containing a literal "{label}" must not be re-substituted.
        template = Template(name="t", system_text="s", user_text="T={text} L={label} K={k}")
        prompt = render(template, Instance(id="x", text="payload with {label} inside"), "Legal-Advice")
        assert "payload with {label} inside" in prompt.user
        assert prompt.user.count("Legal-Advice") == 1


class TestCallLlm:
    def test_mock_mode_returns_k_deterministic_variations(self):
        cfg = LlmConfig(mock=True)
        template = default_template()
        prompt = render(template, Instance(id="x", text="status check"), "Not-Harmful")
        response = call_llm(cfg, prompt)
        items = json.loads(response)
        assert items == [f"variation {i}: status check" for i in range(1, 6)]
        assert call_llm(cfg, prompt) == response

    def test_retry_then_success(self):
        with MockChatServer(default_response='["ok"]') as server:
            server.fail_next = [429]
            cfg = LlmConfig(endpoint=server.url, max_retries=1, backoff_base=0.01)
            prompt = render(default_template(), Instance(id="x", text="t"), "Not-Harmful")
            assert call_llm(cfg, prompt) == '["ok"]'
            assert len(server.requests) == 2

    def test_persistent_500_exhausts_after_three_attempts(self):
        with MockChatServer() as server:
            server.fail_next = [500, 500, 500, 500]
            cfg = LlmConfig(endpoint=server.url, max_retries=2, backoff_base=0.01)
            prompt = render(default_template(), Instance(id="x", text="t"), "Not-Harmful")
            with pytest.raises(GenerationError):
                call_llm(cfg, prompt)
            assert len(server.requests) == 3

    def test_payload_carries_model_temperature_messages(self):
        with MockChatServer(default_response='["ok"]') as server:
            cfg = LlmConfig(endpoint=server.url, model="test-model", temperature=0.3, backoff_base=0.01)
            prompt = render(default_template(), Instance(id="x", text="hello"), "Not-Harmful")
            call_llm(cfg, prompt)
            request = server.requests[0]
        assert request["model"] == "test-model"
        assert request["temperature"] == 0.3
        assert [m["role"] for m in request["messages"]] == ["system", "user"]
        assert "hello" in request["messages"][1]["content"]


class TestParseVariations:
    def test_strict_json_array(self):
        assert parse_variations('["a","b","c"]', 3) == ["a", "b", "c"]

    def test_json_array_embedded_in_prose(self):
        response = 'Sure! Here you go:\n["first", "second"]\nHope that helps.'
        assert parse_variations(response, 5) == ["first", "second"]

    def test_enumerated_fallback_with_deficit(self):
        assert parse_variations("1. a\n2. b", 5) == ["a", "b"]

    def test_dash_bullets_fallback(self):
        assert parse_variations("- one\n- two\n- three", 2) == ["one", "two"]

    def test_excess_truncated_preserving_order(self):
        assert parse_variations('["a","b","c","d"]', 2) == ["a", "b"]

    def test_refusal_is_unparseable(self):
        with pytest.raises(GenerationError, match="unparseable"):
            parse_variations("I cannot help with that.", 5)

    def test_non_string_array_falls_through(self):
        with pytest.raises(GenerationError):
            parse_variations("[1, 2, 3]", 3)


class FixedLearner:
    """Predicts a constant distribution; carries a taxonomy like real learners."""

    def __init__(self, row, taxonomy=TAX):
        self.row = row
        self.taxonomy = taxonomy

    def predict_proba_texts(self, texts):
        return np.array([self.row] * len(texts))


class TestFilterVariations:
    def parent(self):
        return Instance(id="p", text="original text")

    def test_dedup_among_candidates(self):
        kept = filter_variations(["x", "x", "y"], self.parent(), "Self-Harm", Pool("L"))
        assert [v.text for v in kept] == ["x", "y"]

    def test_candidate_equal_to_parent_dropped(self):
        kept = filter_variations(["ORIGINAL   text", "novel"], self.parent(), "Self-Harm", Pool("L"))
        assert [v.text for v in kept] == ["novel"]

    def test_candidate_already_in_l_dropped(self):
        l = make_labeled([("existing entry", "Self-Harm")])
        kept = filter_variations(["Existing  ENTRY", "fresh"], self.parent(), "Self-Harm", l)
        assert [v.text for v in kept] == ["fresh"]

    def test_inherit_mode_sets_label_and_relation(self):
        kept = filter_variations(["a", "b"], self.parent(), "Medical-Advice", Pool("L"))
        assert all(v.label == "Medical-Advice" and v.relation_ok for v in kept)
        assert all(v.parent_id == "p" for v in kept)

    def test_empty_strings_dropped(self):
        kept = filter_variations(["", "  ", "real"], self.parent(), "Self-Harm", Pool("L"))
        assert [v.text for v in kept] == ["real"]

    def test_learner_consistent_vetoes_confident_disagreement(self):
        # Learner is 95% sure of Not-Harmful; candidates labeled Self-Harm get vetoed.
        learner = FixedLearner([0.01, 0.01, 0.01, 0.01, 0.01, 0.95])
        kept = filter_variations(
            ["a", "b"], self.parent(), "Self-Harm", Pool("L"), mode="learner_consistent", learner=learner
        )
        assert kept == []

    def test_learner_consistent_keeps_unconfident_disagreement(self):
        learner = FixedLearner([0.3, 0.1, 0.1, 0.1, 0.1, 0.3])
        kept = filter_variations(
            ["a", "b"], self.parent(), "Self-Harm", Pool("L"), mode="learner_consistent", learner=learner
        )
        assert len(kept) == 2

    def test_learner_consistent_requires_learner(self):
        with pytest.raises(GenerationError):
            filter_variations(["a"], self.parent(), "Self-Harm", Pool("L"), mode="learner_consistent")


class TestGenerateVariations:
    def test_mock_round_trip_yields_exactly_k(self):
        cfg = LlmConfig(mock=True)
        template = default_template()
        parent = Instance(id="p1", text="where can I find help", label="Self-Harm", origin="human")
        variations = generate_variations(cfg, template, parent, "Self-Harm", Pool("L"))
        assert len(variations) == template.k
        assert all(v.label == "Self-Harm" for v in variations)
