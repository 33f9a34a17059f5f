"""Pipeline rule checking: warnings in manual mode, repairs in AutoML mode."""
import re

import pytest

from autonilm.pipeline import (
    Diagnostic,
    PipelineDescription,
    diagnostics_to_json,
    load_pipeline,
    pipeline_from_json,
    pipeline_to_json,
    validate_pipeline,
)
from autonilm.searchspace import Configuration, ParamSpec, SearchSpace


def _fcnn_config(**overrides):
    base = {"optimizer": "Adam", "learning_rate": 1e-3, "loss": "MSE",
            "n_layers": 5, "dropout": 0.3, "sequence_length": 128}
    base.update(overrides)
    return Configuration("FCNN", base)


def _fcnn_pipeline(steps, automl):
    config = _fcnn_config()
    return PipelineDescription(method="FCNN", config=config, steps=steps, automl_mode=automl)


def _wide_space():
    """User-widened domains so value rules can actually fire."""
    branches = {
        "DT": (ParamSpec("criterion", "cat", ("MSE", "MAE")),
               ParamSpec("min_sample_split", "int", lo=1, hi=200)),
        "FCNN": (ParamSpec("optimizer", "cat", ("Adam",)),
                 ParamSpec("learning_rate", "set", (1e-2, 5e-3)),
                 ParamSpec("loss", "cat", ("MSE",)),
                 ParamSpec("n_layers", "int", lo=1, hi=8),
                 ParamSpec("dropout", "float", lo=0.0, hi=1.0),
                 ParamSpec("sequence_length", "set", (64,))),
    }
    return SearchSpace(ParamSpec("method", "cat", tuple(branches)), branches)


# ---------------------------------------------------------------- structural rules


def test_missing_standardize_fixed_in_automl_mode():
    p = _fcnn_pipeline(["window"], automl=True)
    revised, diagnostics = validate_pipeline(p)
    assert revised.steps == ["standardize", "window"]
    (diag,) = diagnostics
    assert (diag.rule_id, diag.severity) == ("R1", "auto-fixed")
    assert diag.applied_change == "inserted standardize at index 0"


def test_missing_standardize_warns_in_manual_mode():
    p = _fcnn_pipeline(["window"], automl=False)
    revised, diagnostics = validate_pipeline(p)
    assert revised is p  # untouched, not a copy
    assert revised.steps == ["window"]
    (diag,) = diagnostics
    assert (diag.rule_id, diag.severity) == ("R1", "warning")
    assert diag.applied_change is None


def test_standardize_after_window_is_still_a_violation():
    p = _fcnn_pipeline(["window", "standardize"], automl=False)
    _, diagnostics = validate_pipeline(p)
    assert [d.rule_id for d in diagnostics] == ["R1"]


def test_missing_window_and_standardize_both_inserted():
    p = _fcnn_pipeline(["resample"], automl=True)
    revised, diagnostics = validate_pipeline(p)
    assert revised.steps == ["resample", "standardize", "window"]
    assert [(d.rule_id, d.severity) for d in diagnostics] == [
        ("R1", "auto-fixed"), ("R3", "auto-fixed")]
    assert diagnostics[0].applied_change == "inserted standardize at index 1"
    assert diagnostics[1].applied_change == "inserted window at index 2"


def test_applied_changes_revert_to_original():
    for steps in ([], ["resample"], ["window"], ["resample", "window"]):
        p = _fcnn_pipeline(list(steps), automl=True)
        revised, diagnostics = validate_pipeline(p)
        reverted = list(revised.steps)
        inserted = sorted(
            (int(m.group(1)) for d in diagnostics if d.applied_change
             for m in [re.fullmatch(r"inserted \w+ at index (\d+)", d.applied_change)]),
            reverse=True)
        for idx in inserted:
            del reverted[idx]
        assert reverted == steps, steps


def test_compliant_nn_pipeline_passes():
    p = _fcnn_pipeline(["standardize", "window"], automl=True)
    revised, diagnostics = validate_pipeline(p)
    assert revised is p
    assert diagnostics == []


def test_dt_pipeline_needs_no_steps():
    config = Configuration("DT", {"criterion": "MSE", "min_sample_split": 2})
    p = PipelineDescription(method="DT", config=config, steps=[], automl_mode=False)
    revised, diagnostics = validate_pipeline(p)
    assert revised is p
    assert diagnostics == []


def test_automl_fix_is_idempotent():
    p = _fcnn_pipeline([], automl=True)
    revised, diagnostics = validate_pipeline(p)
    assert len(diagnostics) == 2
    again, second = validate_pipeline(revised)
    assert again is revised
    assert second == []


# ---------------------------------------------------------------- value rules


def test_value_rules_error_in_automl_mode():
    space = _wide_space()
    config = Configuration("FCNN", {"optimizer": "Adam", "learning_rate": 5e-3, "loss": "MSE",
                                    "n_layers": 5, "dropout": 0.05, "sequence_length": 64})
    p = PipelineDescription(method="FCNN", config=config,
                            steps=["standardize", "window"], automl_mode=True)
    revised, diagnostics = validate_pipeline(p, space=space)
    assert revised is p  # value violations are never auto-fixed
    assert [(d.rule_id, d.severity) for d in diagnostics] == [
        ("R2", "error"), ("R5", "error")]


def test_value_rules_warn_in_manual_mode():
    space = _wide_space()
    config = Configuration("DT", {"criterion": "MSE", "min_sample_split": 1})
    p = PipelineDescription(method="DT", config=config, steps=[], automl_mode=False)
    revised, diagnostics = validate_pipeline(p, space=space)
    assert revised is p
    assert [(d.rule_id, d.severity) for d in diagnostics] == [("R4", "warning")]


def test_dropout_boundaries_inclusive():
    space = _wide_space()
    for dropout in (0.1, 0.6):
        config = Configuration("FCNN", {"optimizer": "Adam", "learning_rate": 1e-2,
                                        "loss": "MSE", "n_layers": 5, "dropout": dropout,
                                        "sequence_length": 64})
        p = PipelineDescription(method="FCNN", config=config,
                                steps=["standardize", "window"], automl_mode=True)
        _, diagnostics = validate_pipeline(p, space=space)
        assert diagnostics == [], dropout


def test_invalid_configuration_is_a_config_error():
    p = PipelineDescription(method="DT",
                            config=Configuration("DT", {"criterion": "GINI",
                                                        "min_sample_split": 2}),
                            steps=[], automl_mode=True)
    revised, diagnostics = validate_pipeline(p)
    assert revised is p
    (diag,) = diagnostics
    assert diag.rule_id == "config" and diag.severity == "error"


# ---------------------------------------------------------------- serialization


def test_pipeline_json_round_trip(tmp_path):
    p = _fcnn_pipeline(["standardize", "window"], automl=True)
    doc = pipeline_to_json(p)
    again = pipeline_from_json(doc)
    assert pipeline_to_json(again) == doc
    path = tmp_path / "p.json"
    path.write_text(__import__("json").dumps(doc))
    assert pipeline_to_json(load_pipeline(path)) == doc


def test_diagnostics_serialize():
    diagnostics = [Diagnostic("R1", "auto-fixed", "msg", "inserted standardize at index 0")]
    docs = diagnostics_to_json(diagnostics)
    assert docs == [{"rule_id": "R1", "severity": "auto-fixed", "message": "msg",
                     "applied_change": "inserted standardize at index 0"}]


def test_pipeline_description_validation():
    config = Configuration("DT", {"criterion": "MSE", "min_sample_split": 2})
    with pytest.raises(ValueError):
        PipelineDescription(method="RF", config=config, steps=[])
    with pytest.raises(ValueError):
        PipelineDescription(method="DT", config=config, steps=["shuffle"])
    with pytest.raises(ValueError):
        PipelineDescription(method="DT", config=config, steps=["window", "window"])
