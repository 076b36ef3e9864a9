import pytest

from src.config import AGENT_CONFIG, RENDER_CONFIG, Settings, load_settings


def test_defaults():
    settings = load_settings()
    assert settings == Settings()
    assert settings.agent.max_rounds == AGENT_CONFIG["max_rounds"]
    assert settings.agent.budget_chars == AGENT_CONFIG["prompt_budget_tokens"] * AGENT_CONFIG["chars_per_token"]
    assert settings.render.palette[0] == tuple(RENDER_CONFIG["palette"][0])
    assert settings.aliases["nyc"] == "New York"


def test_toml_overrides(tmp_path):
    path = tmp_path / "agent.toml"
    path.write_text(
        "[agent]\nmax_rounds = 3\n\n"
        "[analytics]\neps = 0.02\n\n"
        "[render]\nwidth = 320\nbackground = [0, 0, 0]\npalette = [[1, 2, 3], [4, 5, 6]]\n\n"
        "[defaults]\nlocation = \"Hong Kong\"\n\n"
        "[aliases]\nBK = \"Brooklyn\"\n",
        encoding="utf-8",
    )
    settings = load_settings(str(path))
    assert settings.agent.max_rounds == 3
    assert settings.agent.history_window == AGENT_CONFIG["history_window"]
    assert settings.analytics.eps == 0.02
    assert settings.render.width == 320
    assert settings.render.background == (0, 0, 0)
    assert settings.render.palette == ((1, 2, 3), (4, 5, 6))
    assert settings.defaults.location == "Hong Kong"
    assert settings.aliases["bk"] == "Brooklyn"
    assert settings.aliases["hk"] == "Hong Kong"


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "agent.toml"
    path.write_text("[provider]\nmodel = \"m\"\nendpiont = \"http://x\"\n", encoding="utf-8")
    with pytest.raises(ValueError, match="endpiont"):
        load_settings(str(path))
