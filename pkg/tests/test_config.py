import pytest

from subnav.config import PRESET_DIR, Config, ConfigError, load_config, presets


def test_presets_cover_table_rows():
    names = presets()
    assert "facebook-mvc" in names and "talk-im" in names and "ba-mvc-smoke" in names
    assert len(names) == 26


def test_facebook_mvc_values():
    cfg = load_config(PRESET_DIR / "facebook-mvc.cfg")
    assert (cfg.M, cfg.n_per_class, cfg.hidden, cfg.out_dim, cfg.T_train, cfg.episodes) == (300, 100, 30, 10, 2000, 10)
    assert (cfg.alpha, cfg.c, cfg.beta, cfg.T_test, cfg.K) == (0.0, 20, 50.0, 2000, 3)


def test_include_and_override(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("include = preset:wiki-mvc\nM = 42\nbudgets = 1, 5,10\n")
    cfg = load_config(p, seed=9)
    assert cfg.M == 42 and cfg.seed == 9 and cfg.budgets == [1, 5, 10]
    assert cfg.alpha == 0.1


def test_relative_include(tmp_path):
    (tmp_path / "base.cfg").write_text("b = 7\n")
    (tmp_path / "run.cfg").write_text("include = base.cfg\nproblem = BMC\n")
    cfg = load_config(tmp_path / "run.cfg")
    assert (cfg.b, cfg.problem) == (7, "BMC")


@pytest.mark.parametrize("text", ["nonsense = 1\n", "b = 2.5\n", "directed = maybe\n", "problem = TSP\n",
                                  "no equals sign\n", "feature_stats = other\n"])
def test_rejects(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_include_cycle(tmp_path):
    (tmp_path / "a.cfg").write_text("include = b.cfg\n")
    (tmp_path / "b.cfg").write_text("include = a.cfg\n")
    with pytest.raises(ConfigError, match="cycle"):
        load_config(tmp_path / "a.cfg")


def test_dump_roundtrip(tmp_path):
    cfg = Config(M=12, budgets=[1, 2], directed=True)
    p = tmp_path / "dump.cfg"
    p.write_text(cfg.dumps())
    assert load_config(p) == cfg
