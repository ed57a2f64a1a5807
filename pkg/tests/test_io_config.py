import numpy as np
import pytest
from hypothesis import given, strategies as st

from marsrf import ChainTopology, SpectralDensity, psd_to_adev, residual_psd_chain
from marsrf import io
from marsrf.config import KNOWN_KEYS, ConfigError, RunConfig, preset_names
from marsrf.pll import PllParams
from marsrf.stability import AdevCurve

finite = st.floats(1e-300, 1e300, allow_nan=False, allow_infinity=False)


@given(st.lists(finite, min_size=1, max_size=20))
def test_fmt_round_trips_floats(xs):
    assert [float(io.fmt(x)) for x in xs] == xs


def test_psd_file_round_trip(tmp_path):
    psd = residual_psd_chain(ChainTopology((100.0, 100.0)))
    path = io.write_psd_csv(tmp_path / "p.csv", psd, ["hello"])
    back = io.read_psd_csv(path)
    np.testing.assert_array_equal(back.freqs, psd.freqs)
    np.testing.assert_array_equal(back.values, psd.values)
    assert io.read_comments(path) == ["hello"]
    text = path.read_text().splitlines()
    assert text[0] == "# hello" and text[1] == "freq_hz,psd_rad2_per_hz"


def test_psd_dbc_round_trip(tmp_path):
    psd = residual_psd_chain(ChainTopology((120.0, 80.0)))
    back = io.read_psd_csv(io.write_psd_csv(tmp_path / "d.csv", psd, dbc=True))
    np.testing.assert_allclose(back.values, psd.values, rtol=1e-12)


def test_psd_file_gives_same_adev_as_memory(tmp_path):
    chain = ChainTopology((100.0, 100.0))
    psd = residual_psd_chain(chain)
    back = io.read_psd_csv(io.write_psd_csv(tmp_path / "p.csv", psd))
    taus = [0.1, 1.0, 10.0, 1e3, 1e4]
    a = psd_to_adev(psd, 1e9, taus).sigmas
    b = psd_to_adev(back, 1e9, taus).sigmas
    np.testing.assert_allclose(b, a, rtol=1e-12)


def test_adev_round_trip_with_and_without_counts(tmp_path):
    c1 = AdevCurve([1.0, 10.0], [2e-14, 3e-15], [99, 9])
    c2 = AdevCurve([1.0, 10.0], [2e-14, 3e-15])
    b1 = io.read_adev_csv(io.write_adev_csv(tmp_path / "a.csv", c1))
    b2 = io.read_adev_csv(io.write_adev_csv(tmp_path / "b.csv", c2))
    assert list(b1.counts) == [99, 9]
    assert b2.counts is None
    np.testing.assert_array_equal(b2.sigmas, c2.sigmas)


def test_rows_round_trip(tmp_path):
    rows = [{"a": 1.5, "b": "x", "c": float("nan")}, {"a": 2.0, "b": "", "c": 3.0}]
    back = io.read_rows_csv(io.write_rows_csv(tmp_path / "r.csv", rows))
    assert back[0]["a"] == 1.5 and back[0]["b"] == "x" and np.isnan(back[0]["c"])
    assert back[1]["c"] == 3.0


def test_series_npy_and_csv(tmp_path):
    t = np.arange(5) * 0.1
    x = np.sin(t)
    arr = np.load(io.write_series(tmp_path / "s.npy", t, x))
    np.testing.assert_array_equal(arr, np.column_stack([t, x]))
    path = io.write_series(tmp_path / "s.csv", t, x)
    assert path.read_text().splitlines()[0] == "t_s,phi_rad"


def test_read_rejects_missing_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# only comments\n")
    with pytest.raises(ValueError):
        io.read_psd_csv(p)


def test_write_atomic_leaves_no_temp_files(tmp_path):
    io.write_atomic(tmp_path / "sub" / "f.txt", "abc")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


# configuration

def test_defaults_build_a_chain():
    chain = RunConfig().chain()
    assert chain.sublink_lengths == (100.0, 100.0)
    assert chain.pll == PllParams()


def test_all_presets_load():
    names = preset_names()
    for required in ("fig6b_100_100", "fig6b_120_80", "fig7_3000km", "exp_260_280"):
        assert required in names
    for name in names:
        RunConfig.preset(name).chain()


def test_fig7_preset_geometry():
    chain = RunConfig.preset("fig7_3000km").chain()
    assert chain.n_mars == 29
    assert chain.total_length == pytest.approx(3000.0)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="pll.kq"):
        RunConfig.from_text("[pll]\nkq = 1\n")


def test_nested_and_dotted_keys_equivalent():
    a = RunConfig.from_text("[pll]\nkp = 400\n")
    b = RunConfig.from_text('"pll.kp" = 400\n')
    assert a.values == b.values


def test_station_override_applies_to_one_station():
    cfg = RunConfig.from_text("[chain]\nsublinks_km = [50, 50, 50]\n[pll.2]\nkp = 123\n")
    pll = cfg.chain().pll
    assert pll[0].k_p == PllParams.k_p and pll[1].k_p == 123.0


def test_station_override_out_of_range_rejected():
    cfg = RunConfig.from_text("[chain]\nsublinks_km = [50, 50]\n[pll.3]\nkp = 1\n")
    with pytest.raises(ConfigError, match="station"):
        cfg.chain()


def test_sublinks_and_total_conflict():
    cfg = RunConfig.from_text("[chain]\nsublinks_km = [1, 2]\ntotal_km = 3\nn_mars = 1\n")
    with pytest.raises(ConfigError):
        cfg.lengths()


def test_bad_toml_is_config_error():
    with pytest.raises(ConfigError):
        RunConfig.from_text("[chain\n")


def test_missing_file_names_path(tmp_path):
    p = tmp_path / "nope.toml"
    with pytest.raises(FileNotFoundError, match="nope.toml"):
        RunConfig.load(p)


def test_invalid_sweep_kind():
    with pytest.raises(ConfigError):
        RunConfig.from_text('[sweep]\nkind = "spiral"\n')


def test_fingerprint_depends_on_values_only():
    a = RunConfig.from_text("[pll]\nkp = 1\nki = 2\n")
    b = RunConfig.from_text("[pll]\nki = 2\nkp = 1\n", source="other")
    c = RunConfig.from_text("[pll]\nkp = 1\nki = 3\n")
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_out_dir_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv("MARSRF_OUT", str(tmp_path / "env"))
    assert RunConfig().out_dir() == tmp_path / "env"
    cfg = RunConfig.from_text(f'[output]\ndir = "{tmp_path / "cfg"}"\n')
    assert cfg.out_dir() == tmp_path / "cfg"
    assert cfg.out_dir(tmp_path / "flag") == tmp_path / "flag"


def test_pll_scale_applies_to_all_gains():
    p = RunConfig.from_text("[pll]\nscale = 0.5\n").base_pll()
    assert p == PllParams().scaled(0.5)


def test_every_known_key_accepted():
    cfg = RunConfig({k: v for k, v in KNOWN_KEYS.items() if v is not None})
    assert cfg.fingerprint()
