import pytest
from hypothesis import given, settings, strategies as st

from mdlgamma.config import ALL_SECTIONS, DIM3_SECTIONS, RunConfig
from mdlgamma.errors import ConfigError


def test_defaults_roundtrip_fixpoint():
    c = RunConfig()
    text = c.to_ini()
    c2 = RunConfig.from_ini(text)
    assert c2 == c and c2.to_ini() == text


hs = st.lists(st.floats(1e-3, 0.5, allow_nan=False), min_size=3, max_size=6).map(tuple)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(0, 2 ** 31), st.sampled_from(["neglog", "quadratic"]),
       st.floats(-10, 10, allow_nan=False), st.floats(0.05, 0.95), hs,
       st.sampled_from(["quartic", "epanechnikov", "uniform"]), st.integers(1, 50))
def test_roundtrip_property(dim, seed, loss, rho0, c_star, h, prof, pairs):
    secs = DIM3_SECTIONS if dim == 3 else ALL_SECTIONS
    c = RunConfig(dim=dim, seed=seed, loss=loss, rho0=rho0, c_star=c_star, h=h, interior=prof,
                  scan_pairs=pairs, sections=secs).validate()
    text = c.to_ini()
    back = RunConfig.from_ini(text)
    assert back == c
    assert back.to_ini() == text


@pytest.mark.parametrize("text,line", [
    ("[run]\ndim = x\n", 2),
    ("[run]\nseed = 1\nfoo = 2\n", 3),
    ("[run]\n\n[bogus]\n", 3),
    ("[run]\nseed = 0\nloss = l2\n", 3),
    ("[run]\nh = 0.1, 0.05\n", 2),
    ("[windows]\ninterior = gaussian\n", 2),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_ini(text)
    assert exc.value.lineno == line
    assert str(exc.value).startswith(f"line {line}: ")


def test_dim3_rejects_planar_sections():
    with pytest.raises(ConfigError):
        RunConfig.from_ini("[run]\ndim = 3\n[experiments]\nsections = smoothing\n")
    assert RunConfig.from_ini("[run]\ndim = 3\n").h == (0.2, 0.1, 0.05)


def test_load_from_file(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[run]\nseed = 7\n")
    assert RunConfig.load(p).seed == 7
