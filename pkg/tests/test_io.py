import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mfsensor import (DataFormatError, FidelityClass, SnapshotMatrix, assemble_instance,
                      fit_reduced_model, greedy_sm)
from mfsensor.io import (check_fingerprint, load_matrix, load_model, read_config, read_csv,
                         read_design, read_mfsm, save_model, write_csv, write_design,
                         write_mfsm)


def test_csv_small(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2\n3,4\n")
    np.testing.assert_array_equal(read_csv(p), [[1.0, 2.0], [3.0, 4.0]])


@pytest.mark.parametrize("text,line", [
    ("", None),
    ("1,2\n3\n", 2),
    ("1,nan\n", 1),
    ("1,x\n", 1),
])
def test_csv_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataFormatError) as info:
        read_csv(p)
    if line is not None:
        assert info.value.line == line
        assert f":{line}:" in str(info.value)


def test_mfsm_round_trip_bytes(tmp_path):
    mat = np.random.default_rng(0).standard_normal((5, 3))
    a, b = tmp_path / "a.mfsm", tmp_path / "b.mfsm"
    write_mfsm(a, mat)
    back = read_mfsm(a)
    np.testing.assert_array_equal(back, mat)
    write_mfsm(b, back)
    assert a.read_bytes() == b.read_bytes()
    raw = a.read_bytes()
    assert raw[:4] == b"MFSM" and len(raw) == 24 + 15 * 8
    # column-major: second value is element (1, 0)
    assert np.frombuffer(raw[32:40], "<f8")[0] == mat[1, 0]


def test_mfsm_errors(tmp_path):
    p = tmp_path / "x.mfsm"
    p.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(DataFormatError):
        read_mfsm(p)
    write_mfsm(p, np.ones((2, 2)))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(DataFormatError):
        read_mfsm(p)
    write_mfsm(p, np.array([[np.nan]]))
    with pytest.raises(DataFormatError):
        read_mfsm(p)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, width=64)))
def test_csv_and_mfsm_agree(tmp_path_factory, mat):
    d = tmp_path_factory.mktemp("agree")
    write_csv(d / "m.csv", mat)
    write_mfsm(d / "m.mfsm", mat)
    np.testing.assert_array_equal(load_matrix(d / "m.csv"), load_matrix(d / "m.mfsm"))


def test_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nbudget = 12.5\nseed=3  # trailing\ncenter = no\n\n")
    assert read_config(p) == {"budget": 12.5, "seed": 3, "center": False}
    p.write_text("budget 3\n")
    with pytest.raises(DataFormatError):
        read_config(p)
    p.write_text("colour = red\n")
    with pytest.raises(DataFormatError):
        read_config(p)


def _model(seed):
    rng = np.random.default_rng(seed)
    return fit_reduced_model(SnapshotMatrix(rng.standard_normal((9, 6))), energy=0.9)


def test_model_round_trip(tmp_path):
    model = _model(0)
    save_model(tmp_path, model, test=np.ones((9, 2)))
    back = load_model(tmp_path)
    for name in ("phi", "sing_vals", "prior_var", "psi", "cand_idx", "mean"):
        np.testing.assert_array_equal(getattr(back, name), getattr(model, name))
    assert back.lam == model.lam and back.n_snapshots == model.n_snapshots


def test_design_fingerprint(tmp_path):
    cheap, exp = FidelityClass(1, 1.0), FidelityClass(2, 0.5)
    inst = assemble_instance(_model(0), cheap, exp, 4)
    other = assemble_instance(_model(1), cheap, exp, 4)
    path = tmp_path / "d.json"
    write_design(path, greedy_sm(inst), inst)
    doc = read_design(path)
    check_fingerprint(doc, inst)
    with pytest.raises(DataFormatError):
        check_fingerprint(doc, other)
    first = path.read_bytes()
    write_design(path, greedy_sm(inst), inst)
    assert path.read_bytes() == first
