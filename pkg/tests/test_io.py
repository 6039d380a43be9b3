import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taskdict import model_io
from taskdict.elastic_net import ElasticNetParams
from taskdict.model import OneVsAll, TrainedModel
from taskdict.pgm import PGMError, read_manifest, read_pgm, write_pgm
from taskdict.tasks import TASK_KINDS, TaskSpec


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(7, 11)).astype(np.uint8)
    path = tmp_path / "a.pgm"
    write_pgm(path, img)
    np.testing.assert_array_equal(np.rint(read_pgm(path) * 255).astype(np.uint8), img)
    write_pgm(path, img / 255.0)
    assert path.read_bytes().startswith(b"P5\n11 7\n255\n")
    np.testing.assert_allclose(read_pgm(path), img / 255.0)


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n# more\n255\n\x00\xff")
    np.testing.assert_array_equal(read_pgm(path), [[0.0, 1.0]])


@pytest.mark.parametrize(
    "data,msg",
    [
        (b"P2\n1 1\n255\n0", "binary"),
        (b"P5\n1 1\n65535\n\x00\x00", "maxval"),
        (b"P5\n2 2\n255\n\x00", "pixel bytes"),
        (b"P5\n2", "truncated"),
    ],
)
def test_pgm_errors(tmp_path, data, msg):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(PGMError, match=msg):
        read_pgm(path)


def test_manifest(tmp_path):
    (tmp_path / "m.txt").write_text("# images\na.pgm 3\n\n/abs/b.pgm\n")
    entries = read_manifest(tmp_path / "m.txt")
    assert entries == [(str(tmp_path / "a.pgm"), "3"), ("/abs/b.pgm", None)]
    (tmp_path / "bad.txt").write_text("a b c\n")
    with pytest.raises(ValueError, match=":1:"):
        read_manifest(tmp_path / "bad.txt")


def random_model(kind, rng, m=5, p=7, q=3, r=None):
    task = TaskSpec(kind, m=m, p=p, q=q, r=r)
    D = rng.standard_normal((task.code_dim, p))
    D /= np.linalg.norm(D, axis=0)
    z = rng.standard_normal((r, m)) if r else None
    params = ElasticNetParams(float(rng.uniform(0.01, 0.3)), float(rng.uniform(0, 0.1)), max_active=int(rng.integers(1, 9)))
    return TrainedModel(task, D, rng.standard_normal(task.w_shape), params, z=z)


@given(seed=st.integers(0, 2**31), kind=st.sampled_from([k for k in TASK_KINDS if k != "multiclass_ova"]), transform=st.booleans())
def test_model_round_trip(seed, kind, transform):
    rng = np.random.default_rng(seed)
    r = 3 if (transform or kind == "compressed_sensing") else None
    model = random_model(kind, rng, r=r)
    blob = model_io.dumps(model)
    back = model_io.loads(blob)
    assert back.task == model.task and back.params == model.params
    assert back.dictionary.tobytes() == model.dictionary.tobytes()
    assert back.w.tobytes() == model.w.tobytes()
    assert (back.z is None) == (model.z is None)
    assert model_io.dumps(back) == blob


def test_one_vs_all_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    first = random_model("binary_linear", rng)
    members = [first] + [first.copy(w=rng.standard_normal(7)) for _ in range(2)]
    ova = OneVsAll(members)
    path = tmp_path / "ova.bin"
    blob = model_io.save(ova, path)
    back = model_io.load(path)
    assert isinstance(back, OneVsAll) and back.q == 3
    assert model_io.dumps(back) == blob
    assert len(model_io.file_hash(path)) == 64


def test_file_layout():
    rng = np.random.default_rng(2)
    model = random_model("regression", rng, m=2, p=3, q=1)
    blob = model_io.dumps(model)
    n = int.from_bytes(blob[:8], "little")
    head = blob[8 : 8 + n].decode()
    assert head.startswith("format = taskdict-model 1\n") and "task = regression" in head
    D = np.frombuffer(blob[8 + n : 8 + n + 48], dtype="<f8").reshape((2, 3), order="F")
    np.testing.assert_array_equal(D, model.dictionary)


def test_corrupt_files_rejected():
    rng = np.random.default_rng(3)
    blob = model_io.dumps(random_model("regression", rng))
    with pytest.raises(model_io.ModelFormatError):
        model_io.loads(blob[:-8])
    with pytest.raises(model_io.ModelFormatError):
        model_io.loads(blob[:4])
    with pytest.raises(model_io.ModelFormatError):
        model_io.loads(blob.replace(b"taskdict-model 1", b"taskdict-model 9"))
    with pytest.raises(model_io.ModelFormatError):
        model_io.loads(blob.replace(b"m = 5", b"m = 6"))
