import hashlib
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riffled import cli, dense, formats, fourier, perm, riffle, synth, tree
from riffled.dense import SampleSet
from riffled.formats import FormatError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_simple_file():
    s = formats.parse_rankings("n=3\n1 2 3\n3 2 1\n")
    assert s.total == 2
    # ordering notation lists items first to last
    assert {tuple(r) for r in s.rankings} == {(0, 1, 2), (2, 1, 0)}
    s = formats.parse_rankings("# note\nn=3 notation=ranking\n\n2,3,1\n")
    assert tuple(s.rankings[0]) == (1, 2, 0)
    s = formats.parse_rankings("n=3 notation=ordering\n2 3 1\n")
    assert tuple(s.rankings[0]) == perm.inverse((1, 2, 0))


def test_parse_counted_file():
    s = formats.parse_rankings("n=3 counted=true\n5 1 2 3\n7: 2,1,3\n")
    assert s.total == 12 and s.counts.tolist() == [5, 7]


def test_histogram_file_over_all_of_s5():
    counts = list(range(1, 121))
    lines = ["n=5 notation=ordering counted=true"]
    for c, s in zip(counts, perm.enumerate_sn(5)):
        lines.append(f"{c} " + " ".join(str(v + 1) for v in perm.inverse(s)))
    parsed = formats.parse_rankings("\n".join(lines))
    assert parsed.total == sum(counts) and parsed.rankings.shape == (120, 5)


def test_preflib_layout():
    text = "# FILE NAME: x.soc\n# NUMBER ALTERNATIVES: 3\n# NUMBER VOTERS: 9\n4: 1,2,3\n5: 3,1,2\n"
    s = formats.parse_rankings(text)
    assert s.total == 9 and tuple(s.rankings[1]) == perm.inverse((2, 0, 1))


@pytest.mark.parametrize(
    "text,message",
    [
        ("n=3\n1 1 3\n", "line 2: duplicate value 1"),
        ("n=3\n1 2\n", "line 2: expected 3 values"),
        ("n=3\n1 2 4\n", "line 2: value 4"),
        ("n=3\n1 2 x\n", "line 2: non-integer"),
        ("1 2 3\n", "line 1: missing header"),
        ("n=3 counted=true\n0 1 2 3\n", "line 2: counts must be positive"),
        ("n=3 notation=weird\n", "line 1: notation"),
        ("n=3 color=red\n", "unknown header key"),
        ("", "no header"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(FormatError, match=message):
        formats.parse_rankings(text)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 6),
    rows=st.lists(st.integers(0, 10_000), min_size=0, max_size=30),
    notation=st.sampled_from(["ordering", "ranking"]),
    counted=st.sampled_from([None, True, False]),
)
def test_rankings_round_trip(n, rows, notation, counted):
    rankings = [perm.from_index(n, r % math.factorial(n)) for r in rows]
    if rankings:
        samples = SampleSet.from_rankings(n, rankings)
    else:
        samples = SampleSet(n, np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.int64))
    back = formats.parse_rankings(formats.format_rankings(samples, notation, counted))
    assert back.n == n
    assert np.array_equal(back.rankings, samples.rankings) and np.array_equal(back.counts, samples.counts)


def test_save_load_rankings(tmp_path):
    samples = SampleSet.from_rankings(4, [(0, 1, 2, 3), (3, 2, 1, 0)], [2, 1])
    path = tmp_path / "x.rk"
    formats.save_rankings(samples, path)
    back = formats.load_rankings(path)
    assert np.array_equal(back.rankings, samples.rankings) and np.array_equal(back.counts, samples.counts)
    with pytest.raises(FormatError, match="cannot read"):
        formats.load_rankings(tmp_path / "missing.rk")


def mixed_model(rng):
    shape = tree.split(tree.leaf((1,)), tree.split(tree.leaf((0, 2)), tree.leaf((3, 4, 5))))
    model = riffle.model_from_structure(shape, rng, 1.0)
    root = model.root
    inner = root.children[1]
    inner = riffle.internal_node(inner.children[0], inner.children[1], riffle.mixture_riffle(2, 3, [0.3, 0.7], [0.8, 0.1]))
    root = riffle.internal_node(root.children[0], inner, riffle.biased_riffle(1, 5, 0.35))
    return riffle.HierarchicalModel(root)


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    uniform = riffle.model_from_structure(tree.split(tree.leaf((0, 1)), tree.leaf((2,))))
    table = riffle.model_from_structure(tree.balanced(range(5), 2), rng, 1.0)
    for model in (uniform, table):
        path = tmp_path / "m.json"
        formats.save_model(model, path)
        back = formats.load_model(path)
        assert back.structure() == model.structure()
        assert np.array_equal(riffle.to_dense(back).probs, riffle.to_dense(model).probs)
    model = mixed_model(rng)
    back = formats.model_from_json(json.loads(json.dumps(formats.model_to_json(model))))
    assert back.root.interleaving.kind == "biased" and back.root.children[1].interleaving.kind == "mixture"
    assert np.abs(riffle.to_dense(back).probs - riffle.to_dense(model).probs).max() < 1e-12
    assert dense.kl_divergence(riffle.to_dense(model), riffle.to_dense(back)) == pytest.approx(0.0, abs=1e-12)


def test_model_schema_errors():
    doc = formats.model_to_json(riffle.model_from_structure(tree.split(tree.leaf((0,)), tree.leaf((1,)))))
    bad = dict(doc, version=99)
    with pytest.raises(FormatError, match="version"):
        formats.model_from_json(bad)
    with pytest.raises(FormatError, match="expected"):
        formats.model_from_json(dict(doc, format="other"))
    broken = json.loads(json.dumps(doc))
    broken["root"]["interleaving"] = {"kind": "table", "probs": [0.5]}
    with pytest.raises(FormatError, match="root"):
        formats.model_from_json(broken)
    broken = json.loads(json.dumps(doc))
    broken["root"]["children"][1]["items"] = [1]
    with pytest.raises(FormatError):
        formats.model_from_json(broken)


def test_structure_and_fourier_documents(tmp_path):
    shape = tree.split(tree.leaf((2,)), tree.split(tree.leaf((0, 1)), tree.leaf((3,))))
    assert formats.structure_from_json(json.loads(json.dumps(formats.structure_to_json(shape)))) == shape
    F = fourier.fourier_transform(dense.random_distribution(4, np.random.default_rng(1)), order=2)
    path = tmp_path / "f.json"
    formats.save_fourier(F, path)
    G = formats.load_fourier(path)
    assert G.levels == F.levels and G.order == 2 and G.max_abs_diff(F) == 0.0
    doc = json.loads(path.read_text())
    assert doc["levels"][1] == {"partition": [3, 1], "dimension": 3, "matrix": [float(v) for v in F[(3, 1)].ravel()]}


def test_synth_is_deterministic(tmp_path):
    a, ma = synth.synth("thin", 16, 10_000, 7, k=4)
    b, mb = synth.synth("thin", 16, 10_000, 7, k=4)
    ta, tb = formats.format_rankings(a), formats.format_rankings(b)
    assert hashlib.sha256(ta.encode()).hexdigest() == hashlib.sha256(tb.encode()).hexdigest()
    shape = ma.structure()
    assert all(len(node.children[0].items) == 4 for node in _internal(shape))
    assert a.total == 10_000


def _internal(t):
    if t.is_leaf:
        return []
    return [t] + _internal(t.children[0]) + _internal(t.children[1])


def test_synth_balanced_and_empty():
    samples, model = synth.synth("balanced", 16, 0, 3)
    assert samples.total == 0 and model.n == 16
    assert formats.format_rankings(samples) == "n=16 notation=ordering counted=false\n"
    sizes = [len(leaf.items) for leaf in model.structure().leaves()]
    assert sum(sizes) == 16 and max(sizes) <= 2
    # roughly balanced: depth stays near log2(n / leaf size)
    def depth(t):
        return 0 if t.is_leaf else 1 + max(depth(c) for c in t.children)
    assert depth(model.structure()) <= 5


def test_cli_marginals_and_evaluate(tmp_path, capsys):
    data = write(tmp_path, "d.rk", "n=3 counted=true\n3 1 2 3\n1 3 1 2\n")
    code, out, _ = run(capsys, "marginals", "--in", data, "--order", 1)
    assert code == 0
    assert out.splitlines() == ["rank,item_1,item_2,item_3", "1,3,0,1", "2,1,3,0", "3,0,1,3"]
    code, out, _ = run(capsys, "marginals", "--in", data, "--order", 2)
    assert code == 0 and out.splitlines()[:3] == ["rank_1,rank_2,item_1,item_2,count", "1,2,1,2,3", "1,2,3,1,1"]

    s0 = (2, 0, 1)
    delta = riffle.HierarchicalModel(riffle.leaf_node(range(3), dense.delta(3, s0)))
    model_path = tmp_path / "delta.json"
    formats.save_model(delta, model_path)
    train = tmp_path / "t.rk"
    formats.save_rankings(SampleSet.from_rankings(3, [s0], [5]), train)
    code, out, _ = run(capsys, "evaluate", "--model", model_path, "--test", train)
    assert code == 0 and out.splitlines()[1] == "mean_log_likelihood,0.0"


def test_cli_fourier_check(capsys):
    code, out, _ = run(capsys, "fourier-check", "--n", 5, "--alpha", 0.5)
    assert code == 0
    assert float(out.strip().splitlines()[-1].split(",")[-1]) < 1e-9


def test_cli_pipeline_is_reproducible(tmp_path, capsys):
    samples, truth = tmp_path / "s.rk", tmp_path / "truth.json"
    assert run(capsys, "synth", "--structure", "thin", "--n", 7, "--k", 1, "--m", 2000, "--seed", 3,
               "--out", samples, "--model-out", truth)[0] == 0
    learned = tmp_path / "learned.json"
    assert run(capsys, "learn-structure", "--in", samples, "--k", 1, "--mode", "thin", "--out", learned)[0] == 0
    assert formats.load_structure(learned).leaf_sets() == formats.load_model(truth).structure().leaf_sets()
    fitted = tmp_path / "fit.json"
    assert run(capsys, "fit-params", "--in", samples, "--structure", learned, "--out", fitted)[0] == 0
    outputs = []
    for _ in range(2):
        code, out, _ = run(capsys, "sample", "--model", fitted, "--count", 50, "--seed", 11)
        assert code == 0
        outputs.append(out)
        code, out, _ = run(capsys, "bootstrap", "--in", samples, "--bootstrap-B", 3, "--sizes", "200,400",
                           "--k", 1, "--mode", "thin", "--seed", 5)
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[2] and outputs[1] == outputs[3]
    rows = outputs[1].splitlines()
    assert rows[0] == "size,B,measure,fraction" and len(rows) == 1 + 2 * 3 * 2
    assert {r.split(",")[2] for r in rows[1:]} == {
        f"{m}:{o}" for m in ("exact", "topmost", "leaf_sets") for o in ("cross", "balanced")
    }
    code, out, _ = run(capsys, "fit-params", "--in", samples, "--structure", learned, "--family", "biased")
    assert code == 0 and '"kind": "biased"' in out


@pytest.mark.parametrize(
    "argv,needle",
    [
        (["marginals", "--in", "{missing}"], "cannot read"),
        (["marginals", "--in", "{bad}"], "duplicate value 1"),
        (["evaluate", "--model", "{missing}", "--test", "{bad}"], "cannot read"),
        (["evaluate", "--model", "{badjson}", "--test", "{bad}"], "invalid JSON"),
        (["fourier-check", "--n", "9"], "--n must lie"),
        (["synth", "--n", "5", "--k", "7"], "--k must lie"),
        (["bootstrap", "--in", "{good}", "--sizes", "a,b"], "--sizes"),
        (["learn-structure"], "--in is required"),
    ],
)
def test_cli_errors_are_diagnosed(tmp_path, capsys, argv, needle):
    paths = {
        "missing": tmp_path / "missing.rk",
        "bad": write(tmp_path, "bad.rk", "n=3\n1 1 3\n"),
        "badjson": write(tmp_path, "bad.json", "{not json"),
        "good": write(tmp_path, "good.rk", "n=3\n1 2 3\n"),
    }
    code, _, err = run(capsys, *[a.format(**paths) for a in argv])
    assert code != 0 and needle in err


def test_cli_cap_violation(tmp_path, capsys, monkeypatch):
    model = riffle.model_from_structure(tree.balanced(range(6), 2))
    path = tmp_path / "m.json"
    formats.save_model(model, path)
    monkeypatch.setenv("RIFFLE_MAX_N", "5")
    code, _, err = run(capsys, "marginals", "--model", path, "--order", 1)
    assert code != 0 and "cap" in err
    monkeypatch.setenv("RIFFLE_MAX_N", "abc")
    code, _, err = run(capsys, "marginals", "--model", path, "--order", 1)
    assert code != 0 and "RIFFLE_MAX_N" in err


def test_cli_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["marginals", "--bogus"])
    assert exc.value.code != 0
