"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` (or ``-rA``) to see the
per-criterion lines.
"""

import json
import math
import os
import shutil
import time
from contextlib import contextmanager
from importlib import resources

import numpy as np
import pytest
from scipy import integrate

from multibias.cli import main
from multibias.hard import hard_debias
from multibias.lexicon import parse_lexicon_dict, resolve
from multibias.metrics import compare, mac
from multibias.soft import SoftDebiasConfig, gradient, objective, optimize
from multibias.stats import paired_t_test, pearson_r, spearman_rho, student_t_sf
from multibias.store import EmbeddingStore, load_text, normalize_all, save_text
from multibias.subspace import deviation_matrix, identify_bias_subspace

from conftest import make_resolved, random_unit_store, resolved_set
from test_diagnostics import brute_force_counts


@contextmanager
def criterion(name: str, limit_seconds: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < limit_seconds, f"{name}: {elapsed:.2f}s exceeded {limit_seconds}s budget"
    print(f"\nACCEPTANCE {name}: PASS ({elapsed:.2f}s)")


def test_criterion_1_subspace_oracle_equivalence():
    with criterion("1 subspace-oracle-equivalence", 5.0):
        rng = np.random.default_rng(101)
        for _ in range(50):
            dim = int(rng.integers(2, 7))
            n_sets = int(rng.integers(2, 5))
            sizes = [int(rng.integers(1, 5)) for _ in range(n_sets)]
            if all(s == 1 for s in sizes):
                sizes[0] = 2
            store = random_unit_store(rng, sum(sizes), dim)
            sets, start = [], 0
            for i, size in enumerate(sizes):
                sets.append(resolved_set(store, f"d{i}", store.vocab[start : start + size]))
                start += size
            sets = tuple(sets)

            deviations = deviation_matrix(sets, store)
            cov = deviations.T @ deviations / deviations.shape[0]
            values, vectors = np.linalg.eigh(cov)
            order = np.argsort(values)[::-1]
            values, vectors = values[order], vectors[:, order].T
            rank = int(np.sum(values > values[0] * 1e-9))

            sub = identify_bias_subspace(sets, store, k=rank)
            assert np.abs(sub.eigenvalues - values[:rank]).max() <= 1e-8
            for i in range(rank):
                mismatch = min(
                    np.abs(sub.basis[i] - vectors[i]).max(),
                    np.abs(sub.basis[i] + vectors[i]).max(),
                )
                assert mismatch <= 1e-8


def _random_debias_instance(rng, variant):
    dim = int(rng.integers(4, 11))
    size = int(rng.integers(12, 51))
    store = random_unit_store(rng, size, dim)
    w = store.vocab
    if variant == 0:
        defining, k = [(w[0], w[1]), (w[2], w[3])], 1
    elif variant == 1:
        defining, k = [(w[0], w[1]), (w[2], w[3])], 2
    elif variant == 2:
        defining, k = [(w[0], w[1], w[2]), (w[3], w[4], w[5])], 1
    else:
        defining, k = [(w[0], w[1], w[2]), (w[3], w[4]), (w[5], w[6])], 1
    resolved = make_resolved(store, defining=defining)
    subspace = identify_bias_subspace(resolved.defining_sets, store, k=k)
    return store, resolved, subspace


def test_criterion_2_hard_debias_geometry():
    with criterion("2 hard-debias-geometry", 5.0):
        rng = np.random.default_rng(202)
        for trial in range(20):
            store, resolved, subspace = _random_debias_instance(rng, trial % 4)
            result = hard_debias(store, resolved, subspace)
            out = result.store

            # (a) neutralized rows have no component left in the subspace
            for word in result.neutralized:
                assert np.abs(subspace.basis @ out.row(word)).max() <= 1e-10
            # (b) every output row is unit length
            assert np.abs(np.linalg.norm(out.matrix, axis=1) - 1.0).max() <= 1e-9
            # (c) neutral words are equidistant from all members of an equality set
            for word in result.neutralized:
                n = out.row(word)
                for group in result.equalized:
                    dots = [float(n @ out.row(member)) for member in group]
                    assert max(dots) - min(dots) <= 1e-10
            # (d) a second pass changes nothing
            again = hard_debias(out, resolved, subspace)
            assert np.abs(again.store.matrix - out.matrix).max() <= 1e-9


def test_criterion_3_mac_saturation():
    with criterion("3 mac-saturation", 1.0):
        rng = np.random.default_rng(303)
        dim = 6
        matrix = rng.normal(size=(16, dim))
        matrix[:, 0] = np.abs(matrix[:, 0]) + 0.5
        vocab = ["p", "q"] + [f"t{i}" for i in range(10)] + [f"a{i}" for i in range(4)]
        matrix[0] = 0.0
        matrix[0][:2] = (0.6, 0.8)
        matrix[1] = 0.0
        matrix[1][:2] = (-0.6, 0.8)
        for j in range(4):
            matrix[12 + j] = 0.0
            matrix[12 + j][0] = 1.0  # attributes lie inside the bias subspace
        store = normalize_all(EmbeddingStore(tuple(vocab), matrix))
        targets = [f"t{i}" for i in range(10)]
        resolved = make_resolved(
            store,
            defining=[("p", "q")],
            neutral=targets,
            targets=[[t] for t in targets],
            attributes=[["a0", "a1"], ["a2", "a3"]],
        )
        subspace = identify_bias_subspace(resolved.defining_sets, store, k=1)
        before = mac(store, resolved.eval_targets, resolved.eval_attributes)
        result = hard_debias(store, resolved, subspace)
        after = mac(result.store, resolved.eval_targets, resolved.eval_attributes)
        assert abs(after.mac - 1.0) <= 1e-9
        assert after.mac > before.mac  # moved toward 1


def test_criterion_4_soft_debias_objective():
    with criterion("4 soft-debias-objective", 30.0):
        rng = np.random.default_rng(404)

        # (a) trace-identity fidelity equals the direct formula
        for _ in range(10):
            d = int(rng.integers(3, 7))
            v = int(rng.integers(d, 21))
            W = rng.normal(size=(d, v))
            N = rng.normal(size=(d, int(rng.integers(1, 4))))
            q, _ = np.linalg.qr(rng.normal(size=(d, 2)))
            basis = q.T
            A = rng.normal(size=(d, d))
            lam = float(rng.uniform(0.0, 1.0))
            breakdown = objective(A, W, N, basis, lam)
            direct_fid = np.linalg.norm((A @ W).T @ (A @ W) - W.T @ W, "fro") ** 2
            direct_bias = np.linalg.norm((A @ N).T @ (A @ basis.T), "fro") ** 2
            assert abs(breakdown.fidelity_term - direct_fid) <= 1e-8 * max(1.0, direct_fid)
            assert abs(breakdown.bias_term - direct_bias) <= 1e-8 * max(1.0, direct_bias)

        # (b) analytic gradient vs central finite differences
        h = 1e-5
        for _ in range(20):
            d = int(rng.integers(2, 5))
            W = rng.normal(size=(d, int(rng.integers(2, 8))))
            N = rng.normal(size=(d, int(rng.integers(1, 4))))
            q, _ = np.linalg.qr(rng.normal(size=(d, 1)))
            basis = q.T
            lam = float(rng.uniform(0.0, 1.0))
            A = np.eye(d) + 0.3 * rng.normal(size=(d, d))
            grad = gradient(A, W, N, basis, lam)
            fd = np.zeros_like(A)
            for i in range(d):
                for j in range(d):
                    up, down = A.copy(), A.copy()
                    up[i, j] += h
                    down[i, j] -= h
                    fd[i, j] = (
                        objective(up, W, N, basis, lam).total
                        - objective(down, W, N, basis, lam).total
                    ) / (2 * h)
            assert np.abs(grad - fd).max() <= 1e-4 * np.abs(fd).max()

        # (c) accepted objective sequence is non-increasing
        store = random_unit_store(np.random.default_rng(405), 12, 4)
        resolved = make_resolved(store, defining=[("w000", "w001")], neutral=["w002", "w003"])
        subspace = identify_bias_subspace(resolved.defining_sets, store, k=1)
        totals = []
        optimize(
            store,
            resolved,
            subspace,
            SoftDebiasConfig(lambda_=0.5, max_iters=500),
            trace=lambda it, total, fid, bias, step: totals.append(total),
        )
        assert len(totals) > 2
        assert all(b <= a for a, b in zip(totals, totals[1:]))

        # (d) lambda = 0.2 strictly reduces the bias term at bounded fidelity cost
        store = random_unit_store(np.random.default_rng(406), 5, 3)
        resolved = make_resolved(store, defining=[("w000", "w001")], neutral=["w002"])
        subspace = identify_bias_subspace(resolved.defining_sets, store, k=1)
        at_identity = objective(
            np.eye(3), store.matrix.T, store.matrix[[2]].T, subspace.basis, 0.2
        )
        _, breakdown = optimize(store, resolved, subspace, SoftDebiasConfig(lambda_=0.2))
        assert breakdown.bias_term < at_identity.bias_term
        assert breakdown.fidelity_term <= 1e-2


def test_criterion_5_statistics_oracles():
    with criterion("5 statistics-oracles", 5.0):
        # df = 2 closed form
        result = paired_t_test([1, 2, 3], [2, 4, 6])
        assert result.t == pytest.approx(-3.4641, abs=1e-4)
        assert result.df == 2
        assert result.p_two_sided == pytest.approx(0.0742, abs=1e-3)

        # survival function vs numeric integration of the density
        def density(x, df):
            return (
                math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2))
                / math.sqrt(df * math.pi)
                * (1 + x * x / df) ** (-(df + 1) / 2)
            )

        for df in range(1, 31):
            for t in (0.0, 1.0, 2.5, 5.0, 10.0, -3.0, -10.0):
                numeric, _ = integrate.quad(
                    density, t, math.inf, args=(df,), epsabs=1e-12, epsrel=1e-12
                )
                assert abs(student_t_sf(t, df) - numeric) <= 1e-8

        # correlation hand oracles, exact to 1e-12
        x = [1.0, 2.0, 5.0, 7.0]
        assert pearson_r(x, [2 * v + 1 for v in x]) == pytest.approx(1.0, abs=1e-12)
        assert pearson_r([0.5, 1.0, 4.0], [-0.5, -1.0, -4.0]) == pytest.approx(-1.0, abs=1e-12)
        assert pearson_r([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5, abs=1e-12)
        assert spearman_rho([1.0, 2.0, 10.0], [1.0, 8.0, 1000.0]) == pytest.approx(1.0, abs=1e-12)
        assert spearman_rho([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5, abs=1e-12)


def test_criterion_6_cluster_bias_oracle():
    from multibias.diagnostics import cluster_bias_report

    with criterion("6 cluster-bias-oracle", 2.0):
        rng = np.random.default_rng(606)
        for _ in range(5):
            size = int(rng.integers(12, 31))
            biased = random_unit_store(rng, size, 4)
            debiased = normalize_all(
                EmbeddingStore(biased.vocab, rng.permutation(np.asarray(biased.matrix)))
            )
            dset = resolved_set(biased, "D", ("w000", "w001", "w002"))
            professions = [f"w{i:03d}" for i in range(4, 9)]
            m = int(rng.integers(2, 8))
            report = cluster_bias_report(biased, debiased, dset, professions, m=m, n=3)
            for entry in report.classes:
                assert entry.neighbor_counts["biased"] == tuple(
                    brute_force_counts(biased, biased, entry.direction, professions, m)
                )
                assert entry.neighbor_counts["debiased"] == tuple(
                    brute_force_counts(biased, debiased, entry.direction, professions, m)
                )

        # co-monotone synthetic data: rank correlation is exactly 1
        n_prof, K = 4, 3
        dim = 2 + n_prof
        vocab = ["c1", "c2"]
        rows = [np.eye(dim)[0], -np.eye(dim)[0]]
        professions = []
        for i in range(1, n_prof + 1):
            home = np.eye(dim)[1 + i]
            base = home + 0.001 * i * np.eye(dim)[0]
            professions.append(f"p{i}")
            vocab.append(f"p{i}")
            rows.append(base / np.linalg.norm(base))
            for j in range(K):
                sign = 1.0 if j < i - 1 else -1.0
                sat = home + sign * 0.02 * np.eye(dim)[0] + 0.01 * (j + 1) * np.eye(dim)[1]
                vocab.append(f"p{i}s{j}")
                rows.append(sat / np.linalg.norm(sat))
        store = normalize_all(EmbeddingStore(tuple(vocab), np.array(rows)))
        dset = resolved_set(store, "D", ("c1", "c2"))
        report = cluster_bias_report(store, store, dset, professions, m=K, n=2)
        assert report.classes[0].neighbor_counts["biased"] == (0, 1, 2, 3)
        assert report.classes[0].spearman["biased"] == 1.0


def _write_pipeline_inputs(root):
    rng = np.random.default_rng(707)
    vocab = ("he", "she", "man", "woman") + tuple(f"n{i:02d}" for i in range(12))
    matrix = rng.normal(size=(len(vocab), 6))
    matrix[:, 0] = np.abs(matrix[:, 0]) + 0.3
    store = normalize_all(EmbeddingStore(vocab, matrix))
    emb = root / "pipe.vec"
    save_text(store, emb)
    lexicon = {
        "defining_sets": [
            {"name": "pronouns", "words": ["he", "she"]},
            {"name": "nouns", "words": ["man", "woman"]},
        ],
        "eval": {
            "targets": [{"name": "classes", "words": ["he", "she", "man", "woman"]}],
            "attributes": [
                {"name": "a1", "words": ["n00", "n01", "n02"]},
                {"name": "a2", "words": ["n03", "n04", "n05"]},
            ],
        },
    }
    lex = root / "pipe-lexicon.json"
    lex.write_text(json.dumps(lexicon), encoding="utf-8")
    return emb, lex


def _run_pipeline(emb, lex, outdir):
    os.makedirs(outdir, exist_ok=True)
    artifacts = {
        "debiased": outdir / "debiased.vec",
        "provenance": outdir / "debiased.vec.provenance.json",
        "spectrum": outdir / "spectrum.json",
        "before": outdir / "before.json",
        "after": outdir / "after.json",
        "comparison": outdir / "comparison.json",
    }
    assert main(["subspace", "--embeddings", str(emb), "--lexicon", str(lex),
                 "--k", "1", "--out", str(artifacts["spectrum"])]) == 0
    assert main(["debias-hard", "--embeddings", str(emb), "--lexicon", str(lex),
                 "--k", "1", "--out", str(artifacts["debiased"])]) == 0
    assert main(["eval-mac", "--embeddings", str(emb), "--lexicon", str(lex),
                 "--out", str(artifacts["before"])]) == 0
    assert main(["eval-mac", "--embeddings", str(artifacts["debiased"]), "--lexicon", str(lex),
                 "--out", str(artifacts["after"])]) == 0
    assert main(["compare", "--before", str(artifacts["before"]),
                 "--after", str(artifacts["after"]), "--out", str(artifacts["comparison"])]) == 0
    return {name: path.read_bytes() for name, path in artifacts.items()}


def test_criterion_7_end_to_end_determinism(tmp_path, monkeypatch):
    with criterion("7 end-to-end-determinism", 30.0):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        emb, lex = _write_pipeline_inputs(tmp_path)
        outdir = tmp_path / "run"
        first = _run_pipeline(emb, lex, outdir)
        manifest_first = (outdir / "comparison.json.manifest.json").read_bytes()
        shutil.rmtree(outdir)
        second = _run_pipeline(emb, lex, outdir)
        manifest_second = (outdir / "comparison.json.manifest.json").read_bytes()
        assert set(first) == set(second)
        for name in first:
            assert first[name] == second[name], f"artifact {name} differs between runs"
        assert manifest_first == manifest_second


def test_criterion_8_directional_sanity_on_pretrained_embeddings():
    path = os.environ.get("MULTIBIAS_PRETRAINED_VEC")
    if not path:
        pytest.skip(
            "criterion 8 is optional and needs a pre-trained embedding file; "
            "set MULTIBIAS_PRETRAINED_VEC to run it"
        )
    with criterion("8 directional-sanity", 300.0):
        store = normalize_all(load_text(path))
        text = resources.files("multibias.data").joinpath("gender.json").read_text("utf-8")
        lexicon = parse_lexicon_dict(json.loads(text))
        resolved = resolve(lexicon, store, missing="skip")
        subspace = identify_bias_subspace(resolved.defining_sets, store, k=1)
        before = mac(store, resolved.eval_targets, resolved.eval_attributes)
        result = hard_debias(store, resolved, subspace)
        after = mac(result.store, resolved.eval_targets, resolved.eval_attributes)
        outcome = compare(before, after)
        assert after.mac > before.mac
        assert outcome.p_two_sided < 0.05
