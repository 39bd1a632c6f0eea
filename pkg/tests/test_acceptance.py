"""Acceptance suite: one PASS/FAIL line per primary criterion.

Run with ``pytest tests/test_acceptance.py -s`` (or ``python3 tests/test_acceptance.py``)
to see the report lines; under plain ``pytest -v`` they are also written to the
terminal because each criterion prints with output capture disabled.
"""
from __future__ import annotations

import json
import time
from itertools import product

import numpy as np
import pytest

from paravect import attention, circuits, equivariance, freemonad, lawcheck, positional
from paravect.cli import main
from paravect.vect import LinearMap, Permutation, identity, kron, numerical_rank, random_map


def _line(ok: bool, label: str, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} {label}: {detail}"


def criterion_para():
    t0 = time.perf_counter()
    names = ["para.bilinearity", "para.composition_associativity", "para.flatten_functoriality",
             "para.reparam_square", "para.reparam_vertical", "para.reparam_horizontal"]
    results = lawcheck.run_suite(lawcheck.SuiteConfig(seed=0, trials=100), names)
    elapsed = time.perf_counter() - t0
    worst = max(r.residual for r in results)
    ok = len(results) == len(names) and worst <= 1e-10 and elapsed < 5.0
    return ok, f"{len(results)} laws x 100 trials, worst residual {worst:.2e} (<= 1e-10), {elapsed:.2f}s (< 5s)"


def criterion_attention():
    results = lawcheck.run_suite(
        lawcheck.SuiteConfig(seed=0, trials=50),
        ["attention.build_matches_oracle", "attention.composition_stability"],
    )
    build, stab = results
    extra = attention.check_composition_stability(attention.AttnDims(5, 5, 5, 5), trials=5, seed=1)
    ok = build.residual <= 1e-12 and stab.residual <= 1e-10 and extra.residual <= 1e-10
    return ok, (f"build_att vs per-token oracle over 50 dims <= 5: {build.residual:.2e} (<= 1e-12); "
                f"stability {max(stab.residual, extra.residual):.2e} (<= 1e-10)")


def criterion_freemonad():
    units = assoc = fact = 0.0
    exhaustive = additive = True
    configs = 0
    for a, x, N in product(range(1, 4), range(1, 4), range(0, 5)):
        s = freemonad.GradedSpace(x, a, N)
        for r in freemonad.check_monad_laws(s, trials=10, seed=configs):
            if r.name == "freemonad.associativity":
                assoc = max(assoc, r.residual)
            else:
                units = max(units, r.residual)
        exhaustive &= freemonad.check_associativity_exhaustive(s).passed
        additive &= freemonad.check_grade_additivity(s).passed
        fact = max(fact, freemonad.check_identity_monad_factorization(s, trials=5, seed=configs).residual)
        configs += 1
    ok = units == 0.0 and assoc == 0.0 and exhaustive and additive and fact <= 1e-11
    return ok, (f"{configs} (a,x,N) configs: unit {units:.1e}, assoc {assoc:.1e} (exact), "
                f"exhaustive assoc {exhaustive}, grade additivity {additive}, factorization {fact:.2e} (<= 1e-11)")


def criterion_positional():
    rng = np.random.default_rng(0)
    action = max(positional.check_action_laws(positional.AdditiveEncoding(rng.standard_normal(d)), 64).residual
                 for d in (1, 3, 8))
    defects = {d: positional.nonadditivity_witness(positional.SinusoidalEncoding(d), 16)[2] for d in (4, 8, 64)}
    inj = positional.check_injectivity(positional.SinusoidalEncoding(64), 4096).residual
    p = positional.SinusoidalEncoding(8)
    M = rng.standard_normal((8, 8))
    fz = positional.factor_through(p, positional.ExternalEncoding(p.table(64) @ M.T), 64)
    err = float(np.max(np.abs(fz.f.data - M)))
    ok = action <= 1e-12 and all(v > 0.1 for v in defects.values()) and inj > 1e-8 and err <= 1e-8
    dtxt = ", ".join(f"d={d}: {v:.3f}" for d, v in defects.items())
    return ok, (f"action {action:.1e} (<= 1e-12); nonadditivity {dtxt} (> 0.1); "
                f"min distance d=64 N=4096 {inj:.4f} (> 1e-8); factor error {err:.1e} (<= 1e-8)")


def criterion_equivariance():
    rng = np.random.default_rng(0)
    worst, modes = 0.0, set()
    for _ in range(100):
        n, a, b = (int(v) for v in rng.integers(1, 7, size=3))
        r = equivariance.check_equivariance(random_map(b, a, rng), Permutation.random(n, rng))
        worst = max(worst, r.residual)
        modes.add(r.details["mode"])
    causal = kron(LinearMap([[1.0, 0.0], [1.0, 1.0]]), identity(3))
    wit = equivariance.symmetry_breaking_witness(causal, Permutation([1, 0])).residual
    limit = 0.0 if modes == {"exact"} else equivariance.FALLBACK_TOL
    ok = worst <= limit and wit > 0
    return ok, f"100 pairs n <= 6, mode {'/'.join(sorted(modes))}, worst {worst:.1e}; causal witness {wit:.3f} (> 0)"


def criterion_circuits():
    rng = np.random.default_rng(0)
    path = para = 0.0
    counts = []
    for heads in ((), (1,), (2,), (1, 1), (2, 1), (2, 2), (1, 1, 1), (2, 2, 2)):
        m = circuits.random_model(6, 5, 4, heads, 3, rng)
        r = circuits.check_path_sum(m)
        path = max(path, r.residual)
        counts.append(r.details["paths"])
        para = max(para, circuits.circuits_as_para(m).residual)
    excess = 0
    for _ in range(100):
        d_model = int(rng.integers(2, 7))
        d_head = int(rng.integers(1, d_model + 1))
        h = circuits.HeadWeights.random(d_model, d_head, rng)
        excess = max(excess, numerical_rank(circuits.qk_circuit(h)) - d_head,
                     numerical_rank(circuits.ov_circuit(h)) - d_head)
    scores = lawcheck.run_suite(lawcheck.SuiteConfig(seed=0, trials=100), ["circuits.scores_factorization"])[0]
    ok = path <= 1e-10 and para <= 1e-10 and 27 in counts and excess <= 0 and scores.residual <= 1e-11
    return ok, (f"path sum {path:.1e}, as_para {para:.1e} (<= 1e-10, max {max(counts)} paths); "
                f"rank excess {excess} over 100 heads; scores {scores.residual:.1e} (<= 1e-11)")


def criterion_cli(tmp_dir):
    reports = []
    for tag in ("a", "b"):
        out = tmp_dir / f"{tag}.json"
        code = main(["lawcheck", "--seed", "7", "--trials", "20", "--out", str(out)])
        rep = json.loads(out.read_text())
        for c in rep["checks"]:
            c["elapsed_seconds"] = None
        reports.append((code, json.dumps(rep, sort_keys=True)))
    same = reports[0] == reports[1] and reports[0][0] == 0
    fail_code = main(["lawcheck", "--trials", "3", "--tol", "para.bilinearity=1e-30",
                      "--out", str(tmp_dir / "f.json")])
    bad_code = main(["lawcheck", "--tol", "no.such=1", "--out", str(tmp_dir / "g.json")])
    t0 = time.perf_counter()
    default_code = main(["lawcheck", "--out", str(tmp_dir / "default.json")])
    elapsed = time.perf_counter() - t0
    ok = same and fail_code == 1 and bad_code == 2 and default_code == 0 and elapsed < 30.0
    return ok, (f"replay identical {same}; exit codes pass/fail/usage = {default_code}/{fail_code}/{bad_code}; "
                f"default lawcheck {elapsed:.2f}s (< 30s)")


CRITERIA = [
    ("para law suite", criterion_para),
    ("attention morphism", criterion_attention),
    ("truncated free monad", criterion_freemonad),
    ("positional encodings", criterion_positional),
    ("equivariance", criterion_equivariance),
    ("circuits", criterion_circuits),
    ("cli determinism and exit codes", criterion_cli),
]


@pytest.mark.parametrize("label,fn", CRITERIA, ids=[c[0].replace(" ", "_") for c in CRITERIA])
def test_criterion(label, fn, capsys, tmp_path):
    ok, detail = fn(tmp_path) if fn is criterion_cli else fn()
    with capsys.disabled():
        print("\n" + _line(ok, label, detail))
    assert ok, detail


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failures = 0
    for label, fn in CRITERIA:
        if fn is criterion_cli:
            with tempfile.TemporaryDirectory() as d:
                ok, detail = fn(Path(d))
        else:
            ok, detail = fn()
        failures += not ok
        print(_line(ok, label, detail))
    sys.exit(1 if failures else 0)
