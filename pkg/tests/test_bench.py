import math

import numpy as np
import pytest

from spdpeg import bench
from spdpeg.trace import TraceRecord, read_trace_csv, write_trace_csv


def small_core(**overrides):
    core = bench.rate_core("convex", d=8, n=40, iters=300, eval_every=100)
    core["config"].update(overrides)
    return core


def test_trace_csv_roundtrip(tmp_path):
    records = [TraceRecord(10, 0.125, 0.5, 0.4, 0.9, 1e-3, 0.2),
               TraceRecord(20, 0.25, 0.3333333333333333, 0.3, 1.0, 0.0, 0.31)]
    path = tmp_path / "trace_spdpeg_seed0.csv"
    write_trace_csv(path, records)
    assert read_trace_csv(path) == records
    with open(path, "rb") as fh:
        assert fh.read().startswith(b"schema_version,iteration,")


def test_trace_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "trace_spdpeg_seed0.csv"
    path.write_text("iteration,objective\n1,2.0\n")
    with pytest.raises(ValueError, match="header"):
        read_trace_csv(path)


def test_fit_rate_recovers_power_law():
    t = np.arange(50, 5001, 50)
    fit = bench.fit_rate(t, 3.0 * t ** -0.7, (100, None))
    assert fit.slope == pytest.approx(-0.7, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.window == (100, 5000)


def test_fit_rate_drops_nonpositive_and_reports_window():
    t = np.array([100, 200, 400, 800, 1600])
    vals = np.array([1.0, 0.5, -1.0, 0.25, 0.125])
    fit = bench.fit_rate(t, vals)
    assert fit.window == (100, 1600)
    with pytest.raises(ValueError, match="window"):
        bench.fit_rate(t, -np.ones(5))


def test_reference_optimum_cached(tmp_path):
    core = small_core()
    train, _, problem, _ = bench.build_all(core)
    cache = tmp_path / "cache.json"
    a = bench.reference_optimum(problem, train, 0.1, max_iters=50_000,
                                cache_path=cache)
    assert cache.exists()
    b = bench.reference_optimum(problem, train, 0.1, max_iters=50_000,
                                cache_path=cache)
    assert a.objective == b.objective and a.iterations == b.iterations
    np.testing.assert_array_equal(a.x, b.x)


def test_reference_matches_convex_solver():
    cvxpy = pytest.importorskip("cvxpy")
    core = small_core()
    train, _, problem, _ = bench.build_all(core)
    ref = bench.reference_optimum(problem, train, 0.1)
    A = np.zeros((train.n_samples, train.dimension))
    A[train.row_ids, train.indices] = train.data
    L = problem.penalty.to_dense()
    x = cvxpy.Variable(train.dimension)
    margins = cvxpy.multiply(train.labels, A @ x)
    objective = (cvxpy.sum(cvxpy.logistic(-margins)) / train.n_samples
                 + problem.r1.weight * cvxpy.norm1(x)
                 + problem.r2.weight * cvxpy.norm1(L @ x))
    cp_problem = cvxpy.Problem(cvxpy.Minimize(objective))
    cp_problem.solve()
    assert ref.objective == pytest.approx(cp_problem.value, abs=1e-6)
    assert ref.objective >= cp_problem.value - 1e-9


def test_build_data_split_deterministic():
    cfg = {"synthetic": {"kind": "fused-signal", "d": 6, "n": 30, "noise": 0.1,
                         "seed": 4}, "split": True, "train_fraction": 0.8,
           "split_seed": 9}
    train_a, test_a, _ = bench.build_data(cfg)
    train_b, test_b, _ = bench.build_data(cfg)
    assert train_a.n_samples == 24 and test_a.n_samples == 6
    np.testing.assert_array_equal(train_a.data, train_b.data)
    np.testing.assert_array_equal(test_a.labels, test_b.labels)


def test_build_penalty_sources(tmp_path):
    cfg = {"synthetic": {"kind": "graph-logistic", "d": 6, "n": 30, "noise": 0.1,
                         "seed": 4}}
    train, _, graph = bench.build_data(cfg)
    fused = bench.build_penalty({"source": "fused"}, train, graph)
    assert fused.shape == (5, 6)
    gm = bench.build_penalty({"source": "synthetic-graph"}, train, graph)
    assert gm.shape == (len(graph.edges), 6)
    with pytest.raises(ValueError, match="synthetic graph"):
        bench.build_penalty({"source": "synthetic-graph"}, train, None)
    pm = bench.build_penalty({"source": "precision", "ridge": 0.1,
                              "threshold": 1e-4}, train, None)
    assert pm.n_cols == 6
    from spdpeg.penalties import save_penalty
    path = tmp_path / "pen.txt"
    save_penalty(path, fused)
    fm = bench.build_penalty({"source": "file", "path": str(path)}, train, None)
    np.testing.assert_array_equal(fm.to_dense(), fused.to_dense())


def test_build_problem_ggrlr_folds_quadratic():
    core = bench.rate_core("sc", d=6, n=30, iters=10)
    train, _, problem, derived = bench.build_all(core)
    assert problem.r1.kind == "none"
    assert problem.ridge == problem.strong_convexity_mu == 1e-2
    assert derived["lipschitz_L"] == pytest.approx(
        derived["lipschitz_data"] + 1e-2)


def test_execute_run_and_manifest_replay(tmp_path):
    core = small_core()
    out = tmp_path / "out"
    manifest = bench.run_suite(core, ("spdpeg", "slinadmm"), [0, 1], out)
    mpath = bench.write_manifest(manifest, out)
    originals = {e["trace_file"]: (out / e["trace_file"]).read_bytes()
                 for e in manifest["runs"]}
    assert len(originals) == 4
    replay_dir = tmp_path / "replay"
    written = bench.replay_manifest(mpath, replay_dir)
    assert len(written) == 4
    for entry in manifest["runs"]:
        assert (replay_dir / entry["trace_file"]).read_bytes() \
            == originals[entry["trace_file"]]


def test_replay_detects_drift(tmp_path):
    core = small_core()
    out = tmp_path / "out"
    manifest = bench.run_suite(core, ("spdpeg",), [0], out)
    manifest["runs"][0]["final_objective"] += 1e-3
    mpath = bench.write_manifest(manifest, out)
    with pytest.raises(ValueError, match="drifted"):
        bench.replay_manifest(mpath, tmp_path / "replay")


def test_replay_detects_derived_mismatch(tmp_path):
    core = small_core()
    out = tmp_path / "out"
    manifest = bench.run_suite(core, ("spdpeg",), [0], out)
    manifest["derived"]["L_tilde"] *= 2.0
    mpath = bench.write_manifest(manifest, out)
    with pytest.raises(ValueError, match="L_tilde"):
        bench.replay_manifest(mpath, tmp_path / "replay")


def test_manifest_records_everything_needed(tmp_path):
    core = small_core()
    manifest = bench.run_suite(core, ("spdpeg",), [3], tmp_path)
    assert manifest["core"]["config"]["gamma"] == 0.1
    for key in ("lipschitz_data", "lipschitz_L", "sigma_max_FtF", "L_tilde"):
        assert key in manifest["derived"]
    entry = manifest["runs"][0]
    assert entry["seed"] == 3
    assert len(entry["wall_seconds"]) == len(
        read_trace_csv(tmp_path / entry["trace_file"]))


def test_final_objective_consistent_with_averages(tmp_path):
    core = small_core()
    manifest = bench.run_suite(core, ("spdpeg",), [0], tmp_path)
    entry = manifest["runs"][0]
    train, _, problem, _ = bench.build_all(core)
    recomputed = bench.objective_value(problem, train,
                                       np.asarray(entry["final_x_avg"]))
    assert abs(recomputed - entry["final_objective"]) <= 1e-10


def test_aggregate_traces_mean_and_stderr(tmp_path):
    recs = {0: [TraceRecord(5, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0)],
            1: [TraceRecord(5, 0.0, 3.0, 0.0, 1.0, 0.0, 0.0)]}
    paths = []
    for seed, rec in recs.items():
        p = tmp_path / f"trace_spdpeg_seed{seed}.csv"
        write_trace_csv(p, rec)
        paths.append(p)
    long_rows, agg_rows = bench.aggregate_traces(bench.collect_trace_files(paths))
    obj = [r for r in agg_rows if r[1] == "objective"]
    assert obj[0][3] == pytest.approx(2.0)
    assert obj[0][4] == pytest.approx(np.std([1.0, 3.0], ddof=1) / math.sqrt(2))
    assert obj[0][5] == 2
    single_long, single_agg = bench.aggregate_traces(
        bench.collect_trace_files(paths[:1]))
    assert all(r[4] == 0.0 for r in single_agg)


def test_aggregate_traces_groups_by_solver(tmp_path):
    for solver in ("spdpeg", "eg-full"):
        write_trace_csv(tmp_path / f"trace_{solver}_seed0.csv",
                        [TraceRecord(5, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0)])
    _, agg = bench.aggregate_traces(
        bench.collect_trace_files(tmp_path.glob("trace_*.csv")))
    assert {r[0] for r in agg} == {"spdpeg", "eg-full"}


def test_collect_rejects_foreign_filenames(tmp_path):
    p = tmp_path / "results.csv"
    p.write_text("x\n")
    with pytest.raises(ValueError, match="does not follow"):
        bench.collect_trace_files([p])


def test_step_inequality_sweep_small():
    rep = bench.step_inequality_sweep(d=8, n=40, steps=60, n_references=3,
                                      mode="stochastic", seed=1)
    assert rep["passed"] and rep["min_relative_slack"] >= -1e-8
    det = bench.step_inequality_sweep(d=8, n=40, steps=30, n_references=2,
                                      mode="deterministic", seed=1)
    assert det["passed"]
    with pytest.raises(ValueError, match="small instances"):
        bench.step_inequality_sweep(d=200, n=50, steps=10)


def test_step_inequality_sweep_flags_inflated_steps():
    rep = bench.step_inequality_sweep(d=8, n=40, steps=30, n_references=2,
                                      seed=1, step_scale=100.0)
    assert rep["coefficient_negative_steps"] >= 1


def test_max_workers_env(monkeypatch):
    monkeypatch.delenv("SPDPEG_THREADS", raising=False)
    assert bench.max_workers(8) == 1
    monkeypatch.setenv("SPDPEG_THREADS", "4")
    assert bench.max_workers(8) == 4
    assert bench.max_workers(2) == 2
    monkeypatch.setenv("SPDPEG_THREADS", "junk")
    assert bench.max_workers(8) == 1


def test_run_suite_parallel_matches_serial(tmp_path, monkeypatch):
    core = small_core()
    serial_dir = tmp_path / "serial"
    monkeypatch.setenv("SPDPEG_THREADS", "1")
    serial = bench.run_suite(core, ("spdpeg",), [0, 1], serial_dir)
    parallel_dir = tmp_path / "parallel"
    monkeypatch.setenv("SPDPEG_THREADS", "2")
    parallel = bench.run_suite(core, ("spdpeg",), [0, 1], parallel_dir)
    for a, b in zip(serial["runs"], parallel["runs"]):
        assert a["final_objective"] == b["final_objective"]
        assert a["final_x_avg"] == b["final_x_avg"]
