"""Tests for the experiment harness: planning, training, gate, stress."""
import json

import numpy as np
import pytest

import overlap_lab.autodiff as ad
from overlap_lab import harness, model, ph, stats, synth
from overlap_lab.exceptions import (
    DegenerateDataError,
    InsufficientPointsError,
    NumericError,
    ParameterError,
    SweepError,
)


SMOKE = dict(n=256, epochs=2, eval_n=128, param_budget=30_000, log_every=4)


@pytest.fixture(scope="module")
def smoke_uoo():
    return harness.run_condition(harness.ExperimentConfig(
        condition="uoo", **SMOKE))


@pytest.fixture(scope="module")
def smoke_all(smoke_uoo):
    runs = {"uoo": smoke_uoo}
    for cond in ("ode_ablation", "contrastive"):
        runs[cond] = harness.run_condition(harness.ExperimentConfig(
            condition=cond, **SMOKE))
    return runs


# ------------------------------------------------------- capacity planning

def test_plan_counts_match_instantiated_models():
    # the closed-form counters must agree with the real parameter arrays
    plan = harness.plan_capacity(30_000)
    p = model.ModelParams(64, 64, plan.dim, plan.hidden, seed=0)
    assert p.n_params == plan.uoo_params
    c = harness.ContrastiveParams(64, 64, plan.enc_hidden, plan.emb, seed=0)
    assert c.n_params == plan.contrastive_params


def test_plan_500k_reference_point():
    plan = harness.plan_capacity(500_000)
    assert (plan.dim, plan.hidden) == (108, 154)
    assert (plan.emb, plan.enc_hidden) == (64, 439)
    assert plan.uoo_params == 500_027
    assert plan.contrastive_params == 499_839
    assert plan.ns_grid == (9, 12) and not plan.ns_needs_projection
    assert plan.con_grid == (8, 16) and not plan.con_needs_projection


def test_plan_stays_within_five_percent():
    for budget in (30_000, 60_000, 120_000, 500_000):
        plan = harness.plan_capacity(budget)
        for cond in harness.CONDITIONS:
            assert abs(plan.count(cond) - budget) <= 0.05 * budget
        gap = abs(plan.uoo_params - plan.contrastive_params)
        assert gap <= 0.05 * budget


def test_plan_grids_factor_the_widths():
    for budget in (30_000, 120_000, 500_000):
        plan = harness.plan_capacity(budget)
        if not plan.ns_needs_projection:
            assert plan.ns_grid[0] * plan.ns_grid[1] == plan.dim
        assert plan.con_grid[0] * plan.con_grid[1] == 2 * plan.emb


def test_resolve_architecture_honours_overrides():
    cfg = harness.ExperimentConfig(param_budget=30_000, dim=6, hidden=40,
                                   **{k: v for k, v in SMOKE.items()
                                      if k not in ("param_budget",)})
    plan = harness.resolve_architecture(cfg)
    assert plan.dim == 6 and plan.hidden == 40
    p = model.ModelParams(64, 64, 6, 40, seed=0)
    assert plan.uoo_params == p.n_params


def test_plan_rejects_tiny_budget():
    with pytest.raises(ParameterError):
        harness.plan_capacity(10)


# ------------------------------------------------------------------ config

def test_config_roundtrip_and_hash():
    cfg = harness.ExperimentConfig(condition="contrastive", n=128, seed=7)
    again = harness.ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.hash == cfg.hash
    assert harness.ExperimentConfig(seed=8).hash != cfg.hash


def test_config_rejects_unknown_fields():
    d = harness.ExperimentConfig().to_dict()
    d["momentum"] = 0.9
    with pytest.raises(ParameterError):
        harness.ExperimentConfig.from_dict(d)


def test_config_validation():
    with pytest.raises(ParameterError):
        harness.ExperimentConfig(condition="transformer")
    with pytest.raises(ParameterError):
        harness.ExperimentConfig(n=0)
    with pytest.raises(ParameterError):
        harness.ExperimentConfig(lr=0.0)
    with pytest.raises(ParameterError):
        harness.ExperimentConfig(entanglement=1.5)
    with pytest.raises(ParameterError):
        harness.ExperimentConfig(max_dim=3)


# ------------------------------------------------------------- metrics log

def test_metrics_log_roundtrip(tmp_path):
    log = harness.MetricsLog()
    log.append(epoch=0, step=0, task_loss=0.7, topo_loss=-0.1,
               total_loss=0.69, tau=0.0, ns=1.8, b1_total=0.0,
               grad_norm=0.5, flagged=False)
    log.append(epoch=1, step=50, task_loss=0.3, topo_loss=-0.2,
               total_loss=0.28, tau=0.05, ns=1.7, b1_total=1.2,
               grad_norm=12.0, flagged=True)
    path = tmp_path / "m.csv"
    log.to_csv(path)
    back = harness.MetricsLog.from_csv(path)
    assert back == log
    assert back.column("flagged").tolist() == [False, True]


def test_metrics_log_rejects_wrong_columns(tmp_path):
    log = harness.MetricsLog()
    with pytest.raises(ParameterError):
        log.append(epoch=0, step=0)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ParameterError):
        harness.MetricsLog.from_csv(tmp_path / "bad.csv")


# ------------------------------------------------------------ training runs

def test_smoke_run_completes(smoke_uoo):
    r = smoke_uoo
    assert not r.aborted
    assert r.epochs_run == 2
    assert len(r.log) >= 1
    assert 0.0 <= r.final_accuracy <= 1.0
    assert r.ns_values.shape == (SMOKE["eval_n"],)
    assert r.tau_final is not None and r.tau_final >= 0.0
    assert r.b1_total_final is not None and r.b1_total_final >= 0.0
    assert r.n_params == r.plan.uoo_params


def test_smoke_log_respects_cadence(smoke_uoo):
    steps = smoke_uoo.log.column("step")
    assert len(steps) >= 1
    assert all(int(s) % SMOKE["log_every"] == 0 for s in steps)


def test_runs_are_bit_identical():
    cfg = harness.ExperimentConfig(condition="uoo", n=128, epochs=1,
                                   eval_n=64, param_budget=30_000,
                                   log_every=1, seed=4)
    a = harness.run_condition(cfg)
    b = harness.run_condition(cfg)
    assert a.log == b.log
    assert np.array_equal(a.final_cloud, b.final_cloud)
    assert a.final_accuracy == b.final_accuracy
    assert a.tau_final == b.tau_final


def test_b1_recomputes_from_final_cloud(smoke_uoo):
    pd = ph.compute_persistence(ph.rips_filtration(
        ph.PointCloud(smoke_uoo.final_cloud), max_dim=1))
    assert float(pd.lifetimes(1).sum()) == smoke_uoo.b1_total_final


def test_divergent_run_aborts_cleanly():
    cfg = harness.ExperimentConfig(condition="uoo", lr=1e8, n=128, epochs=1,
                                   eval_n=64, param_budget=30_000,
                                   log_every=1, seed=0)
    r = harness.run_condition(cfg)
    assert r.aborted
    assert "diverg" in r.abort_reason
    assert r.final_accuracy is None


def test_ablation_early_stops_on_plateau():
    # the task is exactly representable, so accuracy saturates quickly
    cfg = harness.ExperimentConfig(condition="ode_ablation", n=256, epochs=30,
                                   eval_n=128, param_budget=30_000,
                                   log_every=4, patience=2, seed=0)
    r = harness.run_condition(cfg)
    assert not r.aborted
    assert r.early_stopped
    assert r.epochs_run < 30


def test_all_conditions_match_capacity(smoke_all):
    counts = {c: smoke_all[c].n_params for c in smoke_all}
    assert counts["uoo"] == counts["ode_ablation"]
    budget = SMOKE["param_budget"]
    assert abs(counts["uoo"] - counts["contrastive"]) <= 0.05 * budget


def test_ablation_logs_no_topological_signal(smoke_all):
    topo = smoke_all["ode_ablation"].log.column("topo_loss")
    assert np.all(topo == 0.0)
    assert np.any(smoke_all["uoo"].log.column("topo_loss") != 0.0)


# ------------------------------------------------------------- paired gate

def test_gate_placebo_is_not_significant():
    g = harness.paired_gate([0.5, 0.52, 0.49], [0.5, 0.52, 0.49])
    assert g["p_value"] == 1.0
    assert not g["significant"]
    assert "zero-variance" in g["note"]


def test_gate_detects_clear_separation():
    g = harness.paired_gate([0.9, 0.91, 0.92], [0.5, 0.52, 0.49])
    assert g["significant"]
    assert g["p_value"] < 0.001


def test_gate_single_replicate_gives_no_test():
    g = harness.paired_gate([0.9], [0.5])
    assert g["p_value"] is None
    assert not g["significant"]
    assert "single replicate" in g["note"]


def test_gate_is_one_sided():
    # clearly worse must not pass
    g = harness.paired_gate([0.4, 0.41, 0.42], [0.9, 0.91, 0.92])
    assert not g["significant"]
    assert g["p_value"] > 0.95


# ----------------------------------------------------------------- run_poc

@pytest.fixture(scope="module")
def poc_smoke(tmp_path_factory):
    out = tmp_path_factory.mktemp("poc")
    rep = harness.run_poc(seeds=(0,), base=harness.ExperimentConfig(**SMOKE),
                          out_dir=out)
    return rep, out


def test_poc_emits_a_gate(poc_smoke):
    rep, _ = poc_smoke
    assert rep["gate"] in ("PROCEED", "TERMINATE")
    assert rep["gate_test"]["comparison"] == (
        "fused vs separable, zero-shot transfer")
    assert any("1 seed" in n for n in rep["notes"])
    assert rep["ordering"] is not None
    assert isinstance(rep["ordering"]["holds"], bool)


def test_poc_uses_disjoint_transfer_families(poc_smoke):
    rep, _ = poc_smoke
    train, novel = synth.transfer_pair(0)
    assert rep["families"] == {"train": [train], "novel": [novel]}
    assert train != novel


def test_poc_summaries_are_complete(poc_smoke):
    rep, _ = poc_smoke
    for cond in harness.CONDITIONS:
        entry = rep["conditions"][cond]
        assert entry["holdout_accuracy"]["mean"] is not None
        assert entry["transfer_accuracy"]["mean"] is not None
        assert entry["aborted_seeds"] == []


def test_poc_writes_run_directories(poc_smoke):
    rep, out = poc_smoke
    for cond in harness.CONDITIONS:
        d = out / f"{cond}_seed0"
        cfg = json.loads((d / "config.json").read_text())
        assert cfg["config"]["condition"] == cond
        assert cfg["config_hash"]
        log = harness.MetricsLog.from_csv(d / "metrics.csv")
        assert len(log) >= 1
        assert (d / "diagrams" / "final.csv").exists()
        run_report = json.loads((d / "report.json").read_text())
        assert run_report["condition"] == cond
        assert "wall_time" not in run_report


def test_poc_report_is_canonical_and_reproducible(poc_smoke, tmp_path):
    rep, out = poc_smoke
    first = (out / "report.json").read_bytes()
    # no volatile fields allowed in the report payload
    assert b"wall_time" not in first
    assert json.loads(first)["gate"] == rep["gate"]
    rep2 = harness.run_poc(seeds=(0,),
                           base=harness.ExperimentConfig(**SMOKE),
                           out_dir=tmp_path)
    assert (tmp_path / "report.json").read_bytes() == first
    assert rep2["gate"] == rep["gate"]


def test_poc_withholds_gate_on_abort(tmp_path):
    base = harness.ExperimentConfig(n=128, epochs=1, eval_n=64, lr=1e8,
                                    param_budget=30_000, log_every=1)
    rep = harness.run_poc(seeds=(0,), base=base, conditions=("uoo",),
                          out_dir=tmp_path)
    assert rep["aborted"]
    assert rep["gate"] is None
    assert any("withheld" in n for n in rep["notes"])
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["gate"] is None


def test_poc_seed_validation():
    with pytest.raises(ParameterError):
        harness.run_poc(seeds=())
    with pytest.raises(ParameterError):
        harness.run_poc(seeds=(1, 1))
    with pytest.raises(ParameterError):
        harness.run_poc(seeds=(0,), conditions=("mlp",))


# ------------------------------------------------------------- alpha sweep

@pytest.fixture(scope="module")
def sweep_smoke():
    base = harness.ExperimentConfig(n=128, epochs=1, eval_n=64,
                                    param_budget=30_000, log_every=2)
    return harness.alpha_sweep([0.0, 0.05, 0.5], seeds=(0,), base=base,
                               draws=200)


def test_sweep_structure(sweep_smoke):
    rep = sweep_smoke
    assert [e["alpha"] for e in rep["per_alpha"]] == [0.0, 0.05, 0.5]
    for e in rep["per_alpha"]:
        assert e["n_success"] == 1
        assert e["ns_mean"] is not None
        hist = e["ns_histogram"]
        dens = np.asarray(hist["density"])
        edges = np.asarray(hist["bin_edges"])
        assert abs(float((dens * np.diff(edges)).sum()) - 1.0) < 1e-9


def test_sweep_label_matches_detection(sweep_smoke):
    rep = sweep_smoke
    if rep["kappa_star"] is None:
        assert rep["label"] == "tuning_parameter"
    else:
        assert rep["label"] == "phase_transition"
    assert "c_proxy" in rep
    assert "proxy" in rep["c_proxy"]["label"]


def test_sweep_notes_thin_protocols(sweep_smoke):
    notes = " ".join(sweep_smoke["notes"])
    assert "3 alpha" in notes or "below" in notes


def test_sweep_input_validation():
    with pytest.raises(ParameterError):
        harness.alpha_sweep([0.1, 0.2])
    with pytest.raises(ParameterError):
        harness.alpha_sweep([0.1, 0.1, 0.1])
    with pytest.raises(ParameterError):
        harness.alpha_sweep([-0.1, 0.1, 0.2])


def test_sweep_raises_when_too_few_alphas_survive():
    base = harness.ExperimentConfig(n=128, epochs=1, eval_n=64, lr=1e8,
                                    param_budget=30_000, log_every=1)
    with pytest.raises(SweepError):
        harness.alpha_sweep([0.01, 0.1, 1.0], seeds=(0,), base=base)


# --------------------------------------------------- changepoint machinery

def test_running_median_reference():
    out = harness.running_median([5, 1, 4, 2, 8, 3, 9], 5)
    assert out.tolist() == [4.0, 3.0, 4.0, 3.0, 4.0, 5.5, 8.0]
    with pytest.raises(ParameterError):
        harness.running_median([1, 2, 3], 4)


def test_kappa_double_star_finds_planted_drop():
    ns = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
    tau = [0.9, 1.0, 0.95, 1.05, 1.0, 0.1, 0.05, 0.08, 0.06, 0.04]
    val, note = harness._kappa_double_star(ns, tau)
    assert val == 1.2
    assert note is None


def test_kappa_double_star_ignores_shallow_drop():
    ns = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
    tau = [1.0, 1.0, 1.0, 1.0, 1.0, 0.72, 0.7, 0.71, 0.7, 0.7]
    val, note = harness._kappa_double_star(ns, tau)
    assert val is None
    assert "below 50%" in note


def test_kappa_double_star_flat_series():
    ns = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
    val, note = harness._kappa_double_star(ns, [1.0] * 10)
    assert val is None and note is None
    val, note = harness._kappa_double_star([1.0, 2.0], [1.0, 0.0])
    assert val is None and note is not None


# ------------------------------------------------------------ stress tests

@pytest.fixture(scope="module")
def stress_reports(smoke_uoo):
    return {mode: harness.stress_test(smoke_uoo, mode, stress_epochs=4,
                                      n_checkpoints=4)
            for mode in harness.STRESS_MODES}


def test_stress_trajectories_are_aligned(stress_reports):
    for mode, rep in stress_reports.items():
        k = len(rep["positions"])
        assert k == len(rep["checkpoints"])
        assert k == len(rep["ns_trajectory"])
        assert k == len(rep["b1_trajectory"])
        assert k == len(rep["accuracy_trajectory"])
        assert k == len(rep["tau_trajectory"])
        assert rep["mode"] == mode
        assert isinstance(rep["collapse"], bool)


def test_stress_ood_shift_zero_is_baseline(stress_reports):
    rep = stress_reports["ood"]
    assert rep["position_kind"] == "shift"
    assert rep["positions"] == [0, 1, 2, 5]
    assert rep["checkpoints"][0] == rep["baseline"]


def test_stress_training_modes_start_from_trained_state(stress_reports):
    for mode in ("alpha_decay", "over_entangle"):
        rep = stress_reports[mode]
        assert rep["position_kind"] == "epoch"
        assert rep["positions"][0] == 0
        assert rep["checkpoints"][0] == rep["baseline"]
        assert rep["positions"][-1] <= 4


def test_stress_over_entangle_notes_the_forcing(stress_reports):
    notes = " ".join(stress_reports["over_entangle"]["notes"])
    assert "x10" in notes


def test_stress_leaves_the_source_run_untouched(smoke_uoo, stress_reports):
    # training modes clone the parameters; re-checkpointing the original
    # model must still equal the recorded baseline
    for mode in ("alpha_decay", "over_entangle"):
        rep = harness.stress_test(smoke_uoo, mode, stress_epochs=1,
                                  n_checkpoints=1)
        assert rep["baseline"] == stress_reports[mode]["baseline"]


def test_stress_input_validation(smoke_all):
    with pytest.raises(ParameterError):
        harness.stress_test(smoke_all["contrastive"], "ood")
    with pytest.raises(ParameterError):
        harness.stress_test(smoke_all["uoo"], "meteor")
    bad = harness.run_condition(harness.ExperimentConfig(
        condition="uoo", lr=1e8, n=128, epochs=1, eval_n=64,
        param_budget=30_000, log_every=1))
    with pytest.raises(ParameterError):
        harness.stress_test(bad, "ood")


# ----------------------------------------------------------- falsification

def test_tost_falsification_identical_groups():
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 1.0, 200)
    out = harness.tost_falsification(a, a.copy())
    assert out["falsified"] is True
    assert out["tost"]["equivalent"] is True
    assert out["sample_size"]["formula_n"] == 310
    assert out["sample_size"]["paired_design_reference_n"] == 192
    assert out["sample_size"]["discrepant"] is True


def test_tost_falsification_separated_groups():
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 1.0, 200)
    b = rng.normal(1.0, 1.0, 200)
    out = harness.tost_falsification(a, b)
    assert out["falsified"] is False


def test_tost_falsification_flags_underpower():
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 1.0, 5)
    b = rng.normal(1.0, 1.0, 5)
    out = harness.tost_falsification(a, b)
    assert out["underpowered"] is True
    assert any("inconclusive" in n for n in out["notes"])


# ----------------------------------------------------- trajectory to cloud

def test_trajectory_cloud_recovers_planted_circle():
    rng = np.random.default_rng(3)
    theta = rng.uniform(0, 2 * np.pi, 64)
    circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    traj = np.stack([circle + 0.02 * k for k in range(3)])
    pc, info = harness.trajectory_to_cloud(traj, with_info=True)
    assert info["variance_preserved"] > 0.99
    assert info["components"] == 2
    pd = ph.compute_persistence(ph.rips_filtration(pc, max_dim=1))
    lifetimes = np.sort(pd.lifetimes(1))
    assert lifetimes[-1] > 1.0
    assert lifetimes[-2] < 0.1 if len(lifetimes) > 1 else True


def test_trajectory_cloud_subsamples_deterministically():
    rng = np.random.default_rng(0)
    big = rng.normal(size=(1, 500, 4))
    pc, info = harness.trajectory_to_cloud(big, max_points=192,
                                           with_info=True)
    assert info["subsampled"] is True
    assert pc.n == 192
    pc2 = harness.trajectory_to_cloud(big, max_points=192)
    assert np.array_equal(pc.coords, pc2.coords)


def test_trajectory_cloud_reports_partial_variance():
    rng = np.random.default_rng(5)
    noise = rng.normal(size=(1, 100, 32))
    _, info = harness.trajectory_to_cloud(noise, with_info=True)
    assert info["variance_preserved"] < 0.9


def test_trajectory_cloud_accepts_ode_output():
    p = model.ModelParams(3, 4, 6, 8, seed=0)
    z0 = model.entangle(np.random.default_rng(1).normal(size=(12, 3)),
                        np.random.default_rng(2).normal(size=(12, 4)), p)
    res = model.ode_integrate(ad.Tensor(z0.array), p, np.linspace(0, 1, 5))
    pc = harness.trajectory_to_cloud(res)
    assert pc.n >= 4
    assert np.all(np.isfinite(pc.coords))


def test_trajectory_cloud_rejects_degenerate_input():
    with pytest.raises(InsufficientPointsError):
        harness.trajectory_to_cloud(np.zeros((1, 3, 2)) + np.arange(6).reshape(1, 3, 2))
    with pytest.raises(DegenerateDataError):
        harness.trajectory_to_cloud(np.ones((2, 8, 3)))
    bad = np.ones((1, 8, 3))
    bad[0, 2, 1] = np.nan
    with pytest.raises(NumericError):
        harness.trajectory_to_cloud(bad)


# --------------------------------------------------------- canonical JSON

def test_canonical_json_is_stable_and_clean():
    obj = {"b": np.float64(1.5), "a": (1, 2), "c": float("nan"),
           "d": np.int64(3), "e": np.bool_(True)}
    text = harness.canonical_json(obj)
    assert text == '{"a":[1,2],"b":1.5,"c":null,"d":3,"e":true}\n'
    assert harness.canonical_json(obj) == text


def test_write_json_strips_live_objects(tmp_path, smoke_uoo):
    payload = {"gate": "TERMINATE", "runs": {("uoo", 0): smoke_uoo},
               "value": np.float32(2.0)}
    path = tmp_path / "r.json"
    harness.write_json(path, payload)
    back = json.loads(path.read_text())
    assert "runs" not in back
    assert back == {"gate": "TERMINATE", "value": 2.0}


# ------------------------------------------------------ contrastive pieces

def test_contrastive_params_clone_is_independent():
    p = harness.ContrastiveParams(8, 8, 16, 4, seed=0)
    q = p.clone()
    q.parameters()[0].array += 1.0
    assert not np.array_equal(p.parameters()[0].array,
                              q.parameters()[0].array)
    names = [n for n, _ in p.named_parameters()]
    assert len(names) == len(set(names))


def test_alignment_loss_prefers_matched_pairs():
    rng = np.random.default_rng(0)
    e = rng.normal(size=(16, 8))
    ex = ad.Tensor(e)
    ey = ad.Tensor(e + 0.01 * rng.normal(size=(16, 8)))
    matched = float(harness.alignment_loss(ex, ey).array)
    perm = rng.permutation(16)
    mismatched = float(harness.alignment_loss(
        ex, ad.Tensor(ey.array[perm])).array)
    assert matched < mismatched


def test_alignment_loss_is_differentiable():
    rng = np.random.default_rng(1)
    with ad.Tape() as tape:
        ex = ad.Tensor(rng.normal(size=(8, 4)), requires_grad=True)
        ey = ad.Tensor(rng.normal(size=(8, 4)), requires_grad=True)
        loss = harness.alignment_loss(ex, ey)
        grads = tape.backward(loss)
    assert id(ex) in grads and id(ey) in grads
    assert np.all(np.isfinite(grads[id(ex)]))
