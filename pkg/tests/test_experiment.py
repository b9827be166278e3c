import json

import numpy as np
import pytest

from dvine_knockoffs.dgp import DGPSpec, ResponseSpec
from dvine_knockoffs.experiment import (ExperimentConfig, ExperimentResult,
                                        run_experiment)
from dvine_knockoffs.knockoffs import TDCKConfig
from dvine_knockoffs.selection import DTDCKeConfig


def small_config(n_sim=3, seed=5, sampler="second_order_gaussian"):
    return ExperimentConfig(
        dgp=DGPSpec("mvn_ar1", n=80, p=8, rho=0.4),
        response=ResponseSpec(family="gaussian", amplitude=12.0),
        filter=DTDCKeConfig(alpha_kn=0.1, alpha_ebh=0.2, M=2, sampler=sampler,
                            m_lasso=2, cv_folds=3,
                            tdck=TDCKConfig(family_set=("gaussian",))),
        n_sim=n_sim, seed=seed)


def test_single_replication_aggregate():
    cfg = small_config(n_sim=1)
    res = run_experiment(cfg)
    assert len(res.reps) == 1
    rep = res.reps[0]
    assert res.fdr == rep[1]
    assert res.power == rep[2]
    assert res.fdr_se == 0.0


def test_aggregate_matches_replication_mean():
    res = run_experiment(small_config(n_sim=4))
    fdps = [r[1] for r in res.reps]
    powers = [r[2] for r in res.reps]
    assert res.fdr == pytest.approx(np.mean(fdps))
    assert res.power == pytest.approx(np.mean(powers))
    assert res.fdr_se == pytest.approx(np.std(fdps, ddof=1) / 2.0)


def test_worker_count_invariance():
    cfg = small_config(n_sim=4)
    serial = run_experiment(cfg, n_jobs=1)
    threaded = run_experiment(cfg, n_jobs=2)
    assert serial.to_json() == threaded.to_json()


def test_result_json_excludes_timing_and_echoes_config(tmp_path):
    cfg = small_config(n_sim=2)
    res = run_experiment(cfg)
    payload = json.loads(res.to_json())
    assert payload["config"] == cfg.to_dict()
    assert payload["n_completed"] == 2
    assert payload["n_failed"] == 0
    assert all(set(r) == {"rep", "fdp", "power", "n_selected"}
               for r in payload["reps"])
    csv_path = tmp_path / "reps.csv"
    res.to_csv(csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "rep,fdp,power,n_selected,wallclock_ms"
    assert len(lines) == 3


def test_config_json_round_trip(tmp_path):
    cfg = small_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.from_json(path)
    assert back.to_dict() == cfg.to_dict()


def test_tdck_experiment_end_to_end():
    cfg = ExperimentConfig(
        dgp=DGPSpec("mvn_ar1", n=100, p=6, rho=0.5),
        response=ResponseSpec(family="gaussian", amplitude=15.0),
        filter=DTDCKeConfig(alpha_kn=0.2, alpha_ebh=0.4, M=2, sampler="tdck",
                            m_lasso=1, cv_folds=3,
                            tdck=TDCKConfig(family_set=("gaussian",),
                                            indep_test=True)),
        n_sim=2, seed=9)
    res = run_experiment(cfg)
    assert len(res.reps) == 2
    assert 0.0 <= res.fdr <= 1.0
    assert 0.0 <= res.power <= 1.0
