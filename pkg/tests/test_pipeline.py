import numpy as np
import pytest

import archimax as ax
from archimax import nn, pipeline
from archimax.errors import ConfigError

NSD3 = ax.NsdStdf((1.0, 1.0, 1.0), 0.69, mc_samples=50_000)


def _small_config(**kw):
    base = dict(
        seed=11,
        stdf_train=nn.TrainConfig(max_iters=400, seed=0),
        gen_train=nn.TrainConfig(max_iters=500, seed=0),
        n_r=40, n_z=30,
        max_alternations=1,
        cvm_samples=400, cvm_mc=1500,
        block=pipeline.BlockConfig(mc=1024, n_null=40),
    )
    base.update(kw)
    return pipeline.FitConfig(**base)


def test_fit_config_from_dict_round_trip_and_validation():
    cfg = pipeline.FitConfig.from_dict({
        "seed": 3,
        "block": {"forced_k": 10, "r_set": [2, 3]},
        "stdf_train": {"max_iters": 5},
        "cvm_tolerance": 0.5,
    })
    assert cfg.block.forced_k == 10
    assert cfg.block.r_set == (2, 3)
    assert cfg.stdf_train.max_iters == 5
    with pytest.raises(ConfigError):
        pipeline.FitConfig.from_dict({"unknown_key": 1})
    with pytest.raises(ConfigError):
        pipeline.FitConfig.from_dict({"block": {"bogus": 2}})


def test_init_ev_ev_data_keeps_all_blocks():
    # synthetic extreme-value input: phi = exp with an NSD spectral part
    synth = ax.synth_dataset("gumbel", 1.0, NSD3, 128, seed=21)
    sel = ax.select_block_size(synth.data.values, mc=1024, n_null=40, seed=5)
    assert sel.passed
    assert sel.k == 128


def test_init_ev_forced_block_respected():
    synth = ax.synth_dataset("clayton", 2.0, NSD3, 64, seed=22)
    cfg = _small_config(block=pipeline.BlockConfig(forced_k=16),
                        stdf_train=nn.TrainConfig(max_iters=30, seed=0))
    model = pipeline.init_ev(synth.data, cfg)
    assert isinstance(model, ax.SpectralModel)
    assert model.d == 3


def test_init_parametric_single_family_unconditional():
    synth = ax.synth_dataset("clayton", 2.0, NSD3, 200, seed=23)
    cfg = _small_config(stdf_train=nn.TrainConfig(max_iters=150, seed=0),
                        block=pipeline.BlockConfig(forced_k=40))
    res = pipeline.init_parametric(synth.data, ["clayton"], cfg)
    assert res.family == "clayton"
    assert res.theta > 0


def test_init_parametric_tau_ell_one_fallback():
    # a comonotone spectral model drives tau_l to 1; theta then falls back
    # to the near-independence parameter
    rng = np.random.default_rng(0)
    col = rng.random(size=(200, 1))
    data = np.repeat(col, 3, axis=1) + rng.normal(0, 1e-9, size=(200, 3))
    spectral = ax.SpectralModel(d=3, pool=np.full((1, 3), 1.0 / 3.0))
    cfg = _small_config()
    res = pipeline.init_parametric(data, ["clayton", "gumbel"], cfg,
                                   spectral=spectral)
    assert res.tau_ell > 0.9
    assert res.theta == pytest.approx(
        {"clayton": ax.theta_from_tau("clayton", 1e-3),
         "gumbel": ax.theta_from_tau("gumbel", 1e-3)}[res.family], rel=1e-6)


def test_init_parametric_selects_clayton_on_clayton_nsd():
    picks = []
    for rep in range(10):
        synth = ax.synth_dataset("clayton", 2.0, NSD3, 400, seed=300 + rep)
        cfg = _small_config(
            seed=rep,
            stdf_train=nn.TrainConfig(max_iters=500, seed=rep),
            block=pipeline.BlockConfig(forced_k=80),
        )
        res = pipeline.init_parametric(synth.data, ["clayton", "gumbel", "joe"],
                                       cfg)
        picks.append(res.family)
    assert picks.count("clayton") >= 8


def test_fit_alternation_cap_and_diagnostics():
    synth = ax.synth_dataset("clayton", 2.0, NSD3, 150, seed=24)
    cfg = _small_config(max_alternations=1,
                        block=pipeline.BlockConfig(forced_k=30))
    res = pipeline.fit(synth.data, cfg)
    alts = [dg for dg in res.diagnostics if dg["stage"].startswith("alternation")]
    assert len(alts) == 1
    summary = res.diagnostics[-1]
    assert summary["stage"] == "summary"
    assert summary["block_k"] == 30
    assert "moment_penalty" in summary and summary["moment_penalty"] >= 0
    assert "kendall_mse" in summary and summary["kendall_mse"] >= 0
    assert len(summary["cvm_trace"]) == 1


def test_fit_infinite_tolerance_single_alternation():
    synth = ax.synth_dataset("clayton", 2.0, NSD3, 150, seed=25)
    cfg = _small_config(max_alternations=3, cvm_tolerance=np.inf,
                        block=pipeline.BlockConfig(forced_k=30))
    res = pipeline.fit(synth.data, cfg)
    alts = [dg for dg in res.diagnostics if dg["stage"].startswith("alternation")]
    assert len(alts) == 1


def test_fit_deterministic_given_seed():
    synth = ax.synth_dataset("clayton", 2.0, NSD3, 120, seed=26)
    cfg = _small_config(block=pipeline.BlockConfig(forced_k=24),
                        stdf_train=nn.TrainConfig(max_iters=120, seed=0),
                        gen_train=nn.TrainConfig(max_iters=150, seed=0))
    res1 = pipeline.fit(synth.data, cfg)
    res2 = pipeline.fit(synth.data, cfg)
    a = ax.sample_archimax(res1.model, 100, 5)
    b = ax.sample_archimax(res2.model, 100, 5)
    np.testing.assert_array_equal(a, b)
