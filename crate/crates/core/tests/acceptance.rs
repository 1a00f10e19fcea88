//! Acceptance suite. Runs every criterion in turn, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.
//!
//! cargo test --release --test acceptance

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use alrite::baseline::OlsTLearner;
use alrite::data::{generate_acic_like, generate_two_cluster_toy, split, AcicProtocol, IhdpConfig};
use alrite::experiment::{
    ensemble_curves, prepare, run_sweep, score_candidates, select_per_proxy, DatasetSource, ExperimentConfig,
    SearchSpace,
};
use alrite::learner::{
    alrite_fit, alrite_predict, eta_sensitivity_check, lambda_grid, member_weights, AlriteModel, EnsembleMode,
    EnsembleModel, RankedPipeline,
};
use alrite::linalg::Matrix;
use alrite::metrics::{
    bound_m1, bound_m2, bound_m3, collapsed_pairs_toy, lemma4_sanity, pehe, projection_counter_example, Lemma4Outcome,
    LipschitzSource,
};
use alrite::pipeline::{factual_mse, PipelineHyperparams, Role};
use alrite::propensity::{train_propensity, PropensitySpec, DEFAULT_CLIP};
use alrite::rng::rng_from_seed;
use alrite::selection::{
    average_ranks, dcg, kendall, proxy_score, spearman, CandidatePredictions, ProxyKind, ValidationContext,
};
use alrite::twin::{cross_pipeline_weights, mirror_twins, DistanceStats};
use common::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs()))
    } else {
        Ok(())
    }
}

// 1: loss gradients against central differences
fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let errs = compound_gradient_errors(&tiny_problem(seed));
        let more = [mlp_gradient_error(seed), propensity_gradient_error(seed)];
        for e in errs.into_iter().chain(more) {
            worst = worst.max(e);
        }
    }
    within(Duration::from_secs(30), start)?;
    check(
        worst < 1e-4,
        format!("worst relative error {worst:.2e} over 50 instances"),
    )
}

// 2: twin search against exhaustive search
fn twin_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(2);
    for inst in 0..100 {
        let n = rng.random_range(2..=1000);
        let d = rng.random_range(1..=6);
        let x = if inst % 3 == 0 {
            // integer coordinates to provoke distance ties
            Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(0..4) as f64).collect()).unwrap()
        } else {
            random_matrix(&mut rng, n, d)
        };
        let other = random_matrix(&mut rng, n, d.max(2) - 1);
        let p: f64 = rng.random_range(0.1..0.9);
        let mut t: Vec<u8> = (0..n).map(|_| rng.random_bool(p) as u8).collect();
        t[0] = 0;
        t[n - 1] = 1;

        let map = mirror_twins(&x, &t).map_err(|e| e.to_string())?;
        let (idx, w) = brute_force_twins(&x, &t);
        if map.twin_index != idx || map.weight != w {
            return Err(format!("instance {inst}: mirror twins differ from oracle"));
        }
        if map.weight.iter().map(|&v| v as usize).sum::<usize>() != n {
            return Err(format!("instance {inst}: weights do not sum to n"));
        }
        let cross = cross_pipeline_weights(&x, &other, &t).map_err(|e| e.to_string())?;
        let (_, w_other) = brute_force_twins(&other, &t);
        let want: Vec<u32> = (0..n).map(|i| if t[i] == 0 { w_other[i] } else { w[i] }).collect();
        if cross != want {
            return Err(format!("instance {inst}: cross-pipeline weights differ from oracle"));
        }
        if cross.iter().map(|&v| v as usize).sum::<usize>() != n {
            return Err(format!("instance {inst}: cross weights do not sum to n"));
        }
    }
    within(Duration::from_secs(60), start)?;
    Ok("100 instances identical to exhaustive search".into())
}

// 3: PEHE bounds on linear instances with known Lipschitz constant
fn bound_suite() -> Outcome {
    let start = Instant::now();
    let mut min_slack = [f64::INFINITY; 4];
    for seed in 0..100 {
        let inst = linear_instance(seed, 100, 2, 0.1);
        let p0 = train_linear(&inst, Role::ControlDriven, 20, seed);
        let p1 = train_linear(&inst, Role::TreatmentDriven, 20, seed + 1000);
        let l = LipschitzSource::Known(truth_lipschitz(&inst, &[&p0, &p1]));
        let (d, g) = (&inst.dataset, &inst.truth);
        let reports = [
            bound_m1(&p0, d, g, l),
            bound_m1(&p1, d, g, l),
            bound_m2(&p0, &p1, d, g, l),
            bound_m3(&p0, &p1, d, g, l, p0_gamma(), p0_gamma()),
        ];
        for (k, r) in reports.into_iter().enumerate() {
            let r = r.map_err(|e| format!("seed {seed}: {e}"))?;
            if !r.certified {
                return Err(format!("seed {seed}: bound {k} not certified"));
            }
            min_slack[k] = min_slack[k].min(r.slack.expect("known L"));
        }
    }
    within(Duration::from_secs(300), start)?;
    let ok = min_slack.iter().all(|&s| s >= -1e-9);
    check(
        ok,
        format!(
            "min slack M1(P0) {:.3e}, M1(P1) {:.3e}, M2 {:.3e}, M3 {:.3e}",
            min_slack[0], min_slack[1], min_slack[2], min_slack[3]
        ),
    )
}

fn p0_gamma() -> f64 {
    PipelineHyperparams::linear(2).gamma
}

// 4: propensity-error sensitivity on a fleet of fitted models
fn sensitivity() -> Outcome {
    let hp = PipelineHyperparams {
        embed_layers: 1,
        embed_width: 20,
        head_layers: 1,
        head_width: 20,
        batch_size: 50,
        epochs: 10,
        ..PipelineHyperparams::default()
    };
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20 {
        let (d, g) = generate_acic_like(seed, 300, &AcicProtocol::default()).map_err(|e| e.to_string())?;
        let s = split(&d, 0.1, 0.3, seed).map_err(|e| e.to_string())?;
        let (model, _) =
            alrite_fit(&d, &s, &hp, &hp, &PropensitySpec::default_grid(), seed).map_err(|e| e.to_string())?;
        let eta = g.propensity().ok_or("generator did not report its propensity")?;
        let c = eta_sensitivity_check(&model, d.x(), eta, g.tau()).map_err(|e| e.to_string())?;
        worst = worst.max(c.lhs - c.rhs);
        if !c.holds(1e-9) {
            return Err(format!("model {seed}: lhs {} > rhs {}", c.lhs, c.rhs));
        }
    }
    Ok(format!("20 models, max lhs - rhs = {worst:.3e}"))
}

// 5: ensemble identities
fn ensemble_identities() -> Outcome {
    let inst = linear_instance(5, 200, 3, 0.5);
    let members = |role: Role, base: u64| -> Vec<RankedPipeline> {
        (0..4)
            .map(|k| {
                let p = train_linear(&inst, role, 2 + 6 * k as usize, base + k);
                let mu_risk = factual_mse(&p, &inst.dataset, &inst.split.validation).unwrap();
                RankedPipeline { pipeline: p, mu_risk }
            })
            .collect()
    };
    let (m0, m1) = (members(Role::ControlDriven, 10), members(Role::TreatmentDriven, 20));
    let best = |ms: &[RankedPipeline]| {
        ms.iter()
            .min_by(|a, b| a.mu_risk.total_cmp(&b.mu_risk))
            .unwrap()
            .pipeline
            .clone()
    };
    let eta = train_propensity(&inst.dataset, &inst.split.train, PropensitySpec::default_grid()[0])
        .map_err(|e| e.to_string())?;
    let single = AlriteModel::new(best(&m0), best(&m1), eta.clone(), DEFAULT_CLIP).map_err(|e| e.to_string())?;
    let x = inst.dataset.x();
    let want = alrite_predict(&single, x).map_err(|e| e.to_string())?;

    let top1 = EnsembleModel::new(
        m0.clone(),
        m1.clone(),
        eta.clone(),
        DEFAULT_CLIP,
        EnsembleMode::TopK { k: 1 },
    )
    .and_then(|e| e.predict_tau(x))
    .map_err(|e| e.to_string())?;
    if top1 != want {
        return Err("top-1 ensemble differs from the best single model".into());
    }
    let soft = EnsembleModel::new(m0, m1, eta, DEFAULT_CLIP, EnsembleMode::Softmax { lambda: 1e6 })
        .and_then(|e| e.predict_tau(x))
        .map_err(|e| e.to_string())?;
    let gap = soft.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > 1e-6 {
        return Err(format!("softmax λ=1e6 deviates by {gap:.3e}"));
    }

    let mut rng = rng_from_seed(55);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..200 {
        let c = rng.random_range(1..40);
        let mut risks: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..20.0)).collect();
        risks.sort_by(f64::total_cmp);
        for lambda in lambda_grid() {
            let w = member_weights(&risks, EnsembleMode::Softmax { lambda }).map_err(|e| e.to_string())?;
            worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
        }
    }
    check(
        worst_sum <= 1e-12,
        format!("top-1 exact, softmax gap {gap:.2e}, max |Σw − 1| = {worst_sum:.1e}"),
    )
}

struct SuiteRow {
    selected: f64,
    ensemble: f64,
    ols: f64,
}

// Shared by 6 and 10.
fn ihdp_suite() -> Result<(Vec<SuiteRow>, Duration), String> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for seed in 0..20 {
        let cfg = ExperimentConfig {
            seed,
            dataset: DatasetSource::IhdpLike {
                config: IhdpConfig::default(),
            },
            search: SearchSpace {
                embed_layers: vec![1, 2, 3],
                head_layers: vec![1, 2, 3],
                embed_width: vec![20, 50],
                head_width: vec![20, 50],
                batch_size: vec![50, 100],
                epochs: 80,
                l0: 6,
                l1: 6,
                ..SearchSpace::default()
            },
            ..ExperimentConfig::default()
        };
        let run = || -> alrite::Result<SuiteRow> {
            let prepared = prepare(&cfg)?;
            let sweep = run_sweep(&cfg, &prepared)?;
            let candidates = score_candidates(&cfg, &prepared, &sweep)?;
            let selection = select_per_proxy(&candidates)?;
            let chosen = selection
                .iter()
                .find(|s| s.kind == ProxyKind::MuRisk)
                .expect("every proxy selects");
            let curves = ensemble_curves(&cfg, &prepared, &sweep)?;
            let truth = prepared.truth.as_ref().expect("generated");
            let within = prepared.split.within_sample();
            let ols = OlsTLearner::fit(&prepared.dataset, &prepared.split.train)?;
            let tau_ols = ols.predict_tau(prepared.dataset.subset(&within).x());
            Ok(SuiteRow {
                selected: chosen.pehe_within.expect("truth known").sqrt(),
                ensemble: curves.selected_point().pehe_within.expect("truth known").sqrt(),
                ols: pehe(&tau_ols, truth, &within)?.sqrt_pehe,
            })
        };
        rows.push(run().map_err(|e| format!("instance {seed}: {e}"))?);
    }
    Ok((rows, start.elapsed()))
}

fn relative_performance(suite: &Result<(Vec<SuiteRow>, Duration), String>) -> Outcome {
    let (rows, took) = suite.as_ref().map_err(Clone::clone)?;
    if *took > Duration::from_secs(30 * 60) {
        return Err(format!("suite took {:.0}s", took.as_secs_f64()));
    }
    let wins = rows.iter().filter(|r| r.selected < r.ols).count();
    let mean = |f: fn(&SuiteRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    check(
        wins >= 14,
        format!(
            "{wins}/20 wins; mean sqrt PEHE {:.3} vs OLS-2 {:.3} ({:.0}s)",
            mean(|r| r.selected),
            mean(|r| r.ols),
            took.as_secs_f64()
        ),
    )
}

fn ensemble_improves(suite: &Result<(Vec<SuiteRow>, Duration), String>) -> Outcome {
    let (rows, _) = suite.as_ref().map_err(Clone::clone)?;
    let k = rows.len() as f64;
    let ens = rows.iter().map(|r| r.ensemble).sum::<f64>() / k;
    let sel = rows.iter().map(|r| r.selected).sum::<f64>() / k;
    check(
        ens <= sel + 1e-9,
        format!("ensemble mean {ens:.4}, selected mean {sel:.4}"),
    )
}

// 7: proxy reliability on a perturbed candidate pool, rank statistics against enumeration
fn proxy_reliability() -> Outcome {
    let mut good = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let prepared = prepare(&cfg).map_err(|e| e.to_string())?;
        let truth = prepared.truth.as_ref().expect("generated");
        let val = &prepared.split.validation;
        let data = prepared.dataset.subset(val);
        let g = truth.subset(val);
        let n = val.len();
        let ctx = ValidationContext {
            t: data.t().to_vec(),
            y: data.y().to_vec(),
            mu0: vec![0.0; n],
            mu1: vec![0.0; n],
            m: vec![0.0; n],
            eta: vec![0.5; n],
            nn_outcome: vec![0.0; n],
        };
        let mut rng = rng_from_seed(7000 + seed);
        let d = data.d();
        let (mut risks, mut pehes) = (Vec::new(), Vec::new());
        for c in 0..20 {
            // error surfaces of growing magnitude along random directions
            let scale = 0.1 + 0.15 * c as f64;
            let mut surface = || -> Vec<f64> {
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = rng.random_range(-1.0..1.0);
                (0..n)
                    .map(|i| scale * (b + alrite::linalg::dot(&w, data.x().row(i)) / (d as f64).sqrt()))
                    .collect()
            };
            let (e0, e1) = (surface(), surface());
            let m0: Vec<f64> = (0..n).map(|i| g.mu0()[i] + e0[i]).collect();
            let m1: Vec<f64> = (0..n).map(|i| g.mu1()[i] + e1[i]).collect();
            let tau: Vec<f64> = (0..n).map(|i| m1[i] - m0[i]).collect();
            let cand = CandidatePredictions {
                tau: Some(tau.clone()),
                outcomes: Some((m0, m1)),
            };
            risks.push(proxy_score(ProxyKind::MuRisk, &cand, &ctx).map_err(|e| e.to_string())?);
            pehes.push(alrite::metrics::pehe_values(&tau, g.tau()).map_err(|e| e.to_string())?);
        }
        let rho = spearman(&pehes, &risks);
        worst = worst.min(rho);
        good += (rho > 0.5) as usize;
    }
    let enumerated = rank_oracles()?;
    check(
        good >= 16,
        format!("Spearman > 0.5 on {good}/20 seeds (min {worst:.3}); {enumerated} list pairs match enumeration"),
    )
}

fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let below = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Every pair of length-5 lists over {0,1,2}, compared with direct enumeration.
fn rank_oracles() -> Result<usize, String> {
    let lists: Vec<Vec<f64>> = (0..243u32)
        .map(|code| (0..5).map(|k| ((code / 3u32.pow(k)) % 3) as f64).collect())
        .collect();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut count = 0;
    for u in &lists {
        let ru = oracle_ranks(u);
        if average_ranks(u) != ru {
            return Err(format!("average ranks differ on {u:?}"));
        }
        for v in &lists {
            let rv = oracle_ranks(v);
            let rho = oracle_pearson(&ru, &rv);
            let mut s = 0i32;
            for i in 0..5 {
                for j in i + 1..5 {
                    s += u[i].total_cmp(&u[j]) as i32 * v[i].total_cmp(&v[j]) as i32;
                }
            }
            let tau_a = s as f64 / 10.0;
            // DCG: walk the candidates in increasing u (ties by index)
            let mut order: Vec<usize> = (0..5).collect();
            order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
            let want_dcg: f64 = (0..5)
                .map(|j| 2f64.powf((rv[order[j]] - 1.0) / 4.0) / ((j + 2) as f64).ln())
                .sum();
            if !close(spearman(u, v), rho) || kendall(u, v) != tau_a || !close(dcg(u, v, 5), want_dcg) {
                return Err(format!("rank statistics differ on {u:?} vs {v:?}"));
            }
            count += 1;
        }
    }
    Ok(count)
}

// 8: twin distances shrink with n under a fixed embedding
fn asymptotic_twins() -> Outcome {
    let median = |seed: u64, n: usize| -> alrite::Result<f64> {
        let d = generate_two_cluster_toy(seed, n)?;
        let map = mirror_twins(d.x(), d.t())?;
        Ok(DistanceStats::from_values(&map.twin_distance).median)
    };
    let mut shrinks = 0;
    for seed in 0..20 {
        let (small, large) = (median(seed, 200), median(seed + 100, 2000));
        let (small, large) = (small.map_err(|e| e.to_string())?, large.map_err(|e| e.to_string())?);
        shrinks += (large < small) as usize;
    }
    check(shrinks >= 18, format!("median shrinks on {shrinks}/20 seeds"))
}

// 9: projecting onto the horizontal axis restores overlap on the toy
fn positivity_toy() -> Outcome {
    let mut wins = 0;
    let mut ratio: f64 = 0.0;
    for seed in 0..20 {
        let d = generate_two_cluster_toy(seed, 400).map_err(|e| e.to_string())?;
        let proj = Matrix::from_vec(d.n(), 1, (0..d.n()).map(|i| d.x().get(i, 0)).collect()).unwrap();
        let mean = |x: &Matrix| -> alrite::Result<f64> {
            Ok(DistanceStats::from_values(&mirror_twins(x, d.t())?.twin_distance).mean)
        };
        let (a, b) = (
            mean(&proj).map_err(|e| e.to_string())?,
            mean(d.x()).map_err(|e| e.to_string())?,
        );
        wins += (a < b) as usize;
        ratio = ratio.max(a / b);
    }
    check(
        wins == 20,
        format!("projection lower on {wins}/20 seeds (worst ratio {ratio:.3})"),
    )
}

// 11
fn discrete_sanity() -> Outcome {
    let a = lemma4_sanity(&collapsed_pairs_toy()).map_err(|e| e.to_string())?;
    let b = lemma4_sanity(&projection_counter_example(4)).map_err(|e| e.to_string())?;
    let mut toy = collapsed_pairs_toy();
    toy.points[0].mu0 = 2.0;
    let c = lemma4_sanity(&toy).map_err(|e| e.to_string())?;
    check(
        a.passed() && b.passed() && c.outcome == Lemma4Outcome::HypothesisViolation,
        format!(
            "collapsed pairs {:?}, counter-example {:?}, perturbed {:?}",
            a.outcome, b.outcome, c.outcome
        ),
    )
}

// 12: every command twice, all CSV outputs compared byte for byte
fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let hp = r#"{"alpha": 0.1, "beta": 1.0, "gamma": 1e-4, "embed_layers": 1, "embed_width": 20,
        "head_layers": 1, "head_width": 20, "batch_size": 50, "epochs": 8, "base_lr": 0.001}"#;
    let cfg = dir.path().join("config.json");
    let text = format!(
        r#"{{"seed": 11, "dataset": {{"kind": "ihdp_like", "n": 300}},
  "search": {{"embed_layers": [1, 2], "head_layers": [1], "embed_width": [20], "head_width": [20],
             "batch_size": [50], "epochs": 8, "l0": 3, "l1": 3}},
  "fit": {{"control": {hp}, "treatment": {hp}}},
  "bounds": {{"lipschitz": 5.0}}}}"#
    );
    fs::write(&cfg, text).map_err(|e| e.to_string())?;
    let commands = [
        "generate", "sweep", "select", "ensemble", "fit", "evaluate", "bounds", "report",
    ];
    let outs = [dir.path().join("a"), dir.path().join("b")];
    for (k, out) in outs.iter().enumerate() {
        let workers = if k == 0 { "1" } else { "3" };
        for cmd in commands {
            let o = Command::new(env!("CARGO_BIN_EXE_alrite"))
                .args([
                    cmd,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--workers",
                    workers,
                ])
                .output()
                .map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr)));
            }
        }
    }
    let csvs = csv_files(&outs[0]);
    for name in &csvs {
        let (a, b) = (fs::read(outs[0].join(name)), fs::read(outs[1].join(name)));
        if a.map_err(|e| e.to_string())? != b.map_err(|e| e.to_string())? {
            return Err(format!("{name} differs between runs"));
        }
    }
    check(
        csvs.len() >= 10,
        format!("{} CSV files identical across runs", csvs.len()),
    )
}

fn csv_files(root: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(root)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

fn run(number: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {number}: {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {number}: {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run(1, "gradient suite", gradients);
    ok &= run(2, "twin oracle", twin_oracle);
    ok &= run(3, "bound suite", bound_suite);
    ok &= run(4, "propensity sensitivity", sensitivity);
    ok &= run(5, "ensemble identities", ensemble_identities);
    let suite = catch_unwind(ihdp_suite).unwrap_or_else(|_| Err("suite panicked".into()));
    ok &= run(6, "relative performance vs OLS-2", || relative_performance(&suite));
    ok &= run(7, "proxy reliability", proxy_reliability);
    ok &= run(8, "asymptotic counterfactualizability", asymptotic_twins);
    ok &= run(9, "positivity toy", positivity_toy);
    ok &= run(10, "ensemble improves on selection", || ensemble_improves(&suite));
    ok &= run(11, "discrete representation sanity", discrete_sanity);
    ok &= run(12, "determinism", determinism);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
