use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::sweep::{
    ensemble_curves, prepare, run_sweep, score_candidates, select_per_proxy, CandidateRow, CurvePoint, EnsembleCurves,
    MemberRecord, SelectionRow, SweepResult,
};
use crate::data::{format_real, save_csv};
use crate::error::{Error, Result};
use crate::learner::{alrite_fit, alrite_predict, eta_sensitivity_check, AlriteModel, EnsembleMode};
use crate::metrics::{bound_m1, bound_m2, bound_m3, eps_ate, pehe, policy_risks, BoundReport, LipschitzSource};
use crate::propensity::predict_eta;
use crate::rng::{derive_seed, stream};
use crate::selection::ProxyKind;

/// File layout of a run directory.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn member(&self, m: &MemberRecord) -> PathBuf {
        let role = match m.role {
            crate::pipeline::Role::ControlDriven => "control",
            crate::pipeline::Role::TreatmentDriven => "treatment",
        };
        self.root.join("members").join(format!("{role}_{:03}.json", m.index))
    }
}

fn real(v: f64) -> String {
    format_real(v)
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Structure(format!("{}: {e} (run `{hint}` first)", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn paths(cfg: &ExperimentConfig) -> RunPaths {
    RunPaths::new(&cfg.output_dir)
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    generator_seed: u64,
    dataset: &'a super::config::DatasetSource,
    n: usize,
    d: usize,
    n_treated: usize,
    has_truth: bool,
    train: usize,
    validation: usize,
    test: usize,
}

/// Writes `dataset.csv` (with truth columns when known), `split.json` and `manifest.json`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let prepared = prepare(cfg)?;
    fs::create_dir_all(&rp.root)?;
    let data_path = rp.file("dataset.csv");
    save_csv(&data_path, &prepared.dataset, prepared.truth.as_ref())?;
    let manifest = Manifest {
        seed: cfg.seed,
        generator_seed: derive_seed(cfg.seed, stream::GENERATOR, 0),
        dataset: &cfg.dataset,
        n: prepared.dataset.n(),
        d: prepared.dataset.d(),
        n_treated: prepared.dataset.n_treated(),
        has_truth: prepared.truth.is_some(),
        train: prepared.split.train.len(),
        validation: prepared.split.validation.len(),
        test: prepared.split.test.len(),
    };
    Ok(vec![
        data_path,
        write_json(&rp.file("split.json"), &prepared.split)?,
        write_json(&rp.file("manifest.json"), &manifest)?,
    ])
}

fn member_rows(members: &[MemberRecord]) -> Vec<Vec<String>> {
    members
        .iter()
        .map(|m| {
            let h = &m.hyperparams;
            vec![
                format!("{:?}", m.role).to_lowercase(),
                m.index.to_string(),
                if m.is_trained() { "ok".into() } else { "failed".into() },
                real(h.alpha),
                real(h.beta),
                h.embed_layers.to_string(),
                h.embed_width.to_string(),
                h.head_layers.to_string(),
                h.head_width.to_string(),
                h.batch_size.to_string(),
                m.report
                    .as_ref()
                    .map(|r| r.retained_epoch.to_string())
                    .unwrap_or_default(),
                opt(m.mu_risk()),
                m.error.clone().unwrap_or_default().replace([',', '\n'], ";"),
            ]
        })
        .collect()
}

/// Trains `ℓ₀ + ℓ₁` members, scores the `ℓ₀·ℓ₁` aggregated candidates under
/// every proxy and writes the per-member and per-candidate tables.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let prepared = prepare(cfg)?;
    let sweep = run_sweep(cfg, &prepared)?;
    let mut written = Vec::new();
    for m in sweep.members0.iter().chain(&sweep.members1) {
        written.push(write_json(&rp.member(m), m)?);
    }
    written.push(write_json(
        &rp.file("propensity.json"),
        &(&sweep.eta, &sweep.propensity_scores),
    )?);
    let mut rows = member_rows(&sweep.members0);
    rows.extend(member_rows(&sweep.members1));
    written.push(write_table(
        &rp.file("members.csv"),
        &[
            "role",
            "member",
            "status",
            "alpha",
            "beta",
            "embed_layers",
            "embed_width",
            "head_layers",
            "head_width",
            "batch_size",
            "retained_epoch",
            "mu_risk",
            "error",
        ],
        &rows,
    )?);

    let candidates = if sweep.members0.iter().any(|m| m.is_trained()) && sweep.members1.iter().any(|m| m.is_trained()) {
        score_candidates(cfg, &prepared, &sweep)?
    } else {
        return Err(Error::Structure(
            "every sweep member of one role failed; see members.csv".into(),
        ));
    };
    written.push(write_json(&rp.file("candidates.json"), &candidates)?);
    let mut long = Vec::new();
    for c in &candidates {
        for kind in ProxyKind::ALL {
            long.push(vec![
                c.id.to_string(),
                kind.name().into(),
                opt(c.scores.get(&kind).copied()),
                opt(c.pehe_within),
            ]);
        }
    }
    written.push(write_table(
        &rp.file("scores.csv"),
        &["candidate_id", "kind", "score", "pehe_if_known"],
        &long,
    )?);
    Ok(written)
}

fn load_members(rp: &RunPaths) -> Result<(Vec<MemberRecord>, Vec<MemberRecord>)> {
    let dir = rp.root.join("members");
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::Structure(format!("{}: {e} (run `sweep` first)", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut m0 = Vec::new();
    let mut m1 = Vec::new();
    for p in names {
        let m: MemberRecord = read_json(&p, "sweep")?;
        match m.role {
            crate::pipeline::Role::ControlDriven => m0.push(m),
            crate::pipeline::Role::TreatmentDriven => m1.push(m),
        }
    }
    m0.sort_by_key(|m| m.index);
    m1.sort_by_key(|m| m.index);
    Ok((m0, m1))
}

fn load_sweep(rp: &RunPaths) -> Result<SweepResult> {
    let (members0, members1) = load_members(rp)?;
    let (eta, propensity_scores) = read_json(&rp.file("propensity.json"), "sweep")?;
    Ok(SweepResult {
        members0,
        members1,
        eta,
        propensity_scores,
    })
}

fn selection_rows(sel: &[SelectionRow], candidates: &[CandidateRow]) -> Vec<Vec<String>> {
    sel.iter()
        .map(|s| {
            let c = s.winner.and_then(|w| candidates.iter().find(|c| c.id == w));
            vec![
                s.kind.name().into(),
                s.winner.map(|w| w.to_string()).unwrap_or_default(),
                c.map(|c| c.control.to_string()).unwrap_or_default(),
                c.map(|c| c.treatment.to_string()).unwrap_or_default(),
                opt(s.score),
                opt(s.pehe_within.map(f64::sqrt)),
                opt(s.pehe_out.map(f64::sqrt)),
                opt(s.agreement.map(|a| a.spearman)),
                opt(s.agreement.map(|a| a.kendall)),
                opt(s.agreement.map(|a| a.dcg)),
            ]
        })
        .collect()
}

const SELECTION_HEADER: [&str; 10] = [
    "kind",
    "winner",
    "control",
    "treatment",
    "score",
    "sqrt_pehe_within",
    "sqrt_pehe_out",
    "spearman",
    "kendall",
    "dcg",
];

/// Picks a winner per proxy from the sweep's candidate table.
pub fn cmd_select(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let candidates: Vec<CandidateRow> = read_json(&rp.file("candidates.json"), "sweep")?;
    let sel = select_per_proxy(&candidates)?;
    let chosen = sel.iter().find(|s| s.kind == cfg.proxy).cloned();
    Ok(vec![
        write_table(
            &rp.file("selection.csv"),
            &SELECTION_HEADER,
            &selection_rows(&sel, &candidates),
        )?,
        write_json(&rp.file("selection.json"), &chosen)?,
    ])
}

fn curve_rows(curves: &EnsembleCurves) -> Vec<Vec<String>> {
    let row = |p: &CurvePoint, selected: bool| {
        let (family, param) = match p.mode {
            EnsembleMode::TopK { k } => ("top_k", k.to_string()),
            EnsembleMode::Softmax { lambda } => ("softmax", real(lambda)),
        };
        vec![
            family.into(),
            param,
            real(p.mu_risk),
            opt(p.pehe_within.map(f64::sqrt)),
            opt(p.pehe_out.map(f64::sqrt)),
            (selected as u8).to_string(),
        ]
    };
    let sel = curves.selected_point();
    curves
        .top_k
        .iter()
        .chain(&curves.softmax)
        .map(|p| row(p, std::ptr::eq(p, sel)))
        .collect()
}

/// Ensemble curves over K and λ; the configured family's μ-risk minimizer is marked.
pub fn cmd_ensemble(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let prepared = prepare(cfg)?;
    let sweep = load_sweep(&rp)?;
    let curves = ensemble_curves(cfg, &prepared, &sweep)?;
    Ok(vec![
        write_table(
            &rp.file("ensemble_curve.csv"),
            &[
                "family",
                "parameter",
                "mu_risk",
                "sqrt_pehe_within",
                "sqrt_pehe_out",
                "selected",
            ],
            &curve_rows(&curves),
        )?,
        write_json(&rp.file("ensemble.json"), &curves)?,
    ])
}

/// Trains one model with the `fit` settings and writes it with per-row predictions.
pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let prepared = prepare(cfg)?;
    let (model, report) = alrite_fit(
        &prepared.dataset,
        &prepared.split,
        &cfg.fit.control,
        &cfg.fit.treatment,
        &cfg.propensity_grid,
        cfg.seed,
    )?;
    let d = &prepared.dataset;
    let tau = alrite_predict(&model, d.x())?;
    let eta = predict_eta(&model.eta, d.x(), model.clip);
    let mut part = vec![""; d.n()];
    for (name, idx) in [
        ("train", &prepared.split.train),
        ("validation", &prepared.split.validation),
        ("test", &prepared.split.test),
    ] {
        for &i in idx {
            part[i] = name;
        }
    }
    let rows: Vec<Vec<String>> = (0..d.n())
        .map(|i| {
            vec![
                i.to_string(),
                part[i].into(),
                d.t()[i].to_string(),
                real(d.y()[i]),
                real(tau[i]),
                real(eta[i]),
                opt(prepared.truth.as_ref().map(|g| g.tau()[i])),
            ]
        })
        .collect();
    Ok(vec![
        write_json(&rp.file("model.json"), &model)?,
        write_json(&rp.file("fit_report.json"), &report)?,
        write_table(
            &rp.file("predictions.csv"),
            &["index", "part", "t", "y", "tau_hat", "eta_hat", "tau"],
            &rows,
        )?,
    ])
}

fn load_model(rp: &RunPaths) -> Result<AlriteModel> {
    read_json(&rp.file("model.json"), "fit")
}

/// PEHE, ε_ATE and policy risk of the fitted model on each part of the split.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let prepared = prepare(cfg)?;
    let model = load_model(&rp)?;
    let d = &prepared.dataset;
    let tau = alrite_predict(&model, d.x())?;
    let parts = [
        ("within_sample", prepared.split.within_sample()),
        ("out_of_sample", prepared.split.test.clone()),
        ("all", (0..d.n()).collect::<Vec<_>>()),
    ];
    let mut rows = Vec::new();
    for (name, idx) in &parts {
        let sub_tau: Vec<f64> = idx.iter().map(|&i| tau[i]).collect();
        let sub = d.subset(idx);
        let sub_truth = prepared.truth.as_ref().map(|g| g.subset(idx));
        let p = prepared.truth.as_ref().map(|g| pehe(&sub_tau, g, idx)).transpose()?;
        let e = prepared.truth.as_ref().map(|g| eps_ate(&sub_tau, g, idx)).transpose()?;
        let pol = policy_risks(&sub_tau, &sub, sub_truth.as_ref())?;
        rows.push(vec![
            (*name).into(),
            idx.len().to_string(),
            opt(p.map(|p| p.pehe)),
            opt(p.map(|p| p.sqrt_pehe)),
            opt(e),
            opt(pol.rpol),
            real(pol.orpol),
        ]);
    }
    let mut written = vec![write_table(
        &rp.file("evaluation.csv"),
        &["part", "n", "pehe", "sqrt_pehe", "eps_ate", "rpol", "orpol"],
        &rows,
    )?];
    if let Some(g) = &prepared.truth {
        if let Some(eta) = g.propensity() {
            let check = eta_sensitivity_check(&model, d.x(), eta, g.tau())?;
            written.push(write_json(&rp.file("sensitivity.json"), &check)?);
        }
    }
    Ok(written)
}

/// M₁ for each pipeline and M₂/M₃ for the pair, on the training samples.
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let prepared = prepare(cfg)?;
    let model = load_model(&rp)?;
    let truth = prepared
        .truth
        .as_ref()
        .ok_or_else(|| Error::MissingTruth("bounds need ground-truth response surfaces".into()))?;
    let idx = &prepared.split.train;
    let data = prepared.dataset.subset(idx);
    let truth = truth.subset(idx);
    let l = match cfg.bounds.lipschitz {
        Some(v) => LipschitzSource::Known(v),
        None => LipschitzSource::Unknown,
    };
    let reports: Vec<(&str, BoundReport)> = vec![
        ("control_pipeline", bound_m1(&model.p0, &data, &truth, l)?),
        ("treatment_pipeline", bound_m1(&model.p1, &data, &truth, l)?),
        ("pair", bound_m2(&model.p0, &model.p1, &data, &truth, l)?),
        (
            "pair",
            bound_m3(
                &model.p0,
                &model.p1,
                &data,
                &truth,
                l,
                cfg.fit.control.gamma,
                cfg.fit.treatment.gamma,
            )?,
        ),
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|(subject, r)| {
            vec![
                (*subject).into(),
                format!("{:?}", r.kind).to_lowercase(),
                opt(r.bound),
                real(r.pehe),
                opt(r.slack),
                (r.certified as u8).to_string(),
                opt(r.lipschitz_truth),
                real(r.lipschitz_heads),
                r.n.to_string(),
            ]
        })
        .collect();
    Ok(vec![
        write_table(
            &rp.file("bounds.csv"),
            &[
                "subject",
                "kind",
                "bound",
                "pehe",
                "slack",
                "certified",
                "lipschitz_truth",
                "lipschitz_heads",
                "n",
            ],
            &rows,
        )?,
        write_json(&rp.file("bounds.json"), &reports)?,
    ])
}

/// Summary tables and a plain-text digest from whatever artifacts exist;
/// missing ones are listed in the digest instead of failing the command.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rp = paths(cfg);
    let mut written = Vec::new();
    let mut digest = String::new();
    let mut gaps = Vec::new();
    writeln!(digest, "run: {}", rp.root.display()).ok();
    writeln!(digest, "seed: {}", cfg.seed).ok();

    match fs::read_to_string(rp.file("members.csv")) {
        Ok(text) => {
            let failed = text
                .lines()
                .skip(1)
                .filter(|l| l.split(',').nth(2) == Some("failed"))
                .count();
            let total = text.lines().count().saturating_sub(1);
            writeln!(digest, "members: {total} trained or attempted, {failed} failed").ok();
        }
        Err(_) => gaps.push("members.csv (run `sweep`)"),
    }

    match read_json::<Vec<CandidateRow>>(&rp.file("candidates.json"), "sweep") {
        Ok(candidates) => {
            let mut header = vec![
                "candidate_id".to_string(),
                "control".into(),
                "treatment".into(),
                "status".into(),
            ];
            header.extend(ProxyKind::ALL.iter().map(|k| k.name().to_string()));
            header.extend(["sqrt_pehe_within".into(), "sqrt_pehe_out".into()]);
            let rows: Vec<Vec<String>> = candidates
                .iter()
                .map(|c| {
                    let mut r = vec![
                        c.id.to_string(),
                        c.control.to_string(),
                        c.treatment.to_string(),
                        if c.failed { "failed".into() } else { "ok".into() },
                    ];
                    r.extend(ProxyKind::ALL.iter().map(|k| opt(c.scores.get(k).copied())));
                    r.push(opt(c.sqrt_pehe_within()));
                    r.push(opt(c.sqrt_pehe_out()));
                    r
                })
                .collect();
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            written.push(write_table(&rp.file("report_candidates.csv"), &h, &rows)?);

            let sel = select_per_proxy(&candidates)?;
            written.push(write_table(
                &rp.file("report_selection.csv"),
                &SELECTION_HEADER,
                &selection_rows(&sel, &candidates),
            )?);
            writeln!(
                digest,
                "candidates: {} ({} failed)",
                candidates.len(),
                candidates.iter().filter(|c| c.failed).count()
            )
            .ok();
            writeln!(digest, "selection by proxy (sqrt PEHE within / out of sample):").ok();
            for s in &sel {
                let fmt = |v: Option<f64>| v.map(|v| format!("{:.4}", v.sqrt())).unwrap_or_else(|| "n/a".into());
                let agree = s
                    .agreement
                    .map(|a| format!(" spearman {:.3} kendall {:.3} dcg {:.3}", a.spearman, a.kendall, a.dcg))
                    .unwrap_or_default();
                writeln!(
                    digest,
                    "  {:<13} winner {:>4}  {} / {}{agree}",
                    s.kind.name(),
                    s.winner.map(|w| w.to_string()).unwrap_or_else(|| "-".into()),
                    fmt(s.pehe_within),
                    fmt(s.pehe_out)
                )
                .ok();
            }
        }
        Err(_) => gaps.push("candidates.json (run `sweep`)"),
    }

    match read_json::<EnsembleCurves>(&rp.file("ensemble.json"), "ensemble") {
        Ok(curves) => {
            written.push(write_table(
                &rp.file("report_ensemble_curve.csv"),
                &[
                    "family",
                    "parameter",
                    "mu_risk",
                    "sqrt_pehe_within",
                    "sqrt_pehe_out",
                    "selected",
                ],
                &curve_rows(&curves),
            )?);
            let p = curves.selected_point();
            writeln!(
                digest,
                "ensemble: {:?} mu_risk {:.4} sqrt PEHE within {} out {}",
                p.mode,
                p.mu_risk,
                p.pehe_within
                    .map(|v| format!("{:.4}", v.sqrt()))
                    .unwrap_or_else(|| "n/a".into()),
                p.pehe_out
                    .map(|v| format!("{:.4}", v.sqrt()))
                    .unwrap_or_else(|| "n/a".into()),
            )
            .ok();
        }
        Err(_) => gaps.push("ensemble.json (run `ensemble`)"),
    }

    match fs::read_to_string(rp.file("evaluation.csv")) {
        Ok(text) => {
            writeln!(digest, "evaluation of the fitted model:").ok();
            for line in text.lines() {
                writeln!(digest, "  {line}").ok();
            }
        }
        Err(_) => gaps.push("evaluation.csv (run `fit` then `evaluate`)"),
    }

    match read_json::<Vec<(String, BoundReport)>>(&rp.file("bounds.json"), "bounds") {
        Ok(reports) => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|(s, r)| {
                    vec![
                        s.clone(),
                        format!("{:?}", r.kind).to_lowercase(),
                        opt(r.bound),
                        real(r.pehe),
                        opt(r.slack),
                        (r.certified as u8).to_string(),
                    ]
                })
                .collect();
            written.push(write_table(
                &rp.file("report_bounds.csv"),
                &["subject", "kind", "bound", "pehe", "slack", "certified"],
                &rows,
            )?);
            writeln!(digest, "bounds: {} reports", reports.len()).ok();
        }
        Err(_) => gaps.push("bounds.json (run `bounds`)"),
    }

    if !gaps.is_empty() {
        writeln!(digest, "missing artifacts:").ok();
        for g in &gaps {
            writeln!(digest, "  {g}").ok();
        }
    }
    fs::create_dir_all(&rp.root)?;
    let path = rp.file("digest.txt");
    fs::write(&path, digest)?;
    written.push(path);
    Ok(written)
}
