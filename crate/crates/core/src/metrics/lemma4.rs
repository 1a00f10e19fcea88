//! Discrete check that the control factual risk, minimized over tabular
//! models on the latent cells, recovers `μ⁰` whenever `μ⁰` factors through
//! the embedding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePoint {
    /// `P(X = x | T = 0)`.
    pub mass: f64,
    /// Latent cell `φ(x)`.
    pub cell: usize,
    /// `E[Y⁰ | X = x]`.
    pub mu0: f64,
    /// `Var[Y⁰ | X = x]`.
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteToy {
    pub points: Vec<DiscretePoint>,
    /// Values a tabular candidate may take on each cell.
    pub grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma4Outcome {
    Pass,
    /// `μ⁰` is not constant on some cell, so no `ν⁰` exists.
    HypothesisViolation,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Report {
    pub outcome: Lemma4Outcome,
    /// Risk-minimizing value per cell.
    pub minimizer: Vec<f64>,
    /// `ν⁰` per cell when it exists.
    pub nu0: Option<Vec<f64>>,
    pub min_risk: f64,
    /// True when the minimizer composed with φ differs from μ⁰ on some point.
    pub differs_from_mu0: bool,
}

impl Lemma4Report {
    pub fn passed(&self) -> bool {
        self.outcome == Lemma4Outcome::Pass
    }
}

const MAX_CANDIDATES: usize = 10_000_000;

/// Expected squared error `Σ_x p(x)[(ν(φ(x)) − μ⁰(x))² + Var(x)]`.
fn risk(points: &[DiscretePoint], candidate: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| p.mass * ((candidate[p.cell] - p.mu0).powi(2) + p.variance))
        .sum()
}

/// Enumerates every tabular candidate `𝒵 → grid` and compares the risk
/// minimizer with `ν⁰`. Ties keep the first candidate in enumeration order.
pub fn lemma4_sanity(toy: &DiscreteToy) -> Result<Lemma4Report> {
    if toy.points.is_empty() || toy.grid.is_empty() {
        return Err(Error::InvalidArgument("lemma4: empty toy".into()));
    }
    if toy.points.iter().any(|p| !(p.mass >= 0.0 && p.variance >= 0.0)) {
        return Err(Error::InvalidArgument(
            "lemma4: masses and variances must be non-negative".into(),
        ));
    }
    let cells = toy.points.iter().map(|p| p.cell).max().unwrap_or(0) + 1;
    let g = toy.grid.len();
    let total = (g as f64).powi(cells as i32);
    if total > MAX_CANDIDATES as f64 {
        return Err(Error::InvalidArgument(format!(
            "lemma4: {total} candidates exceed the enumeration cap"
        )));
    }

    let mut digits = vec![0usize; cells];
    let mut candidate = vec![toy.grid[0]; cells];
    let mut best = (f64::INFINITY, candidate.clone());
    loop {
        for (c, &k) in candidate.iter_mut().zip(&digits) {
            *c = toy.grid[k];
        }
        let r = risk(&toy.points, &candidate);
        if r < best.0 {
            best = (r, candidate.clone());
        }
        let mut pos = 0;
        while pos < cells {
            digits[pos] += 1;
            if digits[pos] < g {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
        if pos == cells {
            break;
        }
    }

    let mut nu0: Vec<Option<f64>> = vec![None; cells];
    let mut expressible = true;
    for p in &toy.points {
        match nu0[p.cell] {
            None => nu0[p.cell] = Some(p.mu0),
            Some(v) if v == p.mu0 => {}
            Some(_) => expressible = false,
        }
    }
    let minimizer = best.1;
    let differs = toy.points.iter().any(|p| p.mass > 0.0 && minimizer[p.cell] != p.mu0);
    let (outcome, nu0) = if expressible {
        let nu0: Vec<f64> = nu0.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let observed_cells_match = toy
            .points
            .iter()
            .filter(|p| p.mass > 0.0)
            .all(|p| minimizer[p.cell] == nu0[p.cell]);
        let outcome = if observed_cells_match {
            Lemma4Outcome::Pass
        } else {
            Lemma4Outcome::Fail
        };
        (outcome, Some(nu0))
    } else {
        (Lemma4Outcome::HypothesisViolation, None)
    };
    Ok(Lemma4Report {
        outcome,
        minimizer,
        nu0,
        min_risk: best.0,
        differs_from_mu0: differs,
    })
}

/// Four points on two latent cells with `μ⁰` constant per cell.
pub fn collapsed_pairs_toy() -> DiscreteToy {
    let pts = [(0.1, 0, 1.0), (0.3, 0, 1.0), (0.4, 1, -0.5), (0.2, 1, -0.5)];
    DiscreteToy {
        points: pts
            .iter()
            .map(|&(mass, cell, mu0)| DiscretePoint {
                mass,
                cell,
                mu0,
                variance: 0.25,
            })
            .collect(),
        grid: grid(-2.0, 2.0, 0.25),
    }
}

/// Discretized version of the projection counter-example: `X` uniform on a
/// k×k grid of `[0,1]²`, `φ(x) = x₁`, `Y⁰ ~ N(x₁, x₂²)`. The conditional
/// variance depends on the collapsed coordinate, the mean does not.
pub fn projection_counter_example(k: usize) -> DiscreteToy {
    let step = 1.0 / (k - 1).max(1) as f64;
    let mass = 1.0 / (k * k) as f64;
    let mut points = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            points.push(DiscretePoint {
                mass,
                cell: i,
                mu0: i as f64 * step,
                variance: (j as f64 * step).powi(2),
            });
        }
    }
    DiscreteToy {
        points,
        grid: (0..k).map(|i| i as f64 * step).collect(),
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let m = ((hi - lo) / step).round() as usize;
    (0..=m).map(|i| lo + i as f64 * step).collect()
}
