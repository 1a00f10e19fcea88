use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth};
use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize, context: &'static str) -> Result<()> {
    if a != b {
        return Err(Error::Shape {
            context,
            expected: b,
            got: a,
        });
    }
    if a == 0 {
        return Err(Error::InvalidArgument(format!("{context}: empty input")));
    }
    Ok(())
}

/// Mean squared difference between two equally long effect vectors.
pub fn pehe_values(tau_hat: &[f64], tau: &[f64]) -> Result<f64> {
    check_lengths(tau_hat.len(), tau.len(), "pehe")?;
    Ok(tau_hat.iter().zip(tau).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / tau.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pehe {
    pub pehe: f64,
    pub sqrt_pehe: f64,
}

/// PEHE of predictions `tau_hat` (aligned with `indices`) against the truth.
pub fn pehe(tau_hat: &[f64], truth: &GroundTruth, indices: &[usize]) -> Result<Pehe> {
    check_lengths(tau_hat.len(), indices.len(), "pehe")?;
    let tau: Vec<f64> = indices.iter().map(|&i| truth.tau()[i]).collect();
    let v = pehe_values(tau_hat, &tau)?;
    Ok(Pehe {
        pehe: v,
        sqrt_pehe: v.sqrt(),
    })
}

/// `|mean τ̂ − mean τ|` over `indices`.
pub fn eps_ate(tau_hat: &[f64], truth: &GroundTruth, indices: &[usize]) -> Result<f64> {
    check_lengths(tau_hat.len(), indices.len(), "eps_ate")?;
    let n = indices.len() as f64;
    let est = tau_hat.iter().sum::<f64>() / n;
    let actual = indices.iter().map(|&i| truth.tau()[i]).sum::<f64>() / n;
    Ok((est - actual).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRisks {
    /// Needs both potential outcomes; `None` without ground truth.
    pub rpol: Option<f64>,
    pub orpol: f64,
    /// Set when a policy/arm cell used by either risk was empty and contributed 0.
    pub empty_cell: bool,
}

/// Empirical policy risks of the policy "treat iff τ̂ > 0" over all samples.
pub fn policy_risks(tau_hat: &[f64], dataset: &Dataset, truth: Option<&GroundTruth>) -> Result<PolicyRisks> {
    check_lengths(tau_hat.len(), dataset.n(), "policy_risks")?;
    let n = dataset.n() as f64;
    let treat: Vec<bool> = tau_hat.iter().map(|&v| v > 0.0).collect();
    let n_treat = treat.iter().filter(|&&b| b).count();
    let share = [(dataset.n() - n_treat) as f64 / n, n_treat as f64 / n];
    let mut empty_cell = false;

    let cell_mean = |values: &mut dyn Iterator<Item = f64>, empty: &mut bool| {
        let (mut s, mut c) = (0.0, 0usize);
        for v in values {
            s += v;
            c += 1;
        }
        if c == 0 {
            *empty = true;
            0.0
        } else {
            s / c as f64
        }
    };

    let mut observed = 0.0;
    for arm in [0u8, 1u8] {
        let policy = arm == 1;
        let mut it = (0..dataset.n())
            .filter(|&i| treat[i] == policy && dataset.t()[i] == arm)
            .map(|i| dataset.y()[i]);
        observed += share[arm as usize] * cell_mean(&mut it, &mut empty_cell);
    }

    let rpol = match truth {
        None => None,
        Some(g) => {
            check_lengths(g.len(), dataset.n(), "policy_risks truth")?;
            let mut value = 0.0;
            for arm in [0u8, 1u8] {
                let policy = arm == 1;
                let mut it = (0..dataset.n()).filter(|&i| treat[i] == policy).map(|i| g.mu(arm, i));
                let mut ignored = false;
                value += share[arm as usize] * cell_mean(&mut it, &mut ignored);
            }
            Some(1.0 - value)
        }
    };
    Ok(PolicyRisks {
        rpol,
        orpol: 1.0 - observed,
        empty_cell,
    })
}
