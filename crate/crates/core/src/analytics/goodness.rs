//! Chi-square goodness-of-fit and two-sample homogeneity tests on count data.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Minimum expected count per cell after merging.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

impl ChiSquareOutcome {
    pub fn rejects(&self, significance: f64) -> bool {
        self.p_value < significance
    }
}

fn p_value(statistic: f64, dof: u64) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN)
}

/// Histogram of values, index = value.
pub fn histogram(values: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut h: Vec<u64> = Vec::new();
    for v in values {
        let v = v as usize;
        if v >= h.len() {
            h.resize(v + 1, 0);
        }
        h[v] += 1;
    }
    h
}

/// Goodness of fit of `observed[k]` against cell probabilities `probs[k]`.
///
/// `probs` may be truncated; the remaining mass forms an open upper cell.
/// Adjacent cells are merged from both ends until each expects at least
/// [`MIN_EXPECTED`] observations.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquareOutcome {
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let cells = probs.len().max(observed.len());
    let mut obs: Vec<f64> = (0..cells)
        .map(|k| observed.get(k).copied().unwrap_or(0) as f64)
        .collect();
    let mut exp: Vec<f64> = (0..cells)
        .map(|k| probs.get(k).copied().unwrap_or(0.0) * nf)
        .collect();
    let covered: f64 = exp.iter().sum();
    // remaining tail mass goes to the last cell
    if let Some(last) = exp.last_mut() {
        *last += (nf - covered).max(0.0);
    }
    merge_cells(&mut obs, &mut exp);
    let statistic: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = obs.len().saturating_sub(1) as u64;
    ChiSquareOutcome {
        statistic,
        dof,
        p_value: p_value(statistic, dof),
    }
}

fn merge_cells(obs: &mut Vec<f64>, exp: &mut Vec<f64>) {
    // low end
    while exp.len() > 1 && exp[0] < MIN_EXPECTED {
        let (o, e) = (obs.remove(0), exp.remove(0));
        obs[0] += o;
        exp[0] += e;
    }
    // high end
    while exp.len() > 1 && *exp.last().unwrap() < MIN_EXPECTED {
        let (o, e) = (obs.pop().unwrap(), exp.pop().unwrap());
        *obs.last_mut().unwrap() += o;
        *exp.last_mut().unwrap() += e;
    }
    // interior stragglers
    let mut i = 0;
    while i + 1 < exp.len() {
        if exp[i] < MIN_EXPECTED {
            let (o, e) = (obs.remove(i), exp.remove(i));
            obs[i] += o;
            exp[i] += e;
        } else {
            i += 1;
        }
    }
}

/// Two-sample chi-square homogeneity test on two count samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareOutcome {
    let ha = histogram(a.iter().copied());
    let hb = histogram(b.iter().copied());
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let n = na + nb;
    let width = ha.len().max(hb.len());

    // merge adjacent values until every pooled cell is large enough
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for k in 0..width {
        ca += ha.get(k).copied().unwrap_or(0) as f64;
        cb += hb.get(k).copied().unwrap_or(0) as f64;
        let pooled = ca + cb;
        if pooled * na.min(nb) / n >= MIN_EXPECTED {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }

    let statistic: f64 = cells
        .iter()
        .map(|&(oa, ob)| {
            let t = oa + ob;
            let ea = t * na / n;
            let eb = t * nb / n;
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    let dof = cells.len().saturating_sub(1) as u64;
    ChiSquareOutcome {
        statistic,
        dof,
        p_value: p_value(statistic, dof),
    }
}
