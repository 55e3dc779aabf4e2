//! F distribution tail and analysis of variance.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Condition, MelodyId};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("F tail undefined for F={f}, df=({df1}, {df2})")]
    Domain { f: f64, df1: f64, df2: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("incomplete table, missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("duplicate cell {0}")]
    DuplicateCell(String),
    #[error("non-finite score in cell {0}")]
    NonFinite(String),
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// P(X > f) for X ~ F(df1, df2).
pub fn f_upper_tail(f: f64, df1: f64, df2: f64) -> Result<f64, StatsError> {
    let ok_df = |d: f64| d.is_finite() && d >= 1.0;
    if f.is_nan() || f < 0.0 || !ok_df(df1) || !ok_df(df2) {
        return Err(StatsError::Domain { f, df1, df2 });
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let x = df2 / (df2 + df1 * f);
    Ok(regularized_beta(x, df2 / 2.0, df1 / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    pub effect: String,
    pub f: f64,
    pub df_between: u32,
    pub df_error: u32,
    pub p: f64,
    pub alpha: f64,
    pub ss_effect: f64,
    pub ss_error: f64,
}

impl AnovaResult {
    fn new(effect: &str, ss_effect: f64, df_effect: u32, ss_error: f64, df_error: u32, scale: f64) -> Self {
        // sums of squares below rounding noise of the data count as zero
        let zero = |ss: f64| ss <= 1e-12 * scale;
        let ss_effect = if zero(ss_effect) { 0.0 } else { ss_effect };
        let ss_error = if zero(ss_error) { 0.0 } else { ss_error };
        let (f, p) = if ss_error == 0.0 {
            if ss_effect == 0.0 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY, 0.0)
            }
        } else {
            let f = (ss_effect / df_effect as f64) / (ss_error / df_error as f64);
            let p = f_upper_tail(f, df_effect as f64, df_error as f64)
                .expect("dfs are positive and F is finite");
            (f, p)
        };
        AnovaResult {
            effect: effect.to_string(),
            f,
            df_between: df_effect,
            df_error,
            p,
            alpha: DEFAULT_ALPHA,
            ss_effect,
            ss_error,
        }
    }

    pub fn significant(&self) -> bool {
        self.p < self.alpha
    }
}

impl fmt::Display for AnovaResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: F({}, {}) = {:.3}, p = {:.4}{}",
            self.effect,
            self.df_between,
            self.df_error,
            self.f,
            self.p,
            if self.significant() { " *" } else { "" }
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum()
}

fn check_finite(xs: &[f64], what: &str) -> Result<(), StatsError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(StatsError::NonFinite(format!("{what}[{i}]"))),
        None => Ok(()),
    }
}

/// Between-groups one-way ANOVA; df = (k−1, N−k).
pub fn anova_one_way(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(StatsError::InsufficientData(
            "one-way ANOVA needs at least 2 groups of at least 2 scores".into(),
        ));
    }
    for (i, g) in groups.iter().enumerate() {
        check_finite(g, &format!("group {i}"))?;
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let k = groups.len() as u32;
    let n = all.len() as u32;
    Ok(AnovaResult::new("between groups", ss_between, k - 1, ss_within, n - k, sum_sq(&all)))
}

/// Within-subject one-way ANOVA. `scores[subject][level]`; df = (k−1, (k−1)(n−1)).
pub fn anova_one_way_within(scores: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let n = scores.len();
    let k = scores.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(StatsError::InsufficientData(
            "within-subject ANOVA needs at least 2 subjects and 2 levels".into(),
        ));
    }
    if let Some(s) = scores.iter().position(|row| row.len() != k) {
        return Err(StatsError::MissingCells(vec![format!("subject {s}")]));
    }
    for (i, row) in scores.iter().enumerate() {
        check_finite(row, &format!("subject {i}"))?;
    }
    let all: Vec<f64> = scores.iter().flatten().copied().collect();
    let grand = mean(&all);
    let ss_total: f64 = all.iter().map(|x| (x - grand).powi(2)).sum();
    let ss_subjects: f64 = scores.iter().map(|r| k as f64 * (mean(r) - grand).powi(2)).sum();
    let ss_levels: f64 = (0..k)
        .map(|j| {
            let m = scores.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            n as f64 * (m - grand).powi(2)
        })
        .sum();
    let ss_error = (ss_total - ss_levels - ss_subjects).max(0.0);
    let (n, k) = (n as u32, k as u32);
    Ok(AnovaResult::new("within subjects", ss_levels, k - 1, ss_error, (k - 1) * (n - 1), sum_sq(&all)))
}

/// Score of one subject in one melody × condition cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub participant: String,
    pub melody: MelodyId,
    pub condition: Condition,
    pub score: f64,
}

/// How the two-factor error terms are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum TwoFactorDesign {
    /// Both factors within subjects; each effect is tested against its
    /// own effect × subject interaction.
    #[default]
    RepeatedMeasures,
    /// Subjects treated as independent replicates of each cell.
    BetweenSubjects,
}

impl TwoFactorDesign {
    pub fn convention(self) -> &'static str {
        match self {
            TwoFactorDesign::RepeatedMeasures => {
                "repeated measures: error df = (a-1)(n-1), (b-1)(n-1), (a-1)(b-1)(n-1)"
            }
            TwoFactorDesign::BetweenSubjects => "between subjects: error df = ab(n-1)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoFactorAnova {
    pub design: TwoFactorDesign,
    pub convention: &'static str,
    pub subjects: usize,
    pub melody: AnovaResult,
    pub condition: AnovaResult,
    pub interaction: AnovaResult,
}

/// Two-factor (melody × condition) ANOVA over a complete balanced table.
#[allow(clippy::needless_range_loop)] // indices mirror the s/i/j subscripts of the sums
pub fn anova_two_factor(cells: &[CellScore], design: TwoFactorDesign) -> Result<TwoFactorAnova, StatsError> {
    let subjects: Vec<&str> = cells
        .iter()
        .map(|c| c.participant.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let melodies: Vec<MelodyId> = cells.iter().map(|c| c.melody).collect::<BTreeSet<_>>().into_iter().collect();
    let conditions: Vec<Condition> =
        cells.iter().map(|c| c.condition).collect::<BTreeSet<_>>().into_iter().collect();
    let (n, a, b) = (subjects.len(), melodies.len(), conditions.len());
    if a < 2 || b < 2 {
        return Err(StatsError::InsufficientData(
            "two-factor ANOVA needs at least 2 melodies and 2 conditions".into(),
        ));
    }
    let min_subjects = 2;
    if n < min_subjects {
        return Err(StatsError::InsufficientData(format!(
            "two-factor ANOVA needs at least {min_subjects} subjects, found {n}"
        )));
    }

    let label = |s: usize, i: usize, j: usize| format!("{}/{}/{}", subjects[s], melodies[i], conditions[j]);
    let mut y = vec![vec![vec![None; b]; a]; n];
    for c in cells {
        let s = subjects.binary_search(&c.participant.as_str()).unwrap();
        let i = melodies.binary_search(&c.melody).unwrap();
        let j = conditions.binary_search(&c.condition).unwrap();
        if !c.score.is_finite() {
            return Err(StatsError::NonFinite(label(s, i, j)));
        }
        if y[s][i][j].replace(c.score).is_some() {
            return Err(StatsError::DuplicateCell(label(s, i, j)));
        }
    }
    let mut missing = Vec::new();
    for s in 0..n {
        for i in 0..a {
            for j in 0..b {
                if y[s][i][j].is_none() {
                    missing.push(label(s, i, j));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::MissingCells(missing));
    }
    let y: Vec<Vec<Vec<f64>>> = y
        .into_iter()
        .map(|m| m.into_iter().map(|c| c.into_iter().map(Option::unwrap).collect()).collect())
        .collect();

    let (nf, af, bf) = (n as f64, a as f64, b as f64);
    let all: Vec<f64> = y.iter().flatten().flatten().copied().collect();
    let g = mean(&all);
    let ss_total: f64 = all.iter().map(|v| (v - g).powi(2)).sum();
    let m_s: Vec<f64> = y.iter().map(|m| m.iter().flatten().sum::<f64>() / (af * bf)).collect();
    let m_a: Vec<f64> = (0..a).map(|i| y.iter().map(|m| m[i].iter().sum::<f64>()).sum::<f64>() / (nf * bf)).collect();
    let m_b: Vec<f64> = (0..b).map(|j| y.iter().map(|m| m.iter().map(|r| r[j]).sum::<f64>()).sum::<f64>() / (nf * af)).collect();
    let m_ab = |i: usize, j: usize| y.iter().map(|m| m[i][j]).sum::<f64>() / nf;
    let m_sa = |s: usize, i: usize| y[s][i].iter().sum::<f64>() / bf;
    let m_sb = |s: usize, j: usize| y[s].iter().map(|r| r[j]).sum::<f64>() / af;

    let ss_a = nf * bf * m_a.iter().map(|m| (m - g).powi(2)).sum::<f64>();
    let ss_b = nf * af * m_b.iter().map(|m| (m - g).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for i in 0..a {
        for j in 0..b {
            ss_ab += nf * (m_ab(i, j) - m_a[i] - m_b[j] + g).powi(2);
        }
    }
    let (a1, b1, n1) = (a as u32 - 1, b as u32 - 1, n as u32 - 1);
    let scale = sum_sq(&all);
    let (melody, condition, interaction) = match design {
        TwoFactorDesign::RepeatedMeasures => {
            let ss_s = af * bf * m_s.iter().map(|m| (m - g).powi(2)).sum::<f64>();
            let mut ss_as = 0.0;
            let mut ss_bs = 0.0;
            for s in 0..n {
                for i in 0..a {
                    ss_as += bf * (m_sa(s, i) - m_a[i] - m_s[s] + g).powi(2);
                }
                for j in 0..b {
                    ss_bs += af * (m_sb(s, j) - m_b[j] - m_s[s] + g).powi(2);
                }
            }
            let ss_abs = (ss_total - ss_a - ss_b - ss_ab - ss_s - ss_as - ss_bs).max(0.0);
            (
                AnovaResult::new("melody", ss_a, a1, ss_as, a1 * n1, scale),
                AnovaResult::new("condition", ss_b, b1, ss_bs, b1 * n1, scale),
                AnovaResult::new("melody x condition", ss_ab, a1 * b1, ss_abs, a1 * b1 * n1, scale),
            )
        }
        TwoFactorDesign::BetweenSubjects => {
            let mut ss_w = 0.0;
            for m in &y {
                for i in 0..a {
                    for j in 0..b {
                        ss_w += (m[i][j] - m_ab(i, j)).powi(2);
                    }
                }
            }
            let df_w = (a * b) as u32 * n1;
            (
                AnovaResult::new("melody", ss_a, a1, ss_w, df_w, scale),
                AnovaResult::new("condition", ss_b, b1, ss_w, df_w, scale),
                AnovaResult::new("melody x condition", ss_ab, a1 * b1, ss_w, df_w, scale),
            )
        }
    };
    Ok(TwoFactorAnova {
        design,
        convention: design.convention(),
        subjects: n,
        melody,
        condition,
        interaction,
    })
}
