//! Learning-effect analysis over the record log.
//!
//! For every complete round (attempts 1–5 all present) the first score
//! `S1` is compared with the mean `M_rest` of attempts 2–5 by a paired
//! t-test, overall and per group. A game "improved" when its last score is
//! strictly greater than `S1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::{Emotion, Group, RoundRecord};

/// Attempts that make up a complete round.
pub const ROUND_ATTEMPTS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatError {
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two pairs, got {0}")]
    TooFewPairs(usize),
    #[error("paired differences have zero variance")]
    DegenerateVariance,
    #[error("no games to analyse")]
    EmptyInput,
}

/// Scores of one round in attempt order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameTrajectory {
    pub session_id: String,
    pub round_id: String,
    pub group: Group,
    pub emotion: Emotion,
    /// `S1..S5`.
    pub scores: Vec<f64>,
}

impl GameTrajectory {
    pub fn s1(&self) -> f64 {
        self.scores[0]
    }

    /// Mean of attempts 2–5.
    pub fn m_rest(&self) -> f64 {
        self.scores[1..ROUND_ATTEMPTS as usize].iter().sum::<f64>() / f64::from(ROUND_ATTEMPTS - 1)
    }

    pub fn last(&self) -> f64 {
        *self.scores.last().expect("complete rounds have scores")
    }

    pub fn improved(&self) -> bool {
        self.last() > self.s1()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectories {
    pub games: Vec<GameTrajectory>,
    /// Rounds left out because some of attempts 1–5 are missing.
    pub skipped: usize,
}

/// Groups records by (session, round) and keeps the complete rounds.
pub fn trajectories(records: &[RoundRecord]) -> Trajectories {
    let mut rounds: BTreeMap<(&str, &str), Vec<&RoundRecord>> = BTreeMap::new();
    for r in records {
        rounds
            .entry((&r.session_id, &r.round_id))
            .or_default()
            .push(r);
    }
    let mut out = Trajectories::default();
    for ((session_id, round_id), mut recs) in rounds {
        recs.sort_by_key(|r| r.attempt_index);
        let scores: Vec<f64> = (1..=ROUND_ATTEMPTS)
            .map_while(|i| recs.iter().find(|r| r.attempt_index == i).map(|r| r.score))
            .collect();
        if scores.len() < ROUND_ATTEMPTS as usize {
            out.skipped += 1;
            continue;
        }
        out.games.push(GameTrajectory {
            session_id: session_id.to_string(),
            round_id: round_id.to_string(),
            group: recs[0].group,
            emotion: recs[0].emotion,
            scores,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    /// Two-sided.
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Paired t-test on `d = b - a`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatError> {
    if a.len() != b.len() {
        return Err(StatError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatError::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let sd = sample_sd(&d);
    let md = mean(&d);
    if sd <= 1e-15 * (1.0 + md.abs()) {
        return Err(StatError::DegenerateVariance);
    }
    let t = md / (sd / (n as f64).sqrt());
    let df = n - 1;
    Ok(TTestResult {
        t,
        df,
        p: student_t_two_sided(t, df as f64),
        mean_a: mean(a),
        mean_b: mean(b),
        sd_a: sample_sd(a),
        sd_b: sample_sd(b),
        n,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// `I_x(a, b)` by Lentz's continued fraction, using the symmetry
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` where the fraction converges faster.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = f64::from(m);
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub improved: usize,
    pub games: usize,
}

impl Rate {
    pub fn fraction(&self) -> f64 {
        self.improved as f64 / self.games as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImprovementRates {
    pub overall: Rate,
    /// `None` when the group played no complete game.
    pub control: Option<Rate>,
    pub treatment: Option<Rate>,
}

fn rate<'a>(games: impl Iterator<Item = &'a GameTrajectory>) -> Option<Rate> {
    let (mut improved, mut n) = (0, 0);
    for g in games {
        n += 1;
        improved += usize::from(g.improved());
    }
    (n > 0).then_some(Rate { improved, games: n })
}

/// Share of games whose last score beats the first, overall and per group.
pub fn improvement_rate(games: &[GameTrajectory]) -> Result<ImprovementRates, StatError> {
    Ok(ImprovementRates {
        overall: rate(games.iter()).ok_or(StatError::EmptyInput)?,
        control: rate(games.iter().filter(|g| g.group == Group::Control)),
        treatment: rate(games.iter().filter(|g| g.group == Group::Treatment)),
    })
}

/// `S1` versus `M_rest` for one subset of games.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Comparison {
    Tested(TTestResult),
    /// Not computable; carries the reason.
    Absent(String),
}

fn compare<'a>(games: impl Iterator<Item = &'a GameTrajectory>) -> Comparison {
    let (s1, rest): (Vec<f64>, Vec<f64>) = games.map(|g| (g.s1(), g.m_rest())).unzip();
    if s1.is_empty() {
        return Comparison::Absent("no games".into());
    }
    match paired_t_test(&s1, &rest) {
        Ok(t) => Comparison::Tested(t),
        Err(e) => Comparison::Absent(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub games: usize,
    pub skipped: usize,
    pub all: Comparison,
    pub control: Comparison,
    pub treatment: Comparison,
    pub rates: Option<ImprovementRates>,
}

pub fn analysis_report(records: &[RoundRecord]) -> AnalysisReport {
    let tr = trajectories(records);
    let by = |g: Group| tr.games.iter().filter(move |x| x.group == g);
    AnalysisReport {
        games: tr.games.len(),
        skipped: tr.skipped,
        all: compare(tr.games.iter()),
        control: compare(by(Group::Control)),
        treatment: compare(by(Group::Treatment)),
        rates: improvement_rate(&tr.games).ok(),
    }
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "p<0.001".to_string()
    } else {
        format!("p={p:.4}")
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comparison::Tested(r) => write!(
                f,
                "n={}  S1 M={:.4} SD={:.4}  M_rest M={:.4} SD={:.4}  t({})={:.2}, {}",
                r.n,
                r.mean_a,
                r.sd_a,
                r.mean_b,
                r.sd_b,
                r.df,
                r.t,
                format_p(r.p)
            ),
            Comparison::Absent(why) => write!(f, "absent ({why})"),
        }
    }
}

fn format_rate(r: Option<Rate>) -> String {
    match r {
        Some(r) => format!("{:.1}% ({}/{})", 100.0 * r.fraction(), r.improved, r.games),
        None => "absent".to_string(),
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "games analysed: {} (skipped {} incomplete rounds)",
            self.games, self.skipped
        )?;
        writeln!(
            f,
            "first score vs mean of remaining four (paired t-test, two-sided)"
        )?;
        writeln!(f, "  all games:  {}", self.all)?;
        writeln!(f, "  control:    {}", self.control)?;
        writeln!(f, "  treatment:  {}", self.treatment)?;
        writeln!(f, "games with increased score (last > first)")?;
        match &self.rates {
            Some(r) => {
                writeln!(f, "  all games:  {}", format_rate(Some(r.overall)))?;
                writeln!(f, "  control:    {}", format_rate(r.control))?;
                writeln!(f, "  treatment:  {}", format_rate(r.treatment))
            }
            None => writeln!(f, "  absent (no games)"),
        }
    }
}
