use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::TaskSide;
use super::EnvError;
use crate::types::{Cost, Qty};

/// Total costs of one completed episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub side: TaskSide,
    pub total_qty: Qty,
    pub c_rl: Cost,
    pub c_twap: Cost,
}

impl EpisodeOutcome {
    /// Relative improvement over the teacher: `-(c_rl - c_twap) / c_twap`
    /// for buys, sign-flipped for sells. The ratio is formed from exact
    /// integers and rounded once.
    pub fn delta_c(&self) -> Result<f64, EnvError> {
        if self.c_twap == 0 {
            return Err(EnvError::ZeroTwapCost);
        }
        let num = -self.side.sign() as i128 * (self.c_rl as i128 - self.c_twap as i128);
        Ok(ratio(num, self.c_twap as i128))
    }
}

/// `num / den` after reduction; exact to one rounding while both reduced
/// terms fit in 53 bits.
fn ratio(num: i128, den: i128) -> f64 {
    let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
    let (n, d) = (num / g.max(1), den / g.max(1));
    if n.unsigned_abs() < 1 << 53 && d.unsigned_abs() < 1 << 53 {
        n as f64 / d as f64
    } else {
        let q = n / d;
        let r = n % d;
        q as f64 + r as f64 / d as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Summary statistics over a set of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episodes: usize,
    pub delta_c: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single episode.
    pub std_dev: f64,
    pub median: f64,
    /// Mean gain over mean loss; `None` without both gains and losses.
    pub glr: Option<f64>,
    pub gain_probability: f64,
}

pub fn episode_report(outcomes: &[EpisodeOutcome]) -> Result<EpisodeReport, EnvError> {
    let deltas = outcomes.iter().map(EpisodeOutcome::delta_c).collect::<Result<Vec<_>, _>>()?;
    summarize(deltas)
}

/// Statistics of a ΔC series.
pub fn summarize(delta_c: Vec<f64>) -> Result<EpisodeReport, EnvError> {
    let n = delta_c.len();
    if n == 0 {
        return Err(EnvError::NoEpisodes);
    }
    let mean = delta_c.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        (delta_c.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = delta_c.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let gains: Vec<f64> = delta_c.iter().copied().filter(|d| *d > 0.0).collect();
    let losses: Vec<f64> = delta_c.iter().filter(|d| **d < 0.0).map(|d| -d).collect();
    let glr = (!gains.is_empty() && !losses.is_empty()).then(|| {
        let g = gains.iter().sum::<f64>() / gains.len() as f64;
        let l = losses.iter().sum::<f64>() / losses.len() as f64;
        g / l
    });
    Ok(EpisodeReport {
        episodes: n,
        mean,
        std_dev,
        median,
        glr,
        gain_probability: gains.len() as f64 / n as f64,
        delta_c,
    })
}

pub const REPORT_HEADER: &str = "episode,side,total_qty,c_rl,c_twap,delta_c";

/// One CSV row per episode followed by nothing else; reals use the
/// shortest round-trip representation.
pub fn write_report_csv<W: Write>(mut out: W, outcomes: &[EpisodeOutcome]) -> Result<(), EnvError> {
    writeln!(out, "{REPORT_HEADER}")?;
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{:?}",
            i,
            o.side.as_str(),
            o.total_qty,
            o.c_rl,
            o.c_twap,
            o.delta_c()?
        )?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "episodes,mean,std_dev,median,glr,gain_probability";

/// Single-row summary CSV; an undefined GLR is written as `undefined`.
pub fn write_summary_csv<W: Write>(mut out: W, report: &EpisodeReport) -> Result<(), EnvError> {
    let glr = report.glr.map_or_else(|| "undefined".to_string(), |g| format!("{g:?}"));
    writeln!(out, "{SUMMARY_HEADER}")?;
    writeln!(
        out,
        "{},{:?},{:?},{:?},{},{:?}",
        report.episodes, report.mean, report.std_dev, report.median, glr, report.gain_probability
    )?;
    Ok(())
}
