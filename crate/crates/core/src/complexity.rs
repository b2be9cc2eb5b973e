//! Attention multiplication counts for the `Q K^T V` products, and a
//! wall-clock comparison of cached against uncached decoding.
//!
//! With the cache, step `t` of L-shape decoding multiplies a `(2t-1) x D`
//! query block against keys/values of length `t^2`, so
//! `M = sum_{t=1}^{sqrt N} (2t-1) t^2 D = (N^2/2 + 2/3 N^{3/2} - 1/6 sqrt N) D`.
//! The cache length `t^2` is the usual approximation: it ignores the
//! condition prefix and counts the square including the block being decoded.

use std::fmt::Write as _;
use std::time::Instant;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::net::Network;
use crate::sampler::{sample, sample_without_cache, SampleConfig};

fn exact_sqrt(n: u64) -> Result<u64> {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    if r * r == n {
        Ok(r)
    } else {
        Err(Error::NotSquare(n))
    }
}

/// Direct summation of the cached L-shape decoding count.
pub fn lformer_mults(n: u64, d: u64) -> Result<u128> {
    let side = exact_sqrt(n)? as u128;
    Ok((1..=side).map(|t| (2 * t - 1) * t * t).sum::<u128>() * d as u128)
}

/// Closed form evaluated exactly as a rational.
pub fn lformer_closed_form(n: u64, d: u64) -> Result<Ratio<i128>> {
    let root = exact_sqrt(n)? as i128;
    let n = n as i128;
    let m = Ratio::new(n * n, 2) + Ratio::new(2 * n * root, 3) - Ratio::new(root, 6);
    Ok(m * Ratio::from_integer(d as i128))
}

/// Bidirectional (non-autoregressive) model: `T` full `N x N` passes.
pub fn bidir_mults(steps: u64, n: u64, d: u64) -> u128 {
    steps as u128 * n as u128 * n as u128 * d as u128
}

/// Token-by-token decoding with a cache: one query row per step against a
/// cache of length `1..=N`.
pub fn ar_cached_mults(n: u64, d: u64) -> u128 {
    let n = n as u128;
    d as u128 * n * (n + 1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpCountReport {
    pub scheme: &'static str,
    pub n: u64,
    pub d: u64,
    pub steps: u64,
    pub mults: u128,
    /// Exact closed form where one exists.
    pub closed_form: Option<Ratio<i128>>,
    /// Rounded figure quoted in the literature, if any.
    pub reference: Option<f64>,
}

impl OpCountReport {
    pub fn matches_closed_form(&self) -> bool {
        self.closed_form
            .is_none_or(|c| c == Ratio::from_integer(self.mults as i128))
    }

    pub const CSV_HEADER: &'static str = "scheme,n,d,steps,mults,closed_form,reference";

    pub fn csv_line(&self) -> String {
        let closed = self.closed_form.map(|c| c.to_string()).unwrap_or_default();
        let reference = self.reference.map(|r| format!("{r:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.scheme, self.n, self.d, self.steps, self.mults, closed, reference
        )
    }
}

/// Reports for the three schemes at one `(N, D)`; `N` must be square.
pub fn compare(n: u64, d: u64) -> Result<Vec<OpCountReport>> {
    let side = exact_sqrt(n)?;
    let quoted = (n, d) == (1024, 1024);
    Ok(vec![
        OpCountReport {
            scheme: "lformer",
            n,
            d,
            steps: side,
            mults: lformer_mults(n, d)?,
            closed_form: Some(lformer_closed_form(n, d)?),
            reference: quoted.then_some(0.5e9),
        },
        OpCountReport {
            scheme: "bidirectional",
            n,
            d,
            steps: side,
            mults: bidir_mults(side, n, d),
            closed_form: None,
            reference: quoted.then_some(33e9),
        },
        OpCountReport {
            scheme: "ar_cached",
            n,
            d,
            steps: n,
            mults: ar_cached_mults(n, d),
            closed_form: None,
            reference: None,
        },
    ])
}

/// Checks summation against the closed form for every square `N <= max_n`
/// and each `D`. Returns the offending `(N, D)` pairs.
pub fn verify_identity(max_n: u64, dims: &[u64]) -> Vec<(u64, u64)> {
    let mut bad = Vec::new();
    let mut side = 1u64;
    while side * side <= max_n {
        let n = side * side;
        for &d in dims {
            let sum = lformer_mults(n, d).expect("square");
            let closed = lformer_closed_form(n, d).expect("square");
            if Ratio::from_integer(sum as i128) != closed {
                bad.push((n, d));
            }
        }
        side += 1;
    }
    bad
}

/// Fixed-width table of reports.
pub fn render_table(reports: &[OpCountReport]) -> String {
    let mut out = format!(
        "{:<14} {:>6} {:>6} {:>6} {:>18} {:>22} {:>10}\n",
        "scheme", "N", "D", "T", "exact", "closed form", "reference"
    );
    for r in reports {
        let closed = r
            .closed_form
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into());
        let reference = r
            .reference
            .map(|v| format!("{:.1}B", v / 1e9))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6} {:>18} {:>22} {:>10}",
            r.scheme,
            r.n,
            r.d,
            r.steps,
            group_thousands(r.mults),
            closed,
            reference
        );
    }
    out
}

pub fn group_thousands(v: u128) -> String {
    let digits = v.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchResult {
    pub h: usize,
    pub repeats: usize,
    pub cached_ms: f64,
    pub uncached_ms: f64,
    pub speedup: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall-clock of cached and uncached sampling over `repeats` runs.
/// Both decoders draw the same grids; the run fails if they ever disagree.
pub fn bench_decode(net: &Network, repeats: usize, cfg: &SampleConfig) -> Result<BenchResult> {
    let repeats = repeats.max(1);
    let mut cached = Vec::with_capacity(repeats);
    let mut uncached = Vec::with_capacity(repeats);
    for i in 0..repeats {
        let cfg = SampleConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            ..cfg.clone()
        };
        let start = Instant::now();
        let a = sample(net, 0, &cfg)?;
        cached.push(start.elapsed().as_secs_f64() * 1e3);
        let start = Instant::now();
        let b = sample_without_cache(net, 0, &cfg)?;
        uncached.push(start.elapsed().as_secs_f64() * 1e3);
        if a != b {
            return Err(Error::Verification(
                "cached and uncached decoding disagree".into(),
            ));
        }
    }
    let cached_ms = median(cached);
    let uncached_ms = median(uncached);
    Ok(BenchResult {
        h: net.config().h,
        repeats,
        cached_ms,
        uncached_ms,
        speedup: uncached_ms / cached_ms,
    })
}
