//! Token grids and synthetic class-conditioned datasets.
//!
//! The generators stand in for a stage-one image tokenizer: each produces
//! grids whose structure is a known function of the class, which makes
//! conditional learning checkable without real images.

pub(crate) mod files;

pub use files::{load_grids, save_grids, write_pgm, GridFile, NO_CLASS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lgrid::GridShape;

/// `h x h` token ids, row-major, 0-indexed coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    shape: GridShape,
    tokens: Vec<u32>,
}

impl TokenGrid {
    pub fn filled(shape: GridShape, token: u32) -> Self {
        Self {
            shape,
            tokens: vec![token; shape.num_tokens()],
        }
    }

    pub fn from_vec(shape: GridShape, tokens: Vec<u32>) -> Result<Self> {
        if tokens.len() != shape.num_tokens() {
            return Err(Error::LengthMismatch {
                expected: shape.num_tokens(),
                actual: tokens.len(),
            });
        }
        Ok(Self { shape, tokens })
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let shape = GridShape::new(rows.len())?;
        let mut tokens = Vec::with_capacity(shape.num_tokens());
        for row in rows {
            if row.len() != rows.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{0}x{0}", rows.len()),
                    actual: format!("row of length {}", row.len()),
                });
            }
            tokens.extend_from_slice(row);
        }
        Ok(Self { shape, tokens })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn side(&self) -> usize {
        self.shape.side()
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.tokens[row * self.side() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, token: u32) {
        let h = self.side();
        self.tokens[row * h + col] = token;
    }

    /// Row-major token ids.
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Checks every id lies in `0..k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self.tokens.iter().find(|&&t| t as usize >= k) {
            Some(&id) => Err(Error::InvalidToken { id, k }),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.tokens.chunks(self.side()) {
            let line: Vec<String> = row.iter().map(|t| t.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Constant,
    Quadrant,
    Markov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub h: usize,
    pub k: usize,
    pub n_classes: usize,
    pub n_samples: usize,
    pub kind: GeneratorKind,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::EmptyGrid);
        }
        if self.k == 0 || self.n_classes == 0 {
            return Err(Error::Config("k and n_classes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!(
                "noise_rate {} outside [0, 1)",
                self.noise_rate
            )));
        }
        if self.noise_rate > 0.0 && self.k < 2 {
            return Err(Error::Config("noise needs a codebook of at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub class: usize,
    pub grid: TokenGrid,
}

/// Ids of the four quadrants (top-left, top-right, bottom-left, bottom-right)
/// for `class`. Distinct across classes and quadrants while
/// `4 * n_classes <= k`.
pub fn quadrant_ids(class: usize, n_classes: usize, k: usize) -> [u32; 4] {
    std::array::from_fn(|q| ((class + q * n_classes) % k) as u32)
}

/// Row-stochastic `k x k` transition matrix of the Markov texture for `class`.
/// Each row puts 0.75 on a class-shifted successor and spreads the rest
/// uniformly.
pub fn markov_transition(class: usize, k: usize) -> Vec<Vec<f64>> {
    let rest = 0.25 / k as f64;
    (0..k)
        .map(|state| {
            let mut row = vec![rest; k];
            row[(state + class + 1) % k] += 0.75;
            row
        })
        .collect()
}

fn sample_row(row: &[f64], rng: &mut impl Rng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    (row.len() - 1) as u32
}

fn base_grid(spec: &DatasetSpec, class: usize, rng: &mut ChaCha8Rng) -> TokenGrid {
    let shape = GridShape::new(spec.h).expect("validated");
    let h = spec.h;
    match spec.kind {
        GeneratorKind::Constant => TokenGrid::filled(shape, (class % spec.k) as u32),
        GeneratorKind::Quadrant => {
            let ids = quadrant_ids(class, spec.n_classes, spec.k);
            let half = h / 2;
            let mut g = TokenGrid::filled(shape, 0);
            for r in 0..h {
                for c in 0..h {
                    let q = usize::from(r >= half) * 2 + usize::from(c >= half);
                    g.set(r, c, ids[q]);
                }
            }
            g
        }
        GeneratorKind::Markov => {
            let table = markov_transition(class, spec.k);
            let seed_state = (class % spec.k) as u32;
            let mut g = TokenGrid::filled(shape, 0);
            for r in 0..h {
                for c in 0..h {
                    let left = if c > 0 { g.get(r, c - 1) } else { seed_state };
                    let up = if r > 0 { g.get(r - 1, c) } else { seed_state };
                    let state = (left as usize + up as usize) % spec.k;
                    g.set(r, c, sample_row(&table[state], rng));
                }
            }
            g
        }
    }
}

/// Generates `n_samples` examples; example `i` has class `i mod n_classes`.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<Example>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let class = i % spec.n_classes;
        let mut grid = base_grid(spec, class, &mut rng);
        if spec.noise_rate > 0.0 {
            for t in grid.tokens.iter_mut() {
                if rng.random::<f64>() < spec.noise_rate {
                    let other = rng.random_range(0..spec.k as u32 - 1);
                    *t = if other >= *t { other + 1 } else { other };
                }
            }
        }
        out.push(Example { class, grid });
    }
    Ok(out)
}
