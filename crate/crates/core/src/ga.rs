//! Real-vector genome for the GRH penalty function: 12 genes in [0, 1] and
//! the crossover/mutation operators that evolve them. Operator definitions
//! are spelled out in `docs/operators.md`.

use rand::Rng;
use thiserror::Error;

use crate::priority::GrhPriority;

pub const GENE_COUNT: usize = 12;

/// Gene order; also the header row of the persisted CSV form.
pub const GENE_NAMES: [&str; GENE_COUNT] = [
    "alpha", "beta", "gamma", "p1", "delta", "p2", "epsilon", "p3", "eta", "theta", "p4", "mu",
];

/// SBX distribution index.
pub const SBX_ETA: f64 = 20.0;
/// BLX-alpha interval extension.
pub const BLX_ALPHA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("gene {name} = {value} outside [0, 1]")]
    GeneOutOfRange { name: &'static str, value: f64 },
    #[error("expected {GENE_COUNT} genes, found {0}")]
    WrongGeneCount(usize),
    #[error("malformed parameter file: {0}")]
    Malformed(String),
}

/// The 12 GRH coefficients/exponents, each in [0, 1].
///
/// `p2` is carried so the genome stays 12 genes wide, but it does not enter
/// the penalty expression; the rehandling term's exponent is driven by `p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrhParams {
    genes: [f64; GENE_COUNT],
}

impl GrhParams {
    pub fn new(genes: [f64; GENE_COUNT]) -> Result<Self, GaError> {
        for (i, &g) in genes.iter().enumerate() {
            if !(0.0..=1.0).contains(&g) || g.is_nan() {
                return Err(GaError::GeneOutOfRange {
                    name: GENE_NAMES[i],
                    value: g,
                });
            }
        }
        Ok(GrhParams { genes })
    }

    pub fn zeros() -> Self {
        GrhParams {
            genes: [0.0; GENE_COUNT],
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let mut genes = [0.0; GENE_COUNT];
        for g in &mut genes {
            *g = rng.random::<f64>();
        }
        GrhParams { genes }
    }

    pub fn genes(&self) -> &[f64; GENE_COUNT] {
        &self.genes
    }

    pub fn alpha(&self) -> f64 {
        self.genes[0]
    }
    pub fn beta(&self) -> f64 {
        self.genes[1]
    }
    pub fn gamma(&self) -> f64 {
        self.genes[2]
    }
    pub fn p1(&self) -> f64 {
        self.genes[3]
    }
    pub fn delta(&self) -> f64 {
        self.genes[4]
    }
    pub fn p2(&self) -> f64 {
        self.genes[5]
    }
    pub fn epsilon(&self) -> f64 {
        self.genes[6]
    }
    pub fn p3(&self) -> f64 {
        self.genes[7]
    }
    pub fn eta(&self) -> f64 {
        self.genes[8]
    }
    pub fn theta(&self) -> f64 {
        self.genes[9]
    }
    pub fn p4(&self) -> f64 {
        self.genes[10]
    }
    pub fn mu(&self) -> f64 {
        self.genes[11]
    }

    /// Two-line CSV form: gene names, then the 12 values.
    pub fn to_csv(&self) -> String {
        let values: Vec<String> = self.genes.iter().map(|g| g.to_string()).collect();
        format!("{}\n{}\n", GENE_NAMES.join(","), values.join(","))
    }

    pub fn from_csv(text: &str) -> Result<Self, GaError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GaError::Malformed("empty parameter file".into()))?;
        if header.trim() != GENE_NAMES.join(",") {
            return Err(GaError::Malformed(format!(
                "unexpected header `{}`",
                header.trim()
            )));
        }
        let row = lines
            .next()
            .ok_or_else(|| GaError::Malformed("missing value row".into()))?;
        let values: Vec<f64> = row
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| GaError::Malformed(format!("bad gene `{v}`: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != GENE_COUNT {
            return Err(GaError::WrongGeneCount(values.len()));
        }
        let mut genes = [0.0; GENE_COUNT];
        genes.copy_from_slice(&values);
        GrhParams::new(genes)
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Whole-vector arithmetic crossover: `child = lambda*a + (1-lambda)*b`.
pub fn arithmetic_crossover(a: &GrhParams, b: &GrhParams, lambda: f64) -> GrhParams {
    let mut genes = [0.0; GENE_COUNT];
    for i in 0..GENE_COUNT {
        genes[i] = clamp_unit(lambda * a.genes[i] + (1.0 - lambda) * b.genes[i]);
    }
    GrhParams { genes }
}

/// Simulated binary crossover with distribution index [`SBX_ETA`]; one of
/// the two symmetric children is kept per gene.
pub fn sbx_crossover(a: &GrhParams, b: &GrhParams, rng: &mut impl Rng) -> GrhParams {
    let mut genes = [0.0; GENE_COUNT];
    for i in 0..GENE_COUNT {
        let u: f64 = rng.random();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (SBX_ETA + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (SBX_ETA + 1.0))
        };
        let (x, y) = (a.genes[i], b.genes[i]);
        let child = if rng.random::<bool>() {
            0.5 * ((1.0 + beta) * x + (1.0 - beta) * y)
        } else {
            0.5 * ((1.0 - beta) * x + (1.0 + beta) * y)
        };
        genes[i] = clamp_unit(child);
    }
    GrhParams { genes }
}

/// BLX-alpha: each gene uniform over the parent interval extended by
/// [`BLX_ALPHA`] times its width on both sides.
pub fn blx_crossover(a: &GrhParams, b: &GrhParams, rng: &mut impl Rng) -> GrhParams {
    let mut genes = [0.0; GENE_COUNT];
    for i in 0..GENE_COUNT {
        let lo = a.genes[i].min(b.genes[i]);
        let hi = a.genes[i].max(b.genes[i]);
        let spread = hi - lo;
        let min = lo - BLX_ALPHA * spread;
        let range = spread * (1.0 + 2.0 * BLX_ALPHA);
        let sample = if range > 0.0 {
            min + rng.random::<f64>() * range
        } else {
            lo
        };
        genes[i] = clamp_unit(sample);
    }
    GrhParams { genes }
}

/// One of the three crossovers, chosen uniformly per invocation.
pub fn ga_crossover(a: &GrhParams, b: &GrhParams, rng: &mut impl Rng) -> GrhParams {
    match rng.random_range(0..3) {
        0 => arithmetic_crossover(a, b, rng.random()),
        1 => sbx_crossover(a, b, rng),
        _ => blx_crossover(a, b, rng),
    }
}

/// Whether uniform mutation resamples a single gene or the whole vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationScope {
    SingleGene,
    AllGenes,
}

/// Uniform mutation: the selected gene(s) are replaced by fresh U[0, 1]
/// draws.
pub fn ga_mutate(v: &GrhParams, rng: &mut impl Rng, scope: MutationScope) -> GrhParams {
    let mut genes = v.genes;
    match scope {
        MutationScope::SingleGene => {
            let i = rng.random_range(0..GENE_COUNT);
            genes[i] = rng.random();
        }
        MutationScope::AllGenes => {
            for g in &mut genes {
                *g = rng.random();
            }
        }
    }
    GrhParams { genes }
}

/// The GRH scorer parameterised by this genome.
pub fn make_grh_pf(v: &GrhParams) -> GrhPriority {
    GrhPriority::new(*v)
}
