//! Scan-condition vectors and exact t-SNE.
//!
//! Each site is represented by `(vendor code, TE, FA)`. TR and TI are not
//! used because they are frequently missing. The three columns live on very
//! different scales, so they are z-scored before embedding.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{self, tag};
use crate::tabular::{Matrix, ScanParamsRecord};
use crate::{Error, Result, Warning};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanVector {
    pub site_id: String,
    pub vendor_code: usize,
    pub te_sec: f64,
    pub fa_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Encoded {
    pub vectors: Vec<ScanVector>,
    /// Vendor strings; index = code.
    pub vendors: Vec<String>,
    pub warnings: Vec<Warning>,
}

impl Encoded {
    /// `N × 3` matrix of `(vendor_code, te_sec, fa_deg)`.
    pub fn matrix(&self) -> Matrix {
        let data = self
            .vectors
            .iter()
            .flat_map(|v| [v.vendor_code as f64, v.te_sec, v.fa_deg])
            .collect();
        Matrix::new(self.vectors.len(), 3, data).expect("three columns per vector")
    }
}

/// Dictionary-encodes vendors (codes in order of first appearance among the
/// kept sites) and drops sites missing TE or FA.
pub fn encode_scan_conditions(records: &[ScanParamsRecord]) -> Result<Encoded> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Encoded::default();
    for rec in records {
        let (Some(te), Some(fa)) = (rec.te_sec, rec.fa_deg) else {
            out.warnings.push(Warning(format!(
                "site {}: TE or FA missing, excluded from embedding",
                rec.site_id
            )));
            continue;
        };
        let vendor = rec.vendor.trim();
        let code = match out.vendors.iter().position(|v| v == vendor) {
            Some(c) => c,
            None => {
                out.vendors.push(vendor.into());
                out.vendors.len() - 1
            }
        };
        out.vectors.push(ScanVector {
            site_id: rec.site_id.clone(),
            vendor_code: code,
            te_sec: te,
            fa_deg: fa,
        });
    }
    if out.vectors.is_empty() {
        return Err(Error::InvalidRecord("every site lacks TE or FA".into()));
    }
    Ok(out)
}

/// Z-scores each column (population std). Constant columns become zeros
/// with a warning.
pub fn standardize(points: &Matrix) -> Result<(Matrix, Vec<Warning>)> {
    let n = points.rows();
    if n < 2 {
        return Err(Error::TooFewRows { n, k: 2 });
    }
    let mut out = Matrix::zeros(n, points.cols());
    let mut warnings = Vec::new();
    for c in 0..points.cols() {
        let col = points.column(c);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = libm::sqrt(var);
        if sd == 0.0 {
            warnings.push(Warning(format!(
                "column {c} is constant, standardized to zeros"
            )));
            continue;
        }
        for (r, v) in col.iter().enumerate() {
            out.set(r, c, (v - mean) / sd);
        }
    }
    Ok((out, warnings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 5.0,
            iterations: 1000,
            learning_rate: 100.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch: 250,
            init_std: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutput {
    /// `N × 2`
    pub embedding: Matrix,
    /// KL(P‖Q) at the start of every iteration, with the true (unexaggerated) P.
    pub kl_history: Vec<f64>,
    /// KL(P‖Q) of the returned embedding.
    pub final_kl: f64,
}

const ENTROPY_TOL: f64 = 1e-10;
const BISECTION_STEPS: usize = 200;
const DUPLICATE_JITTER: f64 = 1e-9;
const FLOOR: f64 = 1e-12;

fn squared_distances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Adds `1e-9 · k` to the first coordinate of the k-th repeat of a point.
pub fn jitter_duplicates(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 1..x.rows() {
        let repeats = (0..i).filter(|&j| x.row(j) == x.row(i)).count();
        if repeats > 0 {
            out.set(i, 0, x.get(i, 0) + DUPLICATE_JITTER * repeats as f64);
        }
    }
    out
}

/// Row-conditional affinities `p(j|i)` with Gaussian precision chosen by
/// bisection so that each row's Shannon entropy (nats) equals
/// `ln(perplexity)`. Returns the `N × N` row-major matrix and the achieved
/// entropies.
pub fn conditional_affinities(x: &Matrix, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows();
    let dist = squared_distances(x);
    let target = libm::log(perplexity);
    let mut p = vec![0.0; n * n];
    let mut entropies = vec![0.0; n];
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        let dmin = (0..n)
            .filter(|&j| j != i)
            .map(|j| row[j])
            .fold(f64::INFINITY, f64::min);
        let eval = |beta: f64, out: &mut [f64]| -> f64 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j == i {
                    out[j] = 0.0;
                    continue;
                }
                let shifted = row[j] - dmin;
                let w = libm::exp(-beta * shifted);
                out[j] = w;
                sum += w;
                weighted += w * shifted;
            }
            for v in out.iter_mut() {
                *v /= sum;
            }
            libm::log(sum) + beta * weighted / sum
        };
        let out = &mut p[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut h = eval(beta, out);
        for _ in 0..BISECTION_STEPS {
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_infinite() {
                    beta * 2.0
                } else {
                    (beta + hi) / 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = eval(beta, out);
        }
        entropies[i] = h;
    }
    (p, entropies)
}

/// Symmetrized joint affinities `(p(j|i) + p(i|j)) / 2N`.
pub fn joint_affinities(x: &Matrix, perplexity: f64) -> Vec<f64> {
    let n = x.rows();
    let (cond, _) = conditional_affinities(x, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Student-t kernel numerators `1 / (1 + |y_i − y_j|²)` (zero diagonal) and
/// their sum.
fn kernel(y: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let k = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = k;
            num[j * n + i] = k;
            z += 2.0 * k;
        }
    }
    (num, z)
}

fn kl_from(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &k)| pij * libm::log(pij.max(FLOOR) / (k / z).max(FLOOR)))
        .sum()
}

/// KL(P‖Q) for a flattened `N × 2` embedding `y`.
pub fn kl_divergence(p: &[f64], y: &[f64]) -> f64 {
    let n = y.len() / 2;
    let (num, z) = kernel(y, n);
    kl_from(p, &num, z)
}

/// Gradient of KL(αP‖Q) with respect to `y`:
/// `4 Σ_j (α p_ij − q_ij)(y_i − y_j) / (1 + |y_i − y_j|²)`.
pub fn kl_gradient(p: &[f64], y: &[f64], exaggeration: f64) -> Vec<f64> {
    let n = y.len() / 2;
    let (num, z) = kernel(y, n);
    gradient_from(p, y, &num, z, exaggeration)
}

fn gradient_from(p: &[f64], y: &[f64], num: &[f64], z: f64, exaggeration: f64) -> Vec<f64> {
    let n = y.len() / 2;
    let mut g = vec![0.0; 2 * n];
    for i in 0..n {
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            let k = num[i * n + j];
            let m = (exaggeration * p[i * n + j] - k / z) * k;
            gx += m * (y[2 * i] - y[2 * j]);
            gy += m * (y[2 * i + 1] - y[2 * j + 1]);
        }
        g[2 * i] = 4.0 * gx;
        g[2 * i + 1] = 4.0 * gy;
    }
    g
}

/// Exact t-SNE of `points` into two dimensions.
pub fn tsne(points: &Matrix, config: &TsneConfig) -> Result<TsneOutput> {
    let n = points.rows();
    if n < 4 {
        return Err(Error::TooFewRows { n, k: 4 });
    }
    if !(config.perplexity > 1.0 && config.perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(Error::InvalidConfig(format!(
            "perplexity {} must lie in (1, {:.3}) for {n} points",
            config.perplexity,
            (n as f64 - 1.0) / 3.0
        )));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if let Some((row, col)) = points.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }

    let p = joint_affinities(&jitter_duplicates(points), config.perplexity);
    let mut rng = rng::stream(config.seed, &[tag::EMBED]);
    let mut y: Vec<f64> = (0..2 * n)
        .map(|_| config.init_std * rng::normal(&mut rng))
        .collect();
    let mut velocity = vec![0.0; 2 * n];
    let mut kl_history = Vec::with_capacity(config.iterations);

    for t in 0..config.iterations {
        let (num, z) = kernel(&y, n);
        kl_history.push(kl_from(&p, &num, z));
        let alpha = if t < config.exaggeration_iters {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if t < config.momentum_switch {
            config.momentum_initial
        } else {
            config.momentum_final
        };
        let grad = gradient_from(&p, &y, &num, z, alpha);
        for k in 0..2 * n {
            velocity[k] = momentum * velocity[k] - config.learning_rate * grad[k];
            y[k] += velocity[k];
        }
        for dim in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + dim]).sum::<f64>() / n as f64;
            for i in 0..n {
                y[2 * i + dim] -= mean;
            }
        }
    }
    let final_kl = kl_divergence(&p, &y);
    Ok(TsneOutput {
        embedding: Matrix::new(n, 2, y)?,
        kl_history,
        final_kl,
    })
}
