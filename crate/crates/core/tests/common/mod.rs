//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the code under test except for data containers
//! and the seeded stream generator used to draw inputs.

#![allow(dead_code)]

use metasel_core::forest::{Node, Tree};
use metasel_core::rng;
use metasel_core::{Label, Matrix};

/// A greedy CART tree built by brute force.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleTree {
    Leaf([u32; 2]),
    Split {
        feature: usize,
        threshold: f64,
        counts: [u32; 2],
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

/// Grows a full-depth Gini tree over every feature on the given rows.
///
/// For each feature and each pair of consecutive distinct values the split
/// is scored by its weighted impurity `2ab/n_l + 2cd/n_r`; the smallest wins,
/// earlier (feature, threshold) pairs winning ties.
pub fn oracle_cart(x: &[Vec<f64>], y: &[usize], rows: &[usize]) -> OracleTree {
    let mut counts = [0u32; 2];
    for &r in rows {
        counts[y[r]] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return OracleTree::Leaf(counts);
    }
    let d = x[0].len();
    // (numerator, denominator) of the weighted impurity
    let mut best: Option<(i128, i128, usize, f64)> = None;
    #[allow(clippy::needless_range_loop)]
    for f in 0..d {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let mid = w[0] / 2.0 + w[1] / 2.0;
            let t = if mid >= w[1] { w[0] } else { mid };
            let mut l = [0i128; 2];
            let mut r = [0i128; 2];
            for &i in rows {
                if x[i][f] <= t {
                    l[y[i]] += 1;
                } else {
                    r[y[i]] += 1;
                }
            }
            let nl = l[0] + l[1];
            let nr = r[0] + r[1];
            let num = 2 * l[0] * l[1] * nr + 2 * r[0] * r[1] * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((bn, bd, _, _)) => num * bd < bn * den,
            };
            if better {
                best = Some((num, den, f, t));
            }
        }
    }
    match best {
        None => OracleTree::Leaf(counts),
        Some((_, _, feature, threshold)) => {
            let (lr, rr): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[i][feature] <= threshold);
            OracleTree::Split {
                feature,
                threshold,
                counts,
                left: Box::new(oracle_cart(x, y, &lr)),
                right: Box::new(oracle_cart(x, y, &rr)),
            }
        }
    }
}

/// Structural equality between a fitted tree and an oracle tree.
pub fn same_tree(tree: &Tree, node: usize, oracle: &OracleTree) -> bool {
    match (&tree.nodes()[node], oracle) {
        (Node::Leaf { counts }, OracleTree::Leaf(c)) => counts == c,
        (
            Node::Split {
                feature,
                threshold,
                left,
                right,
                counts,
            },
            OracleTree::Split {
                feature: f,
                threshold: t,
                counts: c,
                left: ol,
                right: or,
            },
        ) => {
            feature == f
                && threshold.to_bits() == t.to_bits()
                && counts == c
                && same_tree(tree, *left, ol)
                && same_tree(tree, *right, or)
        }
        _ => false,
    }
}

/// A tiny dataset with heavy value ties: `n` in 2..=8, `d` in 1..=3, values
/// on a quarter-step grid, labels from a fair coin.
pub fn tiny_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut g = rng::stream(seed, &[0x7e57]);
    let n = 2 + rng::index(&mut g, 7);
    let d = 1 + rng::index(&mut g, 3);
    let x = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng::index(&mut g, 6) as f64 * 0.25 - 0.5)
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng::index(&mut g, 2)).collect();
    (x, y)
}

pub fn to_inputs(x: &[Vec<f64>], y: &[usize]) -> (Matrix, Vec<Label>) {
    (
        Matrix::from_rows(x).unwrap(),
        y.iter().map(|&l| Label::from_index(l)).collect(),
    )
}

/// Textbook two-pass Pearson correlation, written against the definition.
pub fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// `Γ(k/2)` for a positive integer `k`, by the recurrence from `Γ(1) = 1`
/// and `Γ(1/2) = √π`.
pub fn gamma_half(k: u32) -> f64 {
    let (mut g, mut x) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Student-t density with `df` degrees of freedom.
pub fn t_density(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    c * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let lm = (a + m) / 2.0;
    let rm = (m + b) / 2.0;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f((a + b) / 2.0);
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Two-sided p-value of a Pearson correlation by direct integration of the
/// t-density: `p = 1 − 2∫₀^|t| f(s) ds`.
pub fn quadrature_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as u32;
    let t = (r * ((n as f64 - 2.0) / (1.0 - r * r)).sqrt()).abs();
    let mass = integrate(&|s| t_density(s, df), 0.0, t, 1e-14);
    (1.0 - 2.0 * mass).clamp(0.0, 1.0)
}

/// Central finite-difference gradient of `f` at `y`.
pub fn finite_difference(f: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> Vec<f64> {
    let mut probe = y.to_vec();
    (0..y.len())
        .map(|i| {
            probe[i] = y[i] + h;
            let up = f(&probe);
            probe[i] = y[i] - h;
            let down = f(&probe);
            probe[i] = y[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `N` points in 3-D split into two Gaussian clusters of unit spread whose
/// centroids lie `separation` apart. Returns the points and cluster labels.
pub fn two_clusters(n: usize, separation: f64, seed: u64) -> (Matrix, Vec<usize>) {
    let mut g = rng::stream(seed, &[0xc1u64]);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let offset = c as f64 * separation;
        rows.push(vec![
            offset + rng::normal(&mut g),
            rng::normal(&mut g),
            rng::normal(&mut g),
        ]);
        labels.push(c);
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

/// True when every point's nearest neighbour (Euclidean) shares its label.
pub fn neighbours_preserved(y: &Matrix, labels: &[usize]) -> bool {
    let n = y.rows();
    (0..n).all(|i| {
        let nearest = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let da: f64 = y
                    .row(i)
                    .iter()
                    .zip(y.row(a))
                    .map(|(p, q)| (p - q).powi(2))
                    .sum();
                let db: f64 = y
                    .row(i)
                    .iter()
                    .zip(y.row(b))
                    .map(|(p, q)| (p - q).powi(2))
                    .sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        labels[nearest] == labels[i]
    })
}

/// Independent label-free noise data: `n` rows of standard normals with
/// balanced labels.
pub fn noise_table(n: usize, d: usize, seed: u64) -> (Matrix, Vec<Label>) {
    let mut g = rng::stream(seed, &[0x401e]);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng::normal(&mut g)).collect())
        .collect();
    let labels = (0..n).map(|i| Label::from_index(i % 2)).collect();
    (Matrix::from_rows(&rows).unwrap(), labels)
}
