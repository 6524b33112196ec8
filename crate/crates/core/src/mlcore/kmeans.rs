use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::error::MlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center, ties to the lowest index.
fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(p, &centers[0]));
    for (j, c) in centers.iter().enumerate().skip(1) {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (j, d) = nearest(p, centers);
            inertia += d;
            j
        })
        .collect();
    (labels, inertia)
}

fn seed_centers<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 {
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
        }
        // at least k distinct points guarantees some positive distance
        let c = points[pick.expect("a point away from all centers")].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeansResult, MlError> {
    let dim = points.first().map(Vec::len).ok_or(MlError::TooFewPoints { needed: k.max(1), got: 0 })?;
    if dim == 0 {
        return Err(MlError::EmptyInput);
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(MlError::ShapeMismatch { expected: dim, found: p.len() });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite("kmeans points"));
    }
    let mut distinct: Vec<&Vec<f64>> = points.iter().collect();
    distinct.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if k == 0 || distinct.len() < k {
        return Err(MlError::TooFewPoints { needed: k.max(1), got: distinct.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, k, &mut rng);
    let (mut labels, mut inertia) = assign(points, &centers);
    let mut history = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            // an emptied cluster keeps its previous center
            if counts[j] > 0 {
                let c: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
                shift = shift.max(sq_dist(&c, &centers[j]).sqrt());
                centers[j] = c;
            }
        }
        (labels, inertia) = assign(points, &centers);
        history.push(inertia);
        if shift < tol {
            break;
        }
    }
    Ok(KMeansResult { centers, assignments: labels, inertia, iterations, inertia_history: history })
}
