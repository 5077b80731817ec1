//! Non-temporal reference predictor: k-means over observed localizations.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::point::Point;
use crate::rng::derive_aux_stream;
use crate::sim::LocalizationRecord;

const RESTART_STREAM: u64 = 0x6b6d_6561_6e73;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("no localizations to cluster")]
    EmptyInput,
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    pub n_out: usize,
    pub n_restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(n_out: usize, seed: u64) -> Self {
        Self {
            n_out,
            n_restarts: 8,
            max_iters: 100,
            seed,
        }
    }

    fn validate(&self) -> Result<(), BaselineError> {
        if self.n_out == 0 || self.n_restarts == 0 || self.max_iters == 0 {
            return Err(BaselineError::InvalidConfig(format!(
                "n_out, n_restarts and max_iters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

struct Clustering {
    centers: Vec<Point>,
    sizes: Vec<usize>,
    wcss: f64,
}

fn nearest(p: &Point, centers: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = p.dist2(c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Greedy farthest-point seeding from a random first center.
fn farthest_point_init<R: Rng>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut dmin: Vec<f64> = points.iter().map(|p| p.dist2(&centers[0])).collect();
    while centers.len() < k {
        let mut far = 0;
        for (i, d) in dmin.iter().enumerate() {
            if *d > dmin[far] {
                far = i;
            }
        }
        let c = points[far];
        for (d, p) in dmin.iter_mut().zip(points) {
            *d = d.min(p.dist2(&c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(points: &[Point], mut centers: Vec<Point>, max_iters: usize) -> Clustering {
    let k = centers.len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..max_iters {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let (c, _) = nearest(p, &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // mean as anchor + mean offset, exact for identical members
        let mut anchor: Vec<Option<Point>> = vec![None; k];
        let mut acc = vec![(0.0, 0.0, 0usize); k];
        for (&l, p) in labels.iter().zip(points) {
            let a = *anchor[l].get_or_insert(*p);
            acc[l].0 += p.x_nm - a.x_nm;
            acc[l].1 += p.y_nm - a.y_nm;
            acc[l].2 += 1;
        }
        for (c, (a, (sx, sy, n))) in centers.iter_mut().zip(anchor.into_iter().zip(acc)) {
            if let Some(a) = a {
                *c = Point::new(a.x_nm + sx / n as f64, a.y_nm + sy / n as f64);
            }
        }
    }
    let mut sizes = vec![0; k];
    let mut wcss = 0.0;
    for p in points {
        let (c, d) = nearest(p, &centers);
        sizes[c] += 1;
        wcss += d;
    }
    Clustering {
        centers,
        sizes,
        wcss,
    }
}

/// Predicts `n_out` emitter positions by clustering localization
/// coordinates; frame indices are ignored.
pub fn cluster_predict(
    localizations: &[LocalizationRecord],
    config: &BaselineConfig,
) -> Result<Vec<Point>, BaselineError> {
    let points: Vec<Point> = localizations
        .iter()
        .map(|r| Point::new(r.x_nm, r.y_nm))
        .collect();
    cluster_points(&points, config)
}

pub fn cluster_points(points: &[Point], config: &BaselineConfig) -> Result<Vec<Point>, BaselineError> {
    config.validate()?;
    if points.is_empty() {
        return Err(BaselineError::EmptyInput);
    }
    let mut distinct = points.to_vec();
    distinct.sort_by(|a, b| a.x_nm.total_cmp(&b.x_nm).then(a.y_nm.total_cmp(&b.y_nm)));
    distinct.dedup();
    let k = config.n_out.min(distinct.len());

    let best = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_aux_stream(config.seed, RESTART_STREAM, r as u64);
            let init = farthest_point_init(points, k, &mut rng);
            (r, lloyd(points, init, config.max_iters))
        })
        .min_by(|(ra, a), (rb, b)| a.wcss.total_cmp(&b.wcss).then(ra.cmp(rb)))
        .map(|(_, c)| c)
        .expect("at least one restart");

    let mut out = best.centers.clone();
    if out.len() < config.n_out {
        let mut by_size: Vec<usize> = (0..best.centers.len()).collect();
        by_size.sort_by(|&a, &b| best.sizes[b].cmp(&best.sizes[a]).then(a.cmp(&b)));
        for i in by_size.iter().cycle().take(config.n_out - out.len()) {
            out.push(best.centers[*i]);
        }
    }
    Ok(out)
}
