//! Hopkins statistic and its Beta(m, m) null.
//!
//! One replication samples `m` data points without replacement and records
//! `w_i`, the distance from each to its nearest other data point, then draws
//! `m` uniform points in the sampling region and records `u_i`, the distance
//! from each to the nearest data point. With exponent `d`,
//!
//! ```text
//! H = Σ u_i^d / Σ (u_i^d + w_i^d)
//! ```
//!
//! is near 0.5 for spatially random data and near 1 for clustered data.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Where the uniform probes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Axis-aligned bounding box of the data.
    BoundingBox,
    /// Convex hull of the data (rejection sampling from the box; `d ≤ 3`).
    ConvexHull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopkinsOptions {
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    pub region: Region,
    /// Use exponent 1 instead of the ambient dimension.
    pub classical: bool,
}

impl HopkinsOptions {
    pub fn new(m: usize, reps: usize, seed: u64) -> Self {
        Self {
            m,
            reps,
            seed,
            region: Region::BoundingBox,
            classical: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopkinsResult {
    /// Mean over replications.
    pub h: f64,
    pub m: usize,
    /// Exponent applied to the distances.
    pub d: usize,
    /// Ambient dimension of the point set.
    pub dim: usize,
    pub reps: usize,
    pub h_values: Vec<f64>,
    /// Two-sided p-value of `h` under Beta(m, m).
    pub p_value: f64,
    pub region: Region,
    pub seed: u64,
    /// Replication `r` used stream `r` of `seed`.
    pub streams: std::ops::Range<u64>,
}

/// Uniform sampler over the chosen region, built once per point set.
#[derive(Debug, Clone)]
pub struct SamplingRegion {
    lo: Vec<f64>,
    width: Vec<f64>,
    hull: Option<Hull>,
}

impl SamplingRegion {
    pub fn new(x: &DMatrix<f64>, region: Region) -> Result<Self> {
        let d = x.ncols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in x.row_iter() {
            for (c, &v) in row.iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        let width: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
        if let Some(c) = width.iter().position(|&w| w <= 0.0) {
            return Err(Error::DegenerateRegion(c));
        }
        let hull = match region {
            Region::BoundingBox => None,
            Region::ConvexHull => Some(Hull::new(x)?),
        };
        Ok(Self { lo, width, hull })
    }

    /// Draws one point; with a hull, retries until the draw falls inside.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        loop {
            let p: Vec<f64> = self
                .lo
                .iter()
                .zip(&self.width)
                .map(|(lo, w)| lo + w * rng.random::<f64>())
                .collect();
            match &self.hull {
                Some(h) if !h.contains(&p) => continue,
                _ => return p,
            }
        }
    }
}

/// Convex hull as a set of half-spaces `n·x ≤ c`, for dimensions 1 to 3.
#[derive(Debug, Clone)]
struct Hull {
    faces: Vec<(Vec<f64>, f64)>,
    tol: f64,
}

impl Hull {
    fn new(x: &DMatrix<f64>) -> Result<Self> {
        let pts: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let scale = x.amax().max(1.0);
        let tol = 1e-9 * scale;
        let faces = match x.ncols() {
            1 => Vec::new(),
            2 => hull_2d(&pts),
            3 => hull_3d(&pts, tol),
            d => {
                return Err(Error::InvalidParameter(format!(
                    "convex hull region supports dimensions 1 to 3, got {d}"
                )))
            }
        };
        if x.ncols() > 1 && faces.is_empty() {
            return Err(Error::DegenerateRegion(0));
        }
        Ok(Self { faces, tol })
    }

    fn contains(&self, p: &[f64]) -> bool {
        self.faces
            .iter()
            .all(|(n, c)| n.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() <= c + self.tol)
    }
}

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone chain; returns outward half-spaces of the counter-clockwise hull.
fn hull_2d(pts: &[Vec<f64>]) -> Vec<(Vec<f64>, f64)> {
    let mut p: Vec<&Vec<f64>> = pts.iter().collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return Vec::new();
    }
    let mut hull: Vec<&Vec<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &&Vec<f64>>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for q in iter {
            while hull.len() >= start + 2
                && cross2(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Vec::new();
    }
    (0..hull.len())
        .map(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            // outward normal of a counter-clockwise edge
            let n = vec![b[1] - a[1], a[0] - b[0]];
            let c = n[0] * a[0] + n[1] * a[1];
            (n, c)
        })
        .collect()
}

/// Brute-force facet enumeration: a plane through three points is a facet
/// when every point lies on one side of it.
fn hull_3d(pts: &[Vec<f64>], tol: f64) -> Vec<(Vec<f64>, f64)> {
    let n = pts.len();
    let mut faces = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (a, b, c) = (&pts[i], &pts[j], &pts[k]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let mut normal = vec![
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let len = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
                if len <= tol * tol {
                    continue;
                }
                normal.iter_mut().for_each(|x| *x /= len);
                let offset: f64 = normal.iter().zip(a).map(|(x, y)| x * y).sum();
                let (mut above, mut below) = (false, false);
                for p in pts {
                    let s: f64 = normal.iter().zip(p).map(|(x, y)| x * y).sum::<f64>() - offset;
                    above |= s > tol;
                    below |= s < -tol;
                    if above && below {
                        break;
                    }
                }
                match (above, below) {
                    (false, true) => faces.push((normal, offset)),
                    (true, false) => faces.push((normal.iter().map(|x| -x).collect(), -offset)),
                    _ => {}
                }
            }
        }
    }
    // coplanar input yields no facets
    if faces.len() < 4 {
        return Vec::new();
    }
    faces
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_probes(n: usize, m: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter(
            "probe count m must be at least 1".into(),
        ));
    }
    if m >= n {
        return Err(Error::TooManyProbes { m, n });
    }
    Ok(())
}

/// One replication of the Hopkins statistic over a prepared region.
pub fn hopkins_with_region(
    x: &DMatrix<f64>,
    m: usize,
    exponent: usize,
    region: &SamplingRegion,
    rng: &mut StreamRng,
) -> Result<f64> {
    let n = x.nrows();
    check_probes(n, m)?;
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let power = |d2: f64| d2.sqrt().powi(exponent as i32);

    let probes = index::sample(rng, n, m);
    let mut w_sum = 0.0;
    for i in probes.iter() {
        let nearest = rows
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| dist2(&rows[i], r))
            .fold(f64::INFINITY, f64::min);
        w_sum += power(nearest);
    }
    let mut u_sum = 0.0;
    for _ in 0..m {
        let p = region.sample(rng);
        let nearest = rows
            .iter()
            .map(|r| dist2(&p, r))
            .fold(f64::INFINITY, f64::min);
        u_sum += power(nearest);
    }
    let total = u_sum + w_sum;
    Ok(if total > 0.0 { u_sum / total } else { 0.5 })
}

/// One replication with exponent `d` = number of columns and a
/// bounding-box region.
pub fn hopkins_once(x: &DMatrix<f64>, m: usize, rng: &mut StreamRng) -> Result<f64> {
    check_probes(x.nrows(), m)?;
    let region = SamplingRegion::new(x, Region::BoundingBox)?;
    hopkins_with_region(x, m, x.ncols(), &region, rng)
}

/// Averages `reps` replications; replication `r` draws from stream `r` of
/// `seed`, so results do not depend on evaluation order.
pub fn hopkins(x: &DMatrix<f64>, opts: &HopkinsOptions) -> Result<HopkinsResult> {
    check_probes(x.nrows(), opts.m)?;
    if opts.reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replication".into(),
        ));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("point set".into()));
    }
    let region = SamplingRegion::new(x, opts.region)?;
    let exponent = if opts.classical { 1 } else { x.ncols() };
    let h_values = (0..opts.reps as u64)
        .map(|r| {
            let mut rng = rng::stream(opts.seed, r);
            hopkins_with_region(x, opts.m, exponent, &region, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let h = h_values.iter().sum::<f64>() / h_values.len() as f64;
    Ok(HopkinsResult {
        h,
        m: opts.m,
        d: exponent,
        dim: x.ncols(),
        reps: opts.reps,
        p_value: hopkins_pvalue(h, opts.m)?,
        h_values,
        region: opts.region,
        seed: opts.seed,
        streams: 0..opts.reps as u64,
    })
}

/// Two-sided p-value `2·min(F(H), 1 − F(H))` under Beta(m, m).
pub fn hopkins_pvalue(h: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::OutOfRange(format!("H = {h}")));
    }
    if m == 0 {
        return Err(Error::OutOfRange("m = 0".into()));
    }
    let f = regularized_incomplete_beta(h, m as f64, m as f64)?;
    Ok((2.0 * f.min(1.0 - f)).clamp(0.0, 1.0))
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, nine terms).
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
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for `I_x(a, b)` by the modified Lentz method.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
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
    for m in 1..=MAX_ITER {
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

/// Regularized incomplete beta `I_x(a, b)`.
///
/// Evaluates the continued fraction directly for `x < (a+1)/(a+b+2)` and via
/// `I_x(a, b) = 1 − I_{1−x}(b, a)` otherwise, where it converges fastest.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("x = {x}")));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "shape parameters a = {a}, b = {b}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b) / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a) / b)
    }
}
