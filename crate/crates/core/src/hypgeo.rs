//! Geometry of the Poincaré ball with curvature fixed at 1.
//!
//! Points live strictly inside the unit ball. Anything constructed at or
//! beyond `1 - BALL_EPS` is pulled back radially to exactly that norm, which
//! keeps distances and Busemann values finite for near-boundary embeddings.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Result};

/// Radial clamp applied to every [`PoincarePoint`].
pub const BALL_EPS: f64 = 1e-7;

const ORIGIN_TOL: f64 = 1e-9;
const ANGLE_TOL: f64 = 1e-6;

/// A point of the open unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincarePoint {
    coords: Vec<f64>,
}

impl PoincarePoint {
    /// Builds a point, rescaling it onto the sphere of radius `1 - BALL_EPS`
    /// if it lies on or outside it.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::new_reporting(coords).map(|(p, _)| p)
    }

    /// Like [`PoincarePoint::new`], also reporting whether the clamp fired on
    /// a point that was materially outside the admissible radius.
    pub fn new_reporting(mut coords: Vec<f64>) -> Result<(Self, bool)> {
        if coords.is_empty() {
            return Err(invalid("point has no coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point has non-finite coordinates"));
        }
        let norm = norm(&coords);
        let max = 1.0 - BALL_EPS;
        let mut clamped = false;
        if norm > max {
            // only report points that were not already sitting on the clamp radius
            clamped = norm - max > 1e-12;
            let scale = max / norm;
            coords.iter_mut().for_each(|c| *c *= scale);
            // land on or just inside the radius so a second clamp is a no-op
            while self::norm(&coords) > max {
                coords.iter_mut().for_each(|c| *c *= 1.0 - f64::EPSILON);
            }
        }
        Ok((Self { coords }, clamped))
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.coords, &self.coords)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// A point on the boundary sphere, i.e. a direction in hyperbolic space.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealPoint {
    direction: Vec<f64>,
}

impl IdealPoint {
    /// Normalizes `direction` onto the unit sphere.
    pub fn new(mut direction: Vec<f64>) -> Result<Self> {
        if direction.iter().any(|c| !c.is_finite()) {
            return Err(invalid("ideal point has non-finite coordinates"));
        }
        let n = norm(&direction);
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("ideal point direction has zero length"));
        }
        direction.iter_mut().for_each(|c| *c /= n);
        Ok(Self { direction })
    }

    /// The signed coordinate axis `±e_axis`.
    pub fn axis(dim: usize, axis: usize, positive: bool) -> Self {
        let mut direction = vec![0.0; dim];
        direction[axis] = if positive { 1.0 } else { -1.0 };
        Self { direction }
    }

    /// Uniform sample on the unit sphere.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(p) = Self::new(v) {
                return p;
            }
        }
    }

    /// Uniform sample on the unit sphere of the coordinate subspace `axes`.
    pub fn random_in_subspace<R: Rng + ?Sized>(dim: usize, axes: &[usize], rng: &mut R) -> Self {
        loop {
            let mut v = vec![0.0; dim];
            for &a in axes {
                v[a] = rng.sample(StandardNormal);
            }
            if let Ok(p) = Self::new(v) {
                return p;
            }
        }
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }
}

/// A point of the Klein model.
#[derive(Debug, Clone, PartialEq)]
pub struct KleinPoint {
    coords: Vec<f64>,
}

impl KleinPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("klein point has non-finite coordinates"));
        }
        if norm(&coords) >= 1.0 {
            return Err(invalid("klein point must lie strictly inside the unit ball"));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Lorentz factor `1 / sqrt(1 - |x|^2)`.
    pub fn lorentz_factor(&self) -> f64 {
        1.0 / (1.0 - dot(&self.coords, &self.coords)).sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Geodesic distance in the Poincaré ball.
pub fn poincare_distance(a: &PoincarePoint, b: &PoincarePoint) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let diff = dist_sq(&a.coords, &b.coords);
    if diff == 0.0 {
        return Ok(0.0);
    }
    let arg = 1.0 + 2.0 * diff / ((1.0 - a.norm_sq()) * (1.0 - b.norm_sq()));
    Ok(arg.acosh())
}

/// Distance from the origin, `2 artanh |x|`.
pub fn distance_from_origin(x: &PoincarePoint) -> f64 {
    2.0 * x.norm().atanh()
}

/// Busemann function `log(|w - x|^2 / (1 - |x|^2))`.
pub fn busemann(w: &IdealPoint, x: &PoincarePoint) -> Result<f64> {
    check_dim(w.dim(), x.dim())?;
    Ok(busemann_raw(w.direction(), x.coords(), x.norm_sq()))
}

/// Negated Busemann function, `log((1 - |x|^2) / |w - x|^2)`.
pub fn busemann_inv(w: &IdealPoint, x: &PoincarePoint) -> Result<f64> {
    busemann(w, x).map(|v| -v)
}

#[inline]
pub(crate) fn busemann_raw(w: &[f64], x: &[f64], x_norm_sq: f64) -> f64 {
    (dist_sq(w, x) / (1.0 - x_norm_sq)).ln()
}

pub fn poincare_to_klein(x: &PoincarePoint) -> KleinPoint {
    let scale = 2.0 / (1.0 + x.norm_sq());
    KleinPoint {
        coords: x.coords.iter().map(|c| c * scale).collect(),
    }
}

pub fn klein_to_poincare(x: &KleinPoint) -> PoincarePoint {
    let n2 = dot(&x.coords, &x.coords);
    let scale = 1.0 / (1.0 + (1.0 - n2).max(0.0).sqrt());
    let coords: Vec<f64> = x.coords.iter().map(|c| c * scale).collect();
    // the map is a contraction; the constructor only guards the clamp radius
    PoincarePoint::new(coords).expect("klein image is finite")
}

/// Einstein midpoint of the points selected by `member_mask`.
///
/// Averages in Klein coordinates with Lorentz-factor weights and maps the
/// result back to the Poincaré ball. Both sums run over members only.
pub fn einstein_midpoint(points: &[PoincarePoint], member_mask: &[bool]) -> Result<PoincarePoint> {
    if points.len() != member_mask.len() {
        return Err(invalid("points and member mask differ in length"));
    }
    let members = points
        .iter()
        .zip(member_mask)
        .filter_map(|(p, &m)| m.then_some(p));
    let acc = KleinAccumulator::from_points(members)?;
    acc.mean()
        .ok_or_else(|| invalid("einstein midpoint of an empty member set"))
}

/// Running Lorentz-weighted Klein sum.
#[derive(Debug, Clone, PartialEq)]
struct KleinAccumulator {
    weighted_sum: Vec<f64>,
    weight: f64,
}

impl KleinAccumulator {
    fn empty(dim: usize) -> Self {
        Self {
            weighted_sum: vec![0.0; dim],
            weight: 0.0,
        }
    }

    fn from_points<'a>(points: impl IntoIterator<Item = &'a PoincarePoint>) -> Result<Self> {
        let mut acc: Option<Self> = None;
        for p in points {
            let acc = acc.get_or_insert_with(|| Self::empty(p.dim()));
            check_dim(acc.weighted_sum.len(), p.dim())?;
            acc.push(p);
        }
        acc.ok_or_else(|| invalid("einstein midpoint of an empty member set"))
    }

    fn push(&mut self, p: &PoincarePoint) {
        let k = poincare_to_klein(p);
        let gamma = k.lorentz_factor();
        for (s, c) in self.weighted_sum.iter_mut().zip(k.coords()) {
            *s += gamma * c;
        }
        self.weight += gamma;
    }

    fn mean(&self) -> Option<PoincarePoint> {
        if !(self.weight > 0.0) {
            return None;
        }
        let coords = self.weighted_sum.iter().map(|s| s / self.weight).collect();
        Some(klein_to_poincare(&KleinPoint { coords }))
    }
}

/// Einstein-midpoint summary of a class, mergeable without revisiting the
/// members.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMean {
    pub class_id: usize,
    pub mean: PoincarePoint,
    /// Sum of the members' Lorentz factors.
    pub weight_sum: f64,
    klein_sum: Vec<f64>,
}

impl ClassMean {
    pub fn from_members<'a>(
        class_id: usize,
        members: impl IntoIterator<Item = &'a PoincarePoint>,
    ) -> Result<Self> {
        let acc = KleinAccumulator::from_points(members)?;
        let mean = acc.mean().expect("non-empty accumulator has a mean");
        Ok(Self {
            class_id,
            mean,
            weight_sum: acc.weight,
            klein_sum: acc.weighted_sum,
        })
    }

    /// A class with no members; the neutral element of [`merge_class_means`].
    pub fn empty(class_id: usize, dim: usize) -> Self {
        Self {
            class_id,
            mean: PoincarePoint::origin(dim),
            weight_sum: 0.0,
            klein_sum: vec![0.0; dim],
        }
    }
}

/// Merges two class summaries; the result keeps the first class id.
pub fn merge_class_means(m1: &ClassMean, m2: &ClassMean) -> Result<ClassMean> {
    check_dim(m1.klein_sum.len(), m2.klein_sum.len())?;
    let acc = KleinAccumulator {
        weighted_sum: m1
            .klein_sum
            .iter()
            .zip(&m2.klein_sum)
            .map(|(a, b)| a + b)
            .collect(),
        weight: m1.weight_sum + m2.weight_sum,
    };
    let mean = acc
        .mean()
        .unwrap_or_else(|| PoincarePoint::origin(acc.weighted_sum.len()));
    Ok(ClassMean {
        class_id: m1.class_id,
        mean,
        weight_sum: acc.weight,
        klein_sum: acc.weighted_sum,
    })
}

/// Depth of the lowest common ancestor of `p` and `q`: the hyperbolic
/// distance from the origin to the closest point of the geodesic segment
/// between them. Larger values mean more similar points.
///
/// The closest point of the full geodesic is found from the circle
/// orthogonal to the boundary through `p` and `q`. When that point falls
/// outside the segment the nearer endpoint is returned instead.
pub fn lca_similarity(p: &PoincarePoint, q: &PoincarePoint) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    let np = p.norm();
    let nq = q.norm();
    if np < ORIGIN_TOL || nq < ORIGIN_TOL {
        return Ok(0.0);
    }
    let endpoint_min = distance_from_origin(p).min(distance_from_origin(q));
    let cos_theta = (dot(p.coords(), q.coords()) / (np * nq)).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < ANGLE_TOL {
        return Ok(endpoint_min);
    }
    if theta > PI - ANGLE_TOL {
        return Ok(0.0);
    }

    // angle between p and the centre of the geodesic circle, towards q
    let ratio = np * (nq * nq + 1.0) / (nq * (np * np + 1.0));
    let alpha = ((ratio - cos_theta) / theta.sin()).atan();
    if alpha <= 0.0 || alpha >= theta {
        return Ok(endpoint_min);
    }
    let centre = (np * np + 1.0) / (2.0 * np * alpha.cos());
    let radius = (centre * centre - 1.0).max(0.0).sqrt();
    // sqrt(R^2 + 1) - R, written without the cancellation
    let foot = 1.0 / ((radius * radius + 1.0).sqrt() + radius);
    Ok((2.0 * foot.atanh()).min(endpoint_min))
}

/// Möbius addition `x ⊕ y`.
pub(crate) fn mobius_add(x: &[f64], y: &[f64]) -> Vec<f64> {
    let xy = dot(x, y);
    let x2 = dot(x, x);
    let y2 = dot(y, y);
    let a = 1.0 + 2.0 * xy + y2;
    let b = 1.0 - x2;
    let denom = 1.0 + 2.0 * xy + x2 * y2;
    x.iter()
        .zip(y)
        .map(|(xi, yi)| (a * xi + b * yi) / denom)
        .collect()
}
