//! Points of R^d, closed convex sets and their metric projections.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance below which a point counts as a member of a set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Arithmetic slack for projection identities.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Fixed-point stop for cyclic projections onto intersections.
pub const INTERSECTION_TOL: f64 = 1e-10;

const INTERSECTION_MAX_CYCLES: usize = 100_000;

/// A finite vector of R^d.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::input("a point needs at least one coordinate"));
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Point(vec![0.0; dim])
    }

    /// The `index`-th standard basis vector.
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut p = Point::zeros(dim);
        p.0[index] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::Dimension {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }

    /// Unchecked dot product; callers guarantee equal dimensions.
    pub(crate) fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `a * self + b * other`, evaluated coordinate by coordinate.
    pub fn lincomb(&self, a: f64, other: &Point, b: f64) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(x, y)| a * x + b * y).collect())
    }

    /// `self + s * dir`.
    pub fn axpy(&self, s: f64, dir: &Point) -> Point {
        debug_assert_eq!(self.dim(), dir.dim());
        Point(self.0.iter().zip(&dir.0).map(|(x, d)| x + s * d).collect())
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point(self.0.iter().map(|x| s * x).collect())
    }

    /// Copy resized to `dim`: truncated, or padded with `fill`.
    pub fn resized(&self, dim: usize, fill: f64) -> Point {
        let mut c = self.0.clone();
        c.resize(dim, fill);
        Point(c)
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<&Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: &Point) -> Point {
        rhs.scaled(self)
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(self.0.iter().map(|x| -x).collect())
    }
}

/// Euclidean inner product.
pub fn inner(x: &Point, y: &Point) -> Result<f64> {
    y.check_dim(x.dim())?;
    Ok(x.dot(y))
}

pub fn norm(x: &Point) -> f64 {
    x.norm()
}

/// A nonempty closed convex subset of R^d with an exact (or, for
/// intersections, iterative) projection rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    Ball {
        center: Point,
        radius: f64,
    },
    /// `{x : <normal, x> <= offset}`
    Halfspace {
        normal: Point,
        offset: f64,
    },
    /// `anchor + span(basis)`; an empty basis is the singleton `{anchor}`.
    AffineSubspace {
        anchor: Point,
        #[serde(default)]
        basis: Vec<Point>,
    },
    Box {
        lo: Point,
        hi: Point,
    },
    WholeSpace {
        dim: usize,
    },
    /// Projected with Dykstra's cyclic projections; approximate to
    /// [`INTERSECTION_TOL`].
    Intersection {
        sets: Vec<ConvexSet>,
    },
}

impl ConvexSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        let s = ConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn unit_ball(dim: usize) -> Self {
        ConvexSet::Ball {
            center: Point::zeros(dim),
            radius: 1.0,
        }
    }

    pub fn halfspace(normal: Point, offset: f64) -> Result<Self> {
        let s = ConvexSet::Halfspace { normal, offset };
        s.validate()?;
        Ok(s)
    }

    pub fn affine(anchor: Point, basis: Vec<Point>) -> Result<Self> {
        let s = ConvexSet::AffineSubspace { anchor, basis };
        s.validate()?;
        Ok(s)
    }

    pub fn singleton(p: Point) -> Self {
        ConvexSet::AffineSubspace {
            anchor: p,
            basis: Vec::new(),
        }
    }

    pub fn boxed(lo: Point, hi: Point) -> Result<Self> {
        let s = ConvexSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn whole(dim: usize) -> Self {
        ConvexSet::WholeSpace { dim }
    }

    pub fn intersection(sets: Vec<ConvexSet>) -> Result<Self> {
        let s = ConvexSet::Intersection { sets };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Halfspace { normal, .. } => normal.dim(),
            ConvexSet::AffineSubspace { anchor, .. } => anchor.dim(),
            ConvexSet::Box { lo, .. } => lo.dim(),
            ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Intersection { sets } => sets.first().map_or(0, ConvexSet::dim),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Halfspace { .. } => "halfspace",
            ConvexSet::AffineSubspace { .. } => "affine_subspace",
            ConvexSet::Box { .. } => "box",
            ConvexSet::WholeSpace { .. } => "whole_space",
            ConvexSet::Intersection { .. } => "intersection",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Ball { center, radius } => {
                check_finite_point(center)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::input(format!("ball radius must be > 0, got {radius}")));
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                check_finite_point(normal)?;
                if normal.norm() == 0.0 {
                    return Err(Error::input("halfspace normal must be nonzero"));
                }
                if !offset.is_finite() {
                    return Err(Error::input("halfspace offset must be finite"));
                }
            }
            ConvexSet::AffineSubspace { anchor, basis } => {
                check_finite_point(anchor)?;
                for b in basis {
                    b.check_dim(anchor.dim())?;
                    check_finite_point(b)?;
                }
                orthonormalize(basis)?;
            }
            ConvexSet::Box { lo, hi } => {
                check_finite_point(lo)?;
                check_finite_point(hi)?;
                hi.check_dim(lo.dim())?;
                if lo.coords().iter().zip(hi.coords()).any(|(l, h)| l > h) {
                    return Err(Error::input("box requires lo <= hi componentwise"));
                }
            }
            ConvexSet::WholeSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::input("whole space needs a positive dimension"));
                }
            }
            ConvexSet::Intersection { sets } => {
                let first = sets.first().ok_or_else(|| Error::input("intersection of zero sets"))?;
                for s in sets {
                    s.validate()?;
                    if s.dim() != first.dim() {
                        return Err(Error::Dimension {
                            expected: first.dim(),
                            found: s.dim(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Metric projection `P_K(x)`.
    pub fn project(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim())?;
        match self {
            ConvexSet::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center.axpy(radius / r, &d))
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    Ok(x.clone())
                } else {
                    Ok(x.axpy(-excess / normal.dot(normal), normal))
                }
            }
            ConvexSet::AffineSubspace { anchor, basis } => {
                let q = orthonormalize(basis)?;
                let d = x - anchor;
                let mut p = anchor.clone();
                for e in &q {
                    p = p.axpy(e.dot(&d), e);
                }
                Ok(p)
            }
            ConvexSet::Box { lo, hi } => Ok(Point(
                x.coords()
                    .iter()
                    .zip(lo.coords().iter().zip(hi.coords()))
                    .map(|(v, (l, h))| v.clamp(*l, *h))
                    .collect(),
            )),
            ConvexSet::WholeSpace { .. } => Ok(x.clone()),
            ConvexSet::Intersection { sets } => dykstra(sets, x),
        }
    }

    /// Distance to the set; for intersections the largest distance to a
    /// component, which is zero exactly on the intersection.
    pub fn distance(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dim())?;
        match self {
            ConvexSet::Intersection { sets } => sets
                .iter()
                .map(|s| s.distance(x))
                .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d))),
            _ => Ok(x.distance(&self.project(x)?)),
        }
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        Ok(self.distance(x)? <= MEMBERSHIP_TOL)
    }

    /// Errors with [`Error::NotMember`] naming `what` when `x` is not in the set.
    pub fn require_member(&self, x: &Point, what: &str) -> Result<()> {
        let distance = self.distance(x)?;
        if distance > MEMBERSHIP_TOL {
            return Err(Error::NotMember {
                what: what.to_string(),
                set: self.kind_name().to_string(),
                distance,
            });
        }
        Ok(())
    }

    /// The same set lifted or cut to dimension `dim` (sweeps over `dim`).
    pub fn resized(&self, dim: usize) -> Result<ConvexSet> {
        let s = match self {
            ConvexSet::Ball { center, radius } => ConvexSet::Ball {
                center: center.resized(dim, 0.0),
                radius: *radius,
            },
            ConvexSet::Halfspace { normal, offset } => ConvexSet::Halfspace {
                normal: normal.resized(dim, 0.0),
                offset: *offset,
            },
            ConvexSet::AffineSubspace { anchor, basis } => ConvexSet::AffineSubspace {
                anchor: anchor.resized(dim, 0.0),
                basis: basis.iter().map(|b| b.resized(dim, 0.0)).collect(),
            },
            ConvexSet::Box { lo, hi } => {
                let last_lo = *lo.coords().last().unwrap_or(&0.0);
                let last_hi = *hi.coords().last().unwrap_or(&0.0);
                ConvexSet::Box {
                    lo: lo.resized(dim, last_lo),
                    hi: hi.resized(dim, last_hi),
                }
            }
            ConvexSet::WholeSpace { .. } => ConvexSet::WholeSpace { dim },
            ConvexSet::Intersection { sets } => ConvexSet::Intersection {
                sets: sets.iter().map(|s| s.resized(dim)).collect::<Result<_>>()?,
            },
        };
        s.validate()?;
        Ok(s)
    }
}

fn check_finite_point(p: &Point) -> Result<()> {
    match p.coords().iter().position(|c| !c.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Modified Gram-Schmidt; fails on (numerically) dependent vectors.
fn orthonormalize(basis: &[Point]) -> Result<Vec<Point>> {
    let mut q: Vec<Point> = Vec::with_capacity(basis.len());
    for b in basis {
        let scale = b.norm();
        let mut v = b.clone();
        for e in &q {
            v = v.axpy(-e.dot(&v), e);
        }
        let n = v.norm();
        if scale == 0.0 || n <= 1e-10 * scale {
            return Err(Error::input("affine subspace basis is linearly dependent"));
        }
        q.push(v.scaled(1.0 / n));
    }
    Ok(q)
}

fn dykstra(sets: &[ConvexSet], x: &Point) -> Result<Point> {
    let mut current = x.clone();
    let mut corrections = vec![Point::zeros(x.dim()); sets.len()];
    let mut last_change = f64::INFINITY;
    for _ in 0..INTERSECTION_MAX_CYCLES {
        let start = current.clone();
        for (set, corr) in sets.iter().zip(corrections.iter_mut()) {
            let shifted = &current + corr;
            let projected = set.project(&shifted)?;
            *corr = &shifted - &projected;
            current = projected;
        }
        last_change = current.distance(&start);
        if last_change <= INTERSECTION_TOL {
            return Ok(current);
        }
    }
    Err(Error::NotConverged {
        iterations: INTERSECTION_MAX_CYCLES,
        last_gap: last_change,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub max_violation: f64,
    pub pass: bool,
}

/// Largest value of `<P_K(x) - x, P_K(x) - y>` over the probes `y`; the
/// projection is correct iff this is `<= 0`.
pub fn check_projection_characterization(
    set: &ConvexSet,
    x: &Point,
    probes: &[Point],
    tol: f64,
) -> Result<CharacterizationReport> {
    let p = set.project(x)?;
    let px = &p - x;
    let mut max_violation = 0.0_f64;
    for (i, y) in probes.iter().enumerate() {
        set.require_member(y, &format!("probe {i}"))?;
        max_violation = max_violation.max(px.dot(&(&p - y)));
    }
    Ok(CharacterizationReport {
        max_violation,
        pass: max_violation <= tol,
    })
}

/// Seeded sampler for points near the origin and inside convex sets.
#[derive(Clone, Debug)]
pub struct DomainSampler {
    rng: ChaCha8Rng,
    radius: f64,
}

impl DomainSampler {
    pub const DEFAULT_RADIUS: f64 = 10.0;

    pub fn new(seed: u64) -> Self {
        Self::with_radius(seed, Self::DEFAULT_RADIUS)
    }

    pub fn with_radius(seed: u64, radius: f64) -> Self {
        DomainSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            radius,
        }
    }

    /// Independent stream `stream` of the generator seeded by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut s = Self::new(seed);
        s.rng.set_stream(stream);
        s
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return lo;
        }
        self.rng.random_range(lo..hi)
    }

    /// Uniform sample from the ball `B(center, r)`.
    pub fn in_ball(&mut self, center: &Point, r: f64) -> Point {
        let d = center.dim();
        let dir: Vec<f64> = (0..d).map(|_| self.rng.sample(StandardNormal)).collect();
        let dir = Point(dir);
        let n = dir.norm().max(f64::MIN_POSITIVE);
        let u: f64 = self.rng.random();
        let scale = r * u.powf(1.0 / d as f64) / n;
        center.axpy(scale, &dir)
    }

    /// Uniform sample from the sampling ball of radius `self.radius` at the origin.
    pub fn point(&mut self, dim: usize) -> Point {
        let r = self.radius;
        self.in_ball(&Point::zeros(dim), r)
    }

    /// A point of `set`, drawn from the part of the set within the sampling
    /// radius of its point nearest the origin.
    pub fn sample_in(&mut self, set: &ConvexSet) -> Result<Point> {
        let r = self.radius;
        let dim = set.dim();
        match set {
            ConvexSet::Ball { center, radius } => Ok(self.in_ball(center, radius.min(r))),
            ConvexSet::Box { lo, hi } => {
                let c = set.project(&Point::zeros(dim))?;
                let coords = (0..dim)
                    .map(|i| {
                        let l = lo.coords()[i].max(c.coords()[i] - r);
                        let h = hi.coords()[i].min(c.coords()[i] + r);
                        self.uniform(l, h)
                    })
                    .collect();
                Ok(Point(coords))
            }
            ConvexSet::WholeSpace { .. } => Ok(self.point(dim)),
            ConvexSet::AffineSubspace { basis, .. } => {
                let base = set.project(&Point::zeros(dim))?;
                if basis.is_empty() {
                    return Ok(base);
                }
                let q = orthonormalize(basis)?;
                let c = self.in_ball(&Point::zeros(q.len()), r);
                let mut p = base;
                for (e, s) in q.iter().zip(c.coords()) {
                    p = p.axpy(*s, e);
                }
                Ok(p)
            }
            ConvexSet::Halfspace { .. } => {
                let c = set.project(&Point::zeros(dim))?;
                loop {
                    let y = self.in_ball(&c, r);
                    if set.contains(&y)? {
                        return Ok(y);
                    }
                }
            }
            ConvexSet::Intersection { sets } => {
                let mut candidate = self.sample_in(&sets[0])?;
                for _ in 0..1000 {
                    if set.contains(&candidate)? {
                        return Ok(candidate);
                    }
                    candidate = self.sample_in(&sets[0])?;
                }
                set.project(&candidate)
            }
        }
    }

    pub fn samples_in(&mut self, set: &ConvexSet, count: usize) -> Result<Vec<Point>> {
        (0..count).map(|_| self.sample_in(set)).collect()
    }
}
