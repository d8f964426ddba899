//! Nonexpansive maps with known fixed-point sets, strict contractions, and
//! the problem triple `(C, T, f)` the flows run on.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ConvexSet, DomainSampler, Point};

/// Singular values below this are treated as zero when extracting the
/// fixed-point subspace of a linear map.
const NULLSPACE_TOL: f64 = 1e-10;

/// A nonexpansive map `T`. Compositions apply their members first to last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    Identity {
        dim: usize,
    },
    /// Rotation by `angle` radians in the coordinate plane `plane`.
    Rotation {
        dim: usize,
        angle: f64,
        plane: [usize; 2],
    },
    Negation {
        dim: usize,
    },
    Projection {
        set: ConvexSet,
    },
    /// `2 P_K - I`
    Reflection {
        set: ConvexSet,
    },
    /// `(1 - lambda) I + lambda T`
    Averaged {
        lambda: f64,
        inner: Box<Operator>,
    },
    Composition {
        ops: Vec<Operator>,
    },
}

impl Operator {
    pub fn rotation(dim: usize, angle: f64, plane: [usize; 2]) -> Result<Self> {
        let op = Operator::Rotation { dim, angle, plane };
        op.validate()?;
        Ok(op)
    }

    pub fn averaged(lambda: f64, inner: Operator) -> Result<Self> {
        let op = Operator::Averaged {
            lambda,
            inner: Box::new(inner),
        };
        op.validate()?;
        Ok(op)
    }

    pub fn composition(ops: Vec<Operator>) -> Result<Self> {
        let op = Operator::Composition { ops };
        op.validate()?;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Identity { dim } | Operator::Rotation { dim, .. } | Operator::Negation { dim } => *dim,
            Operator::Projection { set } | Operator::Reflection { set } => set.dim(),
            Operator::Averaged { inner, .. } => inner.dim(),
            Operator::Composition { ops } => ops.first().map_or(0, Operator::dim),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Operator::Identity { .. } => "identity",
            Operator::Rotation { .. } => "rotation",
            Operator::Negation { .. } => "negation",
            Operator::Projection { .. } => "projection",
            Operator::Reflection { .. } => "reflection",
            Operator::Averaged { .. } => "averaged",
            Operator::Composition { .. } => "composition",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Operator::Identity { dim } | Operator::Negation { dim } => positive_dim(*dim),
            Operator::Rotation { dim, angle, plane } => {
                positive_dim(*dim)?;
                if !angle.is_finite() {
                    return Err(Error::input("rotation angle must be finite"));
                }
                if plane[0] == plane[1] || plane[0] >= *dim || plane[1] >= *dim {
                    return Err(Error::input(format!(
                        "rotation plane {plane:?} invalid in dimension {dim}"
                    )));
                }
                Ok(())
            }
            Operator::Projection { set } | Operator::Reflection { set } => set.validate(),
            Operator::Averaged { lambda, inner } => {
                if !(*lambda > 0.0 && *lambda <= 1.0) {
                    return Err(Error::input(format!(
                        "averaging weight must lie in (0, 1], got {lambda}"
                    )));
                }
                inner.validate()
            }
            Operator::Composition { ops } => {
                let first = ops.first().ok_or_else(|| Error::input("empty composition"))?;
                for op in ops {
                    op.validate()?;
                    if op.dim() != first.dim() {
                        return Err(Error::Dimension {
                            expected: first.dim(),
                            found: op.dim(),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim())?;
        self.eval(x)
    }

    fn eval(&self, x: &Point) -> Result<Point> {
        Ok(match self {
            Operator::Identity { .. } => x.clone(),
            Operator::Rotation { angle, plane, .. } => rotate(x, *angle, *plane),
            Operator::Negation { .. } => -x,
            Operator::Projection { set } => set.project(x)?,
            Operator::Reflection { set } => set.project(x)?.lincomb(2.0, x, -1.0),
            Operator::Averaged { lambda, inner } => x.lincomb(1.0 - lambda, &inner.eval(x)?, *lambda),
            Operator::Composition { ops } => {
                let mut y = x.clone();
                for op in ops {
                    y = op.eval(&y)?;
                }
                y
            }
        })
    }

    /// `Fix(T)` when it is known exactly; `None` otherwise.
    pub fn fix_set(&self) -> Option<ConvexSet> {
        match self {
            Operator::Identity { dim } => Some(ConvexSet::whole(*dim)),
            Operator::Negation { dim } => Some(ConvexSet::singleton(Point::zeros(*dim))),
            Operator::Rotation { dim, angle, plane } => {
                if (1.0 - angle.cos()).abs() < 1e-15 {
                    return Some(ConvexSet::whole(*dim));
                }
                let basis = (0..*dim)
                    .filter(|i| !plane.contains(i))
                    .map(|i| Point::unit(*dim, i))
                    .collect();
                Some(ConvexSet::AffineSubspace {
                    anchor: Point::zeros(*dim),
                    basis,
                })
            }
            Operator::Projection { set } | Operator::Reflection { set } => Some(set.clone()),
            Operator::Averaged { inner, .. } => inner.fix_set(),
            Operator::Composition { ops } => {
                if ops.len() == 1 {
                    return ops[0].fix_set();
                }
                if let Some(m) = self.linear_matrix() {
                    return Some(linear_fix_set(&m));
                }
                // Fix of a composition of averaged maps is the intersection of
                // the fixed sets, provided that intersection is nonempty.
                if !ops.iter().all(Operator::is_averaged) {
                    return None;
                }
                let sets = ops.iter().map(Operator::fix_set).collect::<Option<Vec<_>>>()?;
                let inter = ConvexSet::Intersection { sets };
                let p = inter.project(&Point::zeros(self.dim())).ok()?;
                inter.contains(&p).ok()?.then_some(inter)
            }
        }
    }

    fn is_averaged(&self) -> bool {
        match self {
            Operator::Identity { .. } | Operator::Projection { .. } => true,
            Operator::Averaged { lambda, .. } => *lambda < 1.0,
            _ => false,
        }
    }

    /// Matrix of the map when it is linear.
    pub fn linear_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            Operator::Identity { dim } => Some(DMatrix::identity(*dim, *dim)),
            Operator::Negation { dim } => Some(-DMatrix::<f64>::identity(*dim, *dim)),
            Operator::Rotation { dim, angle, plane } => Some(rotation_matrix(*dim, *angle, *plane)),
            Operator::Averaged { lambda, inner } => {
                let m = inner.linear_matrix()?;
                let d = m.nrows();
                Some(DMatrix::identity(d, d) * (1.0 - lambda) + m * *lambda)
            }
            Operator::Composition { ops } => {
                let d = self.dim();
                ops.iter()
                    .try_fold(DMatrix::identity(d, d), |acc, op| Some(op.linear_matrix()? * acc))
            }
            Operator::Projection { .. } | Operator::Reflection { .. } => None,
        }
    }

    /// The same operator in dimension `dim` (sweeps over `dim`).
    pub fn resized(&self, dim: usize) -> Result<Operator> {
        let op = match self {
            Operator::Identity { .. } => Operator::Identity { dim },
            Operator::Negation { .. } => Operator::Negation { dim },
            Operator::Rotation { angle, plane, .. } => Operator::Rotation {
                dim,
                angle: *angle,
                plane: *plane,
            },
            Operator::Projection { set } => Operator::Projection { set: set.resized(dim)? },
            Operator::Reflection { set } => Operator::Reflection { set: set.resized(dim)? },
            Operator::Averaged { lambda, inner } => Operator::Averaged {
                lambda: *lambda,
                inner: Box::new(inner.resized(dim)?),
            },
            Operator::Composition { ops } => Operator::Composition {
                ops: ops.iter().map(|o| o.resized(dim)).collect::<Result<_>>()?,
            },
        };
        op.validate()?;
        Ok(op)
    }
}

fn positive_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::input("dimension must be positive"));
    }
    Ok(())
}

fn rotate(x: &Point, angle: f64, [i, j]: [usize; 2]) -> Point {
    let (s, c) = angle.sin_cos();
    let mut v = x.clone().into_coords();
    let (xi, xj) = (v[i], v[j]);
    v[i] = c * xi - s * xj;
    v[j] = s * xi + c * xj;
    Point::new(v).expect("rotation of a finite point is finite")
}

fn rotation_matrix(dim: usize, angle: f64, [i, j]: [usize; 2]) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    let mut m = DMatrix::identity(dim, dim);
    m[(i, i)] = c;
    m[(i, j)] = -s;
    m[(j, i)] = s;
    m[(j, j)] = c;
    m
}

/// `{x : M x = x}` as an affine subspace through the origin.
fn linear_fix_set(m: &DMatrix<f64>) -> ConvexSet {
    let d = m.nrows();
    let shifted = m - DMatrix::<f64>::identity(d, d);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let basis: Vec<Point> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= NULLSPACE_TOL)
        .map(|(k, _)| Point::new(v_t.row(k).iter().copied().collect()).expect("finite"))
        .collect();
    if basis.len() == d {
        ConvexSet::whole(d)
    } else {
        ConvexSet::AffineSubspace {
            anchor: Point::zeros(d),
            basis,
        }
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, s| a.max(*s))
}

/// Linear part `L` of an affine contraction; operator norm at most one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearMap {
    Identity,
    Negation,
    Rotation {
        angle: f64,
        plane: [usize; 2],
    },
    /// Row-major square matrix.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

impl LinearMap {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            LinearMap::Identity | LinearMap::Negation => Ok(()),
            LinearMap::Rotation { angle, plane } => Operator::Rotation {
                dim,
                angle: *angle,
                plane: *plane,
            }
            .validate(),
            LinearMap::Matrix { rows } => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::input(format!("linear map must be {dim}x{dim}")));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::input("linear map entries must be finite"));
                }
                let n = spectral_norm(&self.matrix(dim));
                if n > 1.0 + 1e-12 {
                    return Err(Error::input(format!("linear map has operator norm {n} > 1")));
                }
                Ok(())
            }
        }
    }

    fn matrix(&self, dim: usize) -> DMatrix<f64> {
        match self {
            LinearMap::Identity => DMatrix::identity(dim, dim),
            LinearMap::Negation => -DMatrix::<f64>::identity(dim, dim),
            LinearMap::Rotation { angle, plane } => rotation_matrix(dim, *angle, *plane),
            LinearMap::Matrix { rows } => DMatrix::from_fn(dim, dim, |i, j| rows[i][j]),
        }
    }

    fn eval(&self, x: &Point) -> Point {
        match self {
            LinearMap::Identity => x.clone(),
            LinearMap::Negation => -x,
            LinearMap::Rotation { angle, plane } => rotate(x, *angle, *plane),
            LinearMap::Matrix { rows } => Point::new(
                rows.iter()
                    .map(|r| r.iter().zip(x.coords()).map(|(a, b)| a * b).sum())
                    .collect(),
            )
            .expect("finite"),
        }
    }
}

/// A strict contraction `f` with coefficient `alpha < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contraction {
    Constant {
        value: Point,
    },
    /// `x -> alpha * L(x) + offset`
    Affine {
        alpha: f64,
        linear: LinearMap,
        offset: Point,
    },
}

impl Contraction {
    pub fn constant(value: Point) -> Self {
        Contraction::Constant { value }
    }

    pub fn zero(dim: usize) -> Self {
        Contraction::Constant {
            value: Point::zeros(dim),
        }
    }

    pub fn affine(alpha: f64, linear: LinearMap, offset: Point) -> Result<Self> {
        let f = Contraction::Affine { alpha, linear, offset };
        f.validate()?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        match self {
            Contraction::Constant { value } => value.dim(),
            Contraction::Affine { offset, .. } => offset.dim(),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Contraction::Constant { .. } => 0.0,
            Contraction::Affine { alpha, .. } => *alpha,
        }
    }

    /// `1 - alpha`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Contraction::Constant { .. } => Ok(()),
            Contraction::Affine { alpha, linear, offset } => {
                if !(*alpha >= 0.0 && *alpha < 1.0) {
                    return Err(Error::input(format!(
                        "contraction coefficient must lie in [0, 1), got {alpha}"
                    )));
                }
                linear.validate(offset.dim())
            }
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim())?;
        Ok(self.eval(x))
    }

    pub(crate) fn eval(&self, x: &Point) -> Point {
        match self {
            Contraction::Constant { value } => value.clone(),
            Contraction::Affine { alpha, linear, offset } => linear.eval(x).lincomb(*alpha, offset, 1.0),
        }
    }

    /// Same map with a different coefficient (affine maps only).
    pub fn with_alpha(&self, alpha: f64) -> Result<Contraction> {
        match self {
            Contraction::Constant { .. } => Err(Error::input("cannot change alpha of a constant contraction")),
            Contraction::Affine { linear, offset, .. } => Contraction::affine(alpha, linear.clone(), offset.clone()),
        }
    }

    pub fn resized(&self, dim: usize) -> Result<Contraction> {
        let f = match self {
            Contraction::Constant { value } => Contraction::Constant {
                value: value.resized(dim, 0.0),
            },
            Contraction::Affine { alpha, linear, offset } => Contraction::Affine {
                alpha: *alpha,
                linear: match linear {
                    LinearMap::Matrix { .. } => return Err(Error::input("matrix linear maps cannot be resized")),
                    l => l.clone(),
                },
                offset: offset.resized(dim, 0.0),
            },
        };
        f.validate()?;
        Ok(f)
    }
}

/// The standing data `(C, T, f)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub domain: ConvexSet,
    pub operator: Operator,
    pub contraction: Contraction,
}

impl Problem {
    pub fn new(domain: ConvexSet, operator: Operator, contraction: Contraction) -> Result<Self> {
        let p = Problem {
            domain,
            operator,
            contraction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.contraction.alpha()
    }

    pub fn gamma(&self) -> f64 {
        self.contraction.gamma()
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.operator.validate()?;
        self.contraction.validate()?;
        let d = self.dim();
        for found in [self.operator.dim(), self.contraction.dim()] {
            if found != d {
                return Err(Error::Dimension { expected: d, found });
            }
        }
        Ok(())
    }

    pub fn t(&self, x: &Point) -> Result<Point> {
        self.operator.apply(x)
    }

    pub fn f(&self, x: &Point) -> Result<Point> {
        self.contraction.apply(x)
    }

    /// `||x - T(x)||`
    pub fn residual(&self, x: &Point) -> Result<f64> {
        Ok(x.distance(&self.t(x)?))
    }

    pub fn fix_set(&self) -> Option<ConvexSet> {
        self.operator.fix_set()
    }

    /// Samples `C` and checks `T(C) ⊂ C`, `f(C) ⊂ C`, and that `Fix(T)`
    /// meets `C` when `Fix(T)` is known.
    pub fn certify(&self, sampler: &mut DomainSampler, samples: usize) -> Result<()> {
        for _ in 0..samples {
            let x = sampler.sample_in(&self.domain)?;
            self.domain.require_member(&self.t(&x)?, "T(x)")?;
            self.domain.require_member(&self.f(&x)?, "f(x)")?;
        }
        if let Some(fix) = self.fix_set() {
            let meet = ConvexSet::Intersection {
                sets: vec![fix, self.domain.clone()],
            };
            let p = meet.project(&Point::zeros(self.dim()))?;
            if !meet.contains(&p)? {
                return Err(Error::input("Fix(T) does not meet C"));
            }
        }
        Ok(())
    }
}

/// A named standard problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ZooEntry {
    pub name: &'static str,
    pub problem: Problem,
}

/// Radius of the domain ball shared by the zoo problems.
pub const ZOO_RADIUS: f64 = 10.0;

/// Standard planar problems on `C = ball(0, 10)` with the affine anchor
/// `f(x) = x / 2 + (1, 1)`. Every operator has an exactly known `Fix(T)`
/// containing the origin, so `T` and `f` map `C` into itself.
pub fn zoo() -> Vec<ZooEntry> {
    let pt = |v: &[f64]| Point::new(v.to_vec()).expect("finite literal");
    let unit = ConvexSet::unit_ball(2);
    let quarter = Operator::rotation(2, std::f64::consts::FRAC_PI_2, [0, 1]).expect("valid plane");
    let half_plane = ConvexSet::halfspace(pt(&[1.0, 1.0]), 1.0).expect("nonzero normal");
    let operators = vec![
        ("negation", Operator::Negation { dim: 2 }),
        ("rotation", quarter.clone()),
        ("ball_projection", Operator::Projection { set: unit.clone() }),
        ("ball_reflection", Operator::Reflection { set: unit.clone() }),
        (
            "averaged_rotation",
            Operator::averaged(0.5, quarter.clone()).expect("lambda in (0, 1]"),
        ),
        (
            "box_projection",
            Operator::Projection {
                set: ConvexSet::boxed(pt(&[-1.0, -0.5]), pt(&[1.0, 2.0])).expect("ordered box"),
            },
        ),
        (
            "halfspace_reflection",
            Operator::Reflection {
                set: half_plane.clone(),
            },
        ),
        (
            "projection_composition",
            Operator::composition(vec![
                Operator::Projection { set: unit },
                Operator::Projection { set: half_plane },
            ])
            .expect("matching dimensions"),
        ),
        ("identity", Operator::Identity { dim: 2 }),
    ];
    let domain = ConvexSet::ball(Point::zeros(2), ZOO_RADIUS).expect("positive radius");
    let f = Contraction::affine(0.5, LinearMap::Identity, pt(&[1.0, 1.0])).expect("alpha in [0, 1)");
    operators
        .into_iter()
        .map(|(name, op)| ZooEntry {
            name,
            problem: Problem::new(domain.clone(), op, f.clone()).expect("consistent dimensions"),
        })
        .collect()
}

/// The zoo problem called `name`.
pub fn zoo_problem(name: &str) -> Option<Problem> {
    zoo().into_iter().find(|e| e.name == name).map(|e| e.problem)
}

/// Outcome of a randomized Lipschitz certification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    pub pairs_used: usize,
    pub pass: bool,
}

fn max_ratio<F>(map: F, sampler: &mut DomainSampler, domain: &ConvexSet, pairs: usize) -> Result<(f64, usize)>
where
    F: Fn(&Point) -> Result<Point>,
{
    if pairs == 0 {
        return Err(Error::input("need at least one sample pair"));
    }
    let mut worst = 0.0_f64;
    let mut used = 0;
    for _ in 0..pairs {
        let x = sampler.sample_in(domain)?;
        let y = sampler.sample_in(domain)?;
        let d = x.distance(&y);
        if d == 0.0 {
            continue;
        }
        used += 1;
        worst = worst.max(map(&x)?.distance(&map(&y)?) / d);
    }
    Ok((worst, used))
}

/// Max of `||T x - T y|| / ||x - y||` over sampled pairs of `domain`.
pub fn verify_nonexpansive(
    op: &Operator,
    sampler: &mut DomainSampler,
    domain: &ConvexSet,
    pairs: usize,
    tol: f64,
) -> Result<LipschitzReport> {
    let (max_ratio, pairs_used) = max_ratio(|x| op.apply(x), sampler, domain, pairs)?;
    Ok(LipschitzReport {
        max_ratio,
        pairs_used,
        pass: max_ratio <= 1.0 + tol,
    })
}

pub fn verify_contraction(
    f: &Contraction,
    sampler: &mut DomainSampler,
    domain: &ConvexSet,
    pairs: usize,
    tol: f64,
) -> Result<LipschitzReport> {
    let (max_ratio, pairs_used) = max_ratio(|x| f.apply(x), sampler, domain, pairs)?;
    Ok(LipschitzReport {
        max_ratio,
        pairs_used,
        pass: max_ratio <= f.alpha() + tol,
    })
}

/// `P_Fix(T)(x)`.
pub fn project_fix(op: &Operator, x: &Point) -> Result<Point> {
    let fix = op
        .fix_set()
        .ok_or_else(|| Error::Unsupported(format!("Fix(T) is not known for this {}", op.kind_name())))?;
    fix.project(x)
}

/// Largest `||T(p) - p||` over `count` samples of `Fix(T)`.
pub fn fixed_point_defect(op: &Operator, sampler: &mut DomainSampler, count: usize) -> Result<f64> {
    let fix = op
        .fix_set()
        .ok_or_else(|| Error::Unsupported("Fix(T) unknown".into()))?;
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let p = sampler.sample_in(&fix)?;
        worst = worst.max(p.distance(&op.apply(&p)?));
    }
    Ok(worst)
}
