//! Riemannian metrics on the 2-torus and the distortion constant between two
//! of them.
//!
//! Points live in torus coordinates `[0,1)²` (any real input is reduced mod
//! 1) and tangent vectors in the standard trivialization of `T T² = T² × ℝ²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Profile, ScalarField};
use crate::search::golden_section_max;

/// Grid resolution used to check positivity when a metric is constructed.
pub const VALIDATION_GRID: usize = 128;

/// A symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Sym2 { xx: a, xy: 0.0, yy: b }
    }

    /// Builds from a full matrix, rejecting asymmetric input.
    pub fn from_rows(m: [[f64; 2]; 2]) -> Result<Self> {
        if m[0][1] != m[1][0] {
            return Err(Error::InvalidMetric(format!(
                "matrix is not symmetric: {} != {}",
                m[0][1], m[1][0]
            )));
        }
        Ok(Sym2::new(m[0][0], m[0][1], m[1][1]))
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    #[inline]
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    #[inline]
    pub fn scale(&self, c: f64) -> Sym2 {
        Sym2::new(c * self.xx, c * self.xy, c * self.yy)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0 && self.xx.is_finite() && self.det().is_finite()
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - r, m + r)
    }
}

/// A point of the tangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentSample {
    pub x: [f64; 2],
    pub v: [f64; 2],
}

impl TangentSample {
    pub fn new(x: [f64; 2], v: [f64; 2]) -> Self {
        TangentSample { x, v }
    }
}

/// A Riemannian metric on the 2-torus.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    /// Constant coefficients.
    Flat(Sym2),
    /// `factor(x) · base`.
    Conformal { base: Sym2, factor: ScalarField },
    /// `(f1(x₁) + f2(x₂)) · (dx₁² + dx₂²)`.
    Liouville { f1: Profile, f2: Profile },
    /// Arbitrary SPD field given entrywise.
    General {
        g11: ScalarField,
        g12: ScalarField,
        g22: ScalarField,
    },
}

impl MetricSpec {
    pub fn identity() -> Self {
        MetricSpec::Flat(Sym2::IDENTITY)
    }

    pub fn flat(g: Sym2) -> Result<Self> {
        let m = MetricSpec::Flat(g);
        m.validate()?;
        Ok(m)
    }

    pub fn conformal(base: Sym2, factor: ScalarField) -> Result<Self> {
        let m = MetricSpec::Conformal { base, factor };
        m.validate()?;
        Ok(m)
    }

    pub fn liouville(f1: Profile, f2: Profile) -> Result<Self> {
        let m = MetricSpec::Liouville { f1, f2 };
        m.validate()?;
        Ok(m)
    }

    pub fn general(g11: ScalarField, g12: ScalarField, g22: ScalarField) -> Result<Self> {
        let m = MetricSpec::General { g11, g12, g22 };
        m.validate()?;
        Ok(m)
    }

    /// Parses a conformal metric over the identity from a factor expression.
    pub fn conformal_expr(factor: &str) -> Result<Self> {
        Self::conformal(Sym2::IDENTITY, ScalarField::parse(factor)?)
    }

    /// Checks periodicity of expression coefficients, symmetry and
    /// positive-definiteness (on the validation grid for non-constant
    /// metrics).
    pub fn validate(&self) -> Result<()> {
        match self {
            MetricSpec::Flat(g) => {
                if g.is_positive_definite() {
                    Ok(())
                } else {
                    Err(Error::InvalidMetric(format!(
                        "flat matrix {:?} is not positive definite",
                        g.rows()
                    )))
                }
            }
            MetricSpec::Conformal { base, .. } if !base.is_positive_definite() => {
                Err(Error::InvalidMetric("conformal base is not positive definite".into()))
            }
            _ => {
                match self {
                    MetricSpec::Conformal { factor, .. } => factor.check_periodic()?,
                    MetricSpec::Liouville { f1, f2 } => {
                        f1.check_periodic()?;
                        f2.check_periodic()?;
                    }
                    MetricSpec::General { g11, g12, g22 } => {
                        for f in [g11, g12, g22] {
                            f.check_periodic()?;
                        }
                    }
                    MetricSpec::Flat(_) => {}
                }
                let n = VALIDATION_GRID;
                for j in 0..n {
                    for i in 0..n {
                        let p = [i as f64 / n as f64, j as f64 / n as f64];
                        self.tensor(p).map_err(|_| {
                            Error::InvalidMetric(format!("metric is not positive definite at ({}, {})", p[0], p[1]))
                        })?;
                    }
                }
                Ok(())
            }
        }
    }

    fn check(g: Sym2, p: [f64; 2]) -> Result<Sym2> {
        if g.is_positive_definite() {
            Ok(g)
        } else {
            Err(Error::DegenerateMetric { x: p[0], y: p[1] })
        }
    }

    /// The metric tensor at `p`.
    #[inline]
    pub fn tensor(&self, p: [f64; 2]) -> Result<Sym2> {
        let g = match self {
            MetricSpec::Flat(g) => return Ok(*g),
            MetricSpec::Conformal { base, factor } => base.scale(factor.value(p[0], p[1])),
            MetricSpec::Liouville { f1, f2 } => {
                let s = f1.value(p[0]) + f2.value(p[1]);
                Sym2::diag(s, s)
            }
            MetricSpec::General { g11, g12, g22 } => {
                Sym2::new(g11.value(p[0], p[1]), g12.value(p[0], p[1]), g22.value(p[0], p[1]))
            }
        };
        Self::check(g, p)
    }

    /// The metric tensor at `p` and its two coordinate partials.
    #[inline]
    pub fn tensor_with_partials(&self, p: [f64; 2]) -> Result<(Sym2, Sym2, Sym2)> {
        let zero = Sym2::default();
        let out = match self {
            MetricSpec::Flat(g) => return Ok((*g, zero, zero)),
            MetricSpec::Conformal { base, factor } => {
                let d = factor.dual(p[0], p[1]);
                (base.scale(d.v), base.scale(d.dx), base.scale(d.dy))
            }
            MetricSpec::Liouville { f1, f2 } => {
                let (a, da) = f1.eval(p[0]);
                let (b, db) = f2.eval(p[1]);
                (Sym2::diag(a + b, a + b), Sym2::diag(da, da), Sym2::diag(db, db))
            }
            MetricSpec::General { g11, g12, g22 } => {
                let a = g11.dual(p[0], p[1]);
                let b = g12.dual(p[0], p[1]);
                let c = g22.dual(p[0], p[1]);
                (
                    Sym2::new(a.v, b.v, c.v),
                    Sym2::new(a.dx, b.dx, c.dx),
                    Sym2::new(a.dy, b.dy, c.dy),
                )
            }
        };
        Self::check(out.0, p)?;
        Ok(out)
    }

    /// `c · g`.
    pub fn scaled(&self, c: f64) -> MetricSpec {
        match self {
            MetricSpec::Flat(g) => MetricSpec::Flat(g.scale(c)),
            MetricSpec::Conformal { base, factor } => MetricSpec::Conformal {
                base: base.scale(c),
                factor: factor.clone(),
            },
            MetricSpec::Liouville { f1, f2 } => MetricSpec::Liouville {
                f1: f1.scaled(c),
                f2: f2.scaled(c),
            },
            MetricSpec::General { g11, g12, g22 } => MetricSpec::General {
                g11: g11.scaled(c),
                g12: g12.scaled(c),
                g22: g22.scaled(c),
            },
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, MetricSpec::Flat(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MetricSpec::Flat(_) => "flat",
            MetricSpec::Conformal { .. } => "conformal",
            MetricSpec::Liouville { .. } => "liouville",
            MetricSpec::General { .. } => "general",
        }
    }
}

/// Squared fiber norm `g_x(v, v)`.
pub fn metric_eval(spec: &MetricSpec, s: &TangentSample) -> Result<f64> {
    if s.v == [0.0, 0.0] {
        return Ok(0.0);
    }
    Ok(spec.tensor(s.x)?.quad(s.v))
}

/// Largest generalized eigenvalue of the pencil `(G2, G1)`, i.e. the root of
/// `det(G2 - λ G1) = 0` of largest value.
pub fn pencil_max_eigenvalue(g1: &Sym2, g2: &Sym2) -> f64 {
    // Reduce to the symmetric matrix L⁻¹ G2 L⁻ᵀ with G1 = L Lᵀ, whose
    // eigenvalue gap is a sum of squares (no cancellation when the pencil is
    // nearly conformal).
    let l11 = g1.xx.sqrt();
    let l21 = g1.xy / l11;
    let l22 = (g1.yy - l21 * l21).sqrt();
    let r1 = [1.0 / l11, 0.0];
    let r2 = [-l21 / (l11 * l22), 1.0 / l22];
    let m11 = g2.quad(r1);
    let m22 = g2.quad(r2);
    let g2r2 = g2.apply(r2);
    let m12 = r1[0] * g2r2[0] + r1[1] * g2r2[1];
    0.5 * (m11 + m22) + (0.25 * (m11 - m22).powi(2) + m12 * m12).sqrt()
}

/// `sup_{v ≠ 0} g2_x(v,v) / g1_x(v,v)`.
pub fn fiber_distortion(g1: &MetricSpec, g2: &MetricSpec, x: [f64; 2]) -> Result<f64> {
    let a = g1.tensor(x)?;
    let b = g2.tensor(x)?;
    Ok(pencil_max_eigenvalue(&a, &b))
}

/// Result of [`distortion_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub value: f64,
    pub argmax: [f64; 2],
}

/// The maximal distortion of `g2` against `g1` over the torus.
///
/// Scans a `grid_n × grid_n` grid, then polishes the best grid point with
/// coordinate-wise golden-section searches inside the neighbouring cells.
pub fn distortion_constant(g1: &MetricSpec, g2: &MetricSpec, grid_n: usize) -> Result<Distortion> {
    if grid_n < 16 {
        return Err(Error::InvalidArgument(format!(
            "distortion grid must be at least 16, got {grid_n}"
        )));
    }
    let h = 1.0 / grid_n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut arg = [0.0, 0.0];
    for j in 0..grid_n {
        for i in 0..grid_n {
            let p = [i as f64 * h, j as f64 * h];
            let r = fiber_distortion(g1, g2, p)?;
            if r > best {
                best = r;
                arg = p;
            }
        }
    }

    // Errors inside the line searches are surfaced after the fact.
    let mut failure = None;
    let mut eval = |p: [f64; 2]| match fiber_distortion(g1, g2, p) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    for _ in 0..60 {
        let prev = best;
        for axis in 0..2 {
            let centre = arg[axis];
            let (t, v) = golden_section_max(
                |s| {
                    let mut q = arg;
                    q[axis] = s;
                    eval(q)
                },
                centre - h,
                centre + h,
                1e-13,
            );
            if v > best {
                best = v;
                arg[axis] = t;
            }
        }
        if (best - prev).abs() <= 1e-10 * best.abs() {
            break;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    arg = [crate::field::wrap_unit(arg[0]), crate::field::wrap_unit(arg[1])];
    Ok(Distortion {
        value: best,
        argmax: arg,
    })
}
