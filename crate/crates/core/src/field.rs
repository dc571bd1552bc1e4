//! Periodic scalar functions on the torus and on the circle.

use crate::error::{Error, Result};
use crate::expr::{Dual, Expr};
use crate::search::golden_section_max;

/// Reduces a coordinate into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Samples of a function on the regular `nx × ny` grid of `[0,1)²`, stored
/// row-major: `values[j * nx + i]` is the value at `(i / nx, j / ny)`.
/// Evaluation is periodic bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl PeriodicGrid {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidMetric(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidMetric(format!(
                "grid {nx}x{ny} needs {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("grid contains non-finite values".into()));
        }
        Ok(PeriodicGrid { nx, ny, values })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(i as f64 / nx as f64, j as f64 / ny as f64));
            }
        }
        Self::new(nx, ny, values)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn cell(&self, x: f64, y: f64) -> (usize, usize, usize, usize, f64, f64) {
        let fx = wrap_unit(x) * self.nx as f64;
        let fy = wrap_unit(y) * self.ny as f64;
        let i0 = (fx.floor() as usize).min(self.nx - 1);
        let j0 = (fy.floor() as usize).min(self.ny - 1);
        (
            i0,
            j0,
            (i0 + 1) % self.nx,
            (j0 + 1) % self.ny,
            fx - i0 as f64,
            fy - j0 as f64,
        )
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (i0, j0, i1, j1, tx, ty) = self.cell(x, y);
        let a = self.at(i0, j0) * (1.0 - tx) + self.at(i1, j0) * tx;
        let b = self.at(i0, j1) * (1.0 - tx) + self.at(i1, j1) * tx;
        a * (1.0 - ty) + b * ty
    }

    /// Value and partials of the interpolant (one-sided on cell edges).
    pub fn dual(&self, x: f64, y: f64) -> Dual {
        let (i0, j0, i1, j1, tx, ty) = self.cell(x, y);
        let (f00, f10, f01, f11) = (self.at(i0, j0), self.at(i1, j0), self.at(i0, j1), self.at(i1, j1));
        let a = f00 * (1.0 - tx) + f10 * tx;
        let b = f01 * (1.0 - tx) + f11 * tx;
        let dx = ((f10 - f00) * (1.0 - ty) + (f11 - f01) * ty) * self.nx as f64;
        let dy = (b - a) * self.ny as f64;
        Dual {
            v: a * (1.0 - ty) + b * ty,
            dx,
            dy,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PeriodicGrid {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Points per edge at which expressions are checked for periodicity.
pub const SEAM_SAMPLES: usize = 64;
/// Largest relative jump of a value across an edge.
pub const SEAM_TOL: f64 = 1e-9;

fn seam_jump(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn not_periodic(e: &Expr, s: f64) -> Error {
    Error::InvalidMetric(format!(
        "`{}` is not 1-periodic (jump across the edge at s = {s:.4})",
        e.source()
    ))
}

/// A smooth (or C⁰ sampled) 1-periodic function of two variables.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Expr(Expr),
    Grid(PeriodicGrid),
}

impl ScalarField {
    pub fn parse(src: &str) -> Result<Self> {
        Expr::parse(src).map(ScalarField::Expr)
    }

    /// Checks that an expression takes the same values on opposite edges of
    /// the unit square. Grids are periodic by construction.
    pub fn check_periodic(&self) -> Result<()> {
        let ScalarField::Expr(e) = self else {
            return Ok(());
        };
        for i in 0..SEAM_SAMPLES {
            let s = (i as f64 + 0.5) / SEAM_SAMPLES as f64;
            if seam_jump(e.value(s, 0.0), e.value(s, 1.0)) > SEAM_TOL
                || seam_jump(e.value(0.0, s), e.value(1.0, s)) > SEAM_TOL
            {
                return Err(not_periodic(e, s));
            }
        }
        Ok(())
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::Expr(Expr::parse(&format!("{c:e}")).expect("constant literal parses"))
    }

    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            ScalarField::Expr(e) => e.value(wrap_unit(x), wrap_unit(y)),
            ScalarField::Grid(g) => g.value(x, y),
        }
    }

    #[inline]
    pub fn dual(&self, x: f64, y: f64) -> Dual {
        match self {
            ScalarField::Expr(e) => e.dual(wrap_unit(x), wrap_unit(y)),
            ScalarField::Grid(g) => g.dual(x, y),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            ScalarField::Expr(e) => ScalarField::Expr(e.scaled(c)),
            ScalarField::Grid(g) => ScalarField::Grid(g.map(|v| c * v)),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        match self {
            ScalarField::Expr(e) => ScalarField::Expr(e.shifted(c)),
            ScalarField::Grid(g) => ScalarField::Grid(g.map(|v| v + c)),
        }
    }

    /// Minimum and maximum over the `n × n` evaluation grid (and over the
    /// stored samples for grid fields, where the extrema are attained).
    pub fn grid_range(&self, n: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self {
            ScalarField::Grid(g) => {
                for &v in g.values() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            ScalarField::Expr(_) => {
                for j in 0..n {
                    for i in 0..n {
                        let v = self.value(i as f64 / n as f64, j as f64 / n as f64);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Maximum and its location: the best point of an `n × n` scan, polished
    /// by coordinate-wise golden-section searches in the neighbouring cells.
    /// Grid fields attain their maximum at a sample, so no polishing is done.
    pub fn maximum(&self, n: usize) -> (f64, [f64; 2]) {
        let (nx, ny) = match self {
            ScalarField::Grid(g) => g.dims(),
            ScalarField::Expr(_) => (n.max(2), n.max(2)),
        };
        let mut best = f64::NEG_INFINITY;
        let mut arg = [0.0, 0.0];
        for j in 0..ny {
            for i in 0..nx {
                let p = [i as f64 / nx as f64, j as f64 / ny as f64];
                let v = self.value(p[0], p[1]);
                if v > best {
                    best = v;
                    arg = p;
                }
            }
        }
        if let ScalarField::Grid(_) = self {
            return (best, arg);
        }
        let h = 1.0 / nx as f64;
        for _ in 0..60 {
            let prev = best;
            for axis in 0..2 {
                let (t, v) = golden_section_max(
                    |s| {
                        let mut q = arg;
                        q[axis] = s;
                        self.value(q[0], q[1])
                    },
                    arg[axis] - h,
                    arg[axis] + h,
                    1e-13,
                );
                if v > best {
                    best = v;
                    arg[axis] = t;
                }
            }
            if (best - prev).abs() <= 1e-14 * best.abs().max(1.0) {
                break;
            }
        }
        (best, [wrap_unit(arg[0]), wrap_unit(arg[1])])
    }
}

/// A 1-periodic function of one variable (Liouville profiles).
///
/// Expressions may use `t`, `x` or `y` for the argument.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Expr(Expr),
    Samples(Vec<f64>),
}

impl Profile {
    pub fn parse(src: &str) -> Result<Self> {
        Expr::parse(src).map(Profile::Expr)
    }

    /// Checks that an expression takes the same value at `0` and `1`.
    pub fn check_periodic(&self) -> Result<()> {
        match self {
            Profile::Expr(e) if seam_jump(e.value(0.0, 0.0), e.value(1.0, 1.0)) > SEAM_TOL => Err(not_periodic(e, 0.0)),
            _ => Ok(()),
        }
    }

    pub fn samples(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("profile needs at least two finite samples".into()));
        }
        Ok(Profile::Samples(values))
    }

    /// Value and derivative at `s`.
    #[inline]
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let s = wrap_unit(s);
        match self {
            Profile::Expr(e) => {
                let d = e.dual(s, s);
                (d.v, d.dx + d.dy)
            }
            Profile::Samples(v) => {
                let n = v.len();
                let f = s * n as f64;
                let i0 = (f.floor() as usize).min(n - 1);
                let i1 = (i0 + 1) % n;
                let t = f - i0 as f64;
                (v[i0] * (1.0 - t) + v[i1] * t, (v[i1] - v[i0]) * n as f64)
            }
        }
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Profile::Expr(e) => {
                let s = wrap_unit(s);
                e.value(s, s)
            }
            Profile::Samples(_) => self.eval(s).0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Profile::Expr(e) => Profile::Expr(e.scaled(c)),
            Profile::Samples(v) => Profile::Samples(v.iter().map(|x| c * x).collect()),
        }
    }
}
