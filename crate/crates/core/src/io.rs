//! JSON documents describing metrics and Lagrangians.
//!
//! ```json
//! {"type": "flat", "matrix": [[2, 1], [1, 2]]}
//! {"type": "conformal", "factor_expr": "1 + 0.5*sin(2*pi*x)^2"}
//! {"type": "conformal", "matrix": [[1, 0], [0, 4]],
//!  "factor_grid": {"nx": 2, "ny": 2, "values": [1, 2, 2, 1]}}
//! {"type": "liouville", "f1": "1", "f2": [1.0, 1.5, 1.0, 0.5]}
//! {"type": "general", "spd_grid": {"nx": 2, "ny": 2,
//!  "values": [[2, 0, 1], [2, 0.1, 1], [2, 0, 1], [2, -0.1, 1]]}}
//! {"type": "general", "spd_expr": ["2 + sin(2*pi*x)", "0.1", "1"]}
//! ```
//!
//! Grids are row-major: entry `j * nx + i` is the sample at `(i/nx, j/ny)`.
//! `matrix` is the base of a conformal metric (identity when absent). A
//! Lagrangian document is a metric document with an extra `potential`, an
//! expression or a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PeriodicGrid, Profile, ScalarField};
use crate::mane::TonelliSpec;
use crate::metrics::{MetricSpec, Sym2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDoc {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdGridDoc {
    pub nx: usize,
    pub ny: usize,
    /// `[g11, g12, g22]` per sample.
    pub values: Vec<[f64; 3]>,
}

/// A scalar given as an expression or as a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldDoc {
    Expr(String),
    Grid(GridDoc),
}

/// A one-variable profile given as an expression or as equispaced samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileDoc {
    Expr(String),
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Flat,
    Conformal,
    Liouville,
    General,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDoc {
    #[serde(rename = "type")]
    pub kind: Option<MetricKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_grid: Option<GridDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<ProfileDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<ProfileDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spd_grid: Option<SpdGridDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spd_expr: Option<[String; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<FieldDoc>,
}

fn missing(kind: &str, field: &str) -> Error {
    Error::InvalidMetric(format!("{kind} metric needs `{field}`"))
}

fn grid(doc: &GridDoc) -> Result<PeriodicGrid> {
    PeriodicGrid::new(doc.nx, doc.ny, doc.values.clone())
}

fn field(doc: &FieldDoc) -> Result<ScalarField> {
    match doc {
        FieldDoc::Expr(s) => ScalarField::parse(s),
        FieldDoc::Grid(g) => Ok(ScalarField::Grid(grid(g)?)),
    }
}

fn profile(doc: &ProfileDoc) -> Result<Profile> {
    match doc {
        ProfileDoc::Expr(s) => Profile::parse(s),
        ProfileDoc::Samples(v) => Profile::samples(v.clone()),
    }
}

fn field_doc(f: &ScalarField) -> FieldDoc {
    match f {
        ScalarField::Expr(e) => FieldDoc::Expr(e.source().to_string()),
        ScalarField::Grid(g) => {
            let (nx, ny) = g.dims();
            FieldDoc::Grid(GridDoc {
                nx,
                ny,
                values: g.values().to_vec(),
            })
        }
    }
}

fn profile_doc(p: &Profile) -> ProfileDoc {
    match p {
        Profile::Expr(e) => ProfileDoc::Expr(e.source().to_string()),
        Profile::Samples(v) => ProfileDoc::Samples(v.clone()),
    }
}

impl MetricDoc {
    pub fn to_metric(&self) -> Result<MetricSpec> {
        let kind = self.kind.ok_or_else(|| Error::InvalidMetric("missing `type`".into()))?;
        let base = match self.matrix {
            Some(m) => Sym2::from_rows(m)?,
            None => Sym2::IDENTITY,
        };
        match kind {
            MetricKind::Flat => {
                let m = self.matrix.ok_or_else(|| missing("flat", "matrix"))?;
                MetricSpec::flat(Sym2::from_rows(m)?)
            }
            MetricKind::Conformal => {
                let factor = match (&self.factor_expr, &self.factor_grid) {
                    (Some(e), None) => ScalarField::parse(e)?,
                    (None, Some(g)) => ScalarField::Grid(grid(g)?),
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidMetric(
                            "give either `factor_expr` or `factor_grid`, not both".into(),
                        ))
                    }
                    (None, None) => return Err(missing("conformal", "factor_expr")),
                };
                MetricSpec::conformal(base, factor)
            }
            MetricKind::Liouville => {
                let f1 = profile(self.f1.as_ref().ok_or_else(|| missing("liouville", "f1"))?)?;
                let f2 = profile(self.f2.as_ref().ok_or_else(|| missing("liouville", "f2"))?)?;
                MetricSpec::liouville(f1, f2)
            }
            MetricKind::General => match (&self.spd_grid, &self.spd_expr) {
                (Some(g), None) => {
                    let pick = |c: usize| {
                        grid(&GridDoc {
                            nx: g.nx,
                            ny: g.ny,
                            values: g.values.iter().map(|v| v[c]).collect(),
                        })
                        .map(ScalarField::Grid)
                    };
                    MetricSpec::general(pick(0)?, pick(1)?, pick(2)?)
                }
                (None, Some([a, b, c])) => {
                    MetricSpec::general(ScalarField::parse(a)?, ScalarField::parse(b)?, ScalarField::parse(c)?)
                }
                (Some(_), Some(_)) => Err(Error::InvalidMetric(
                    "give either `spd_grid` or `spd_expr`, not both".into(),
                )),
                (None, None) => Err(missing("general", "spd_grid")),
            },
        }
    }

    pub fn from_metric(g: &MetricSpec) -> Self {
        let mut doc = MetricDoc::default();
        match g {
            MetricSpec::Flat(m) => {
                doc.kind = Some(MetricKind::Flat);
                doc.matrix = Some(m.rows());
            }
            MetricSpec::Conformal { base, factor } => {
                doc.kind = Some(MetricKind::Conformal);
                if *base != Sym2::IDENTITY {
                    doc.matrix = Some(base.rows());
                }
                match field_doc(factor) {
                    FieldDoc::Expr(s) => doc.factor_expr = Some(s),
                    FieldDoc::Grid(gd) => doc.factor_grid = Some(gd),
                }
            }
            MetricSpec::Liouville { f1, f2 } => {
                doc.kind = Some(MetricKind::Liouville);
                doc.f1 = Some(profile_doc(f1));
                doc.f2 = Some(profile_doc(f2));
            }
            MetricSpec::General { g11, g12, g22 } => {
                doc.kind = Some(MetricKind::General);
                match (g11, g12, g22) {
                    (ScalarField::Grid(a), ScalarField::Grid(b), ScalarField::Grid(c)) => {
                        let (nx, ny) = a.dims();
                        doc.spd_grid = Some(SpdGridDoc {
                            nx,
                            ny,
                            values: a
                                .values()
                                .iter()
                                .zip(b.values())
                                .zip(c.values())
                                .map(|((x, y), z)| [*x, *y, *z])
                                .collect(),
                        });
                    }
                    _ => {
                        let src = |f: &ScalarField| match field_doc(f) {
                            FieldDoc::Expr(s) => s,
                            // Mixed representations only arise programmatically.
                            FieldDoc::Grid(_) => "nan".into(),
                        };
                        doc.spd_expr = Some([src(g11), src(g12), src(g22)]);
                    }
                }
            }
        }
        doc
    }

    pub fn to_lagrangian(&self) -> Result<TonelliSpec> {
        let kinetic = self.to_metric()?;
        let potential = match &self.potential {
            Some(p) => field(p)?,
            None => ScalarField::constant(0.0),
        };
        potential.check_periodic()?;
        Ok(TonelliSpec::new(kinetic, potential))
    }

    pub fn from_lagrangian(l: &TonelliSpec) -> Self {
        MetricDoc {
            potential: Some(field_doc(&l.potential)),
            ..Self::from_metric(&l.kinetic)
        }
    }
}

/// Parses a metric document.
pub fn parse_metric(json: &str) -> Result<MetricSpec> {
    parse_doc(json)?.to_metric()
}

/// Parses a Lagrangian document; the potential is normalized.
pub fn parse_lagrangian(json: &str) -> Result<TonelliSpec> {
    parse_doc(json)?.to_lagrangian()
}

pub fn parse_doc(json: &str) -> Result<MetricDoc> {
    serde_json::from_str(json).map_err(|e| Error::InvalidMetric(format!("malformed metric document: {e}")))
}
