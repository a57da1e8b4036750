use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Partition;
use crate::error::{Error, Result};
use crate::sysflow::Domain;

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Zero,
    Linear(Vec<f64>),
    // φ(x) = -xᵀQx
    Quadratic(DMatrix<f64>),
    // φ(x) = Σ cos(2π x_i)
    Cosine,
    Custom(Evaluator),
}

/// A bounded continuous potential with declared bounds `[min, max]`.
#[derive(Clone)]
pub struct Potential {
    kind: Kind,
    offset: f64,
    min: f64,
    max: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Zero => "zero".to_string(),
            Kind::Linear(a) => format!("linear {a:?}"),
            Kind::Quadratic(_) => "quadratic".to_string(),
            Kind::Cosine => "cosine".to_string(),
            Kind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("Potential")
            .field("kind", &kind)
            .field("offset", &self.offset)
            .field("bounds", &(self.min, self.max))
            .finish()
    }
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            kind: Kind::Zero,
            offset: 0.0,
            min: 0.0,
            max: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Potential::zero().shifted(c)
    }

    /// `φ(x) = a·x`, bounded over `domain`.
    pub fn linear(a: Vec<f64>, domain: &Domain) -> Result<Self> {
        if a.len() != domain.dim() {
            return Err(Error::Dimension(format!(
                "linear potential has {} coefficients for dimension {}",
                a.len(),
                domain.dim()
            )));
        }
        let (mut min, mut max) = (0.0, 0.0);
        for (i, ai) in a.iter().enumerate() {
            let (p, q) = (ai * domain.lo()[i], ai * domain.hi()[i]);
            min += p.min(q);
            max += p.max(q);
        }
        Ok(Potential {
            kind: Kind::Linear(a),
            offset: 0.0,
            min,
            max,
        })
    }

    /// `φ(x) = -xᵀQx`, bounded over `domain` by the spectral norm of `Q`.
    pub fn quadratic(q: DMatrix<f64>, domain: &Domain) -> Result<Self> {
        let d = domain.dim();
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::Dimension(format!(
                "quadratic potential is {}x{}, expected {d}x{d}",
                q.nrows(),
                q.ncols()
            )));
        }
        let r2: f64 = (0..d)
            .map(|i| domain.lo()[i].abs().max(domain.hi()[i].abs()).powi(2))
            .sum();
        let norm = q.clone().singular_values().max();
        Ok(Potential {
            kind: Kind::Quadratic(q),
            offset: 0.0,
            min: -norm * r2,
            max: norm * r2,
        })
    }

    pub fn cosine(d: usize) -> Self {
        Potential {
            kind: Kind::Cosine,
            offset: 0.0,
            min: -(d as f64),
            max: d as f64,
        }
    }

    /// User-supplied evaluator with declared bounds.
    pub fn custom<F>(f: F, min: f64, max: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Potential {
            kind: Kind::Custom(Arc::new(f)),
            offset: 0.0,
            min,
            max,
        }
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Potential {
            kind: self.kind.clone(),
            offset: self.offset + c,
            min: self.min + c,
            max: self.max + c,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            Kind::Zero => 0.0,
            Kind::Linear(a) => a.iter().zip(x).map(|(a, b)| a * b).sum(),
            Kind::Quadratic(q) => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        s += x[i] * q[(i, j)] * x[j];
                    }
                }
                -s
            }
            Kind::Cosine => x.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum(),
            Kind::Custom(f) => f(x),
        };
        base + self.offset
    }

    /// Values on every cell center. Fails on a non-finite value.
    pub fn on_centers(&self, part: &Partition) -> Result<Vec<f64>> {
        (0..part.len())
            .map(|i| {
                let c = part.center(i);
                let v = self.eval(&c);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Potential { center: c })
                }
            })
            .collect()
    }

    /// Checks that every cell-center value lies within the declared bounds.
    pub fn check_bounds(&self, part: &Partition) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.min.abs().max(self.max.abs()));
        for (i, v) in self.on_centers(part)?.into_iter().enumerate() {
            if v < self.min - slack || v > self.max + slack {
                return Err(Error::Precondition(format!(
                    "potential value {v} at cell {i} outside declared bounds [{}, {}]",
                    self.min, self.max
                )));
            }
        }
        Ok(())
    }
}

/// Serializable description of a potential, as written in config files and
/// on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant(f64),
    Linear(Vec<f64>),
    Quadratic(Vec<Vec<f64>>),
    Builtin(String),
}

impl PotentialSpec {
    pub fn build(&self, domain: &Domain) -> Result<Potential> {
        match self {
            PotentialSpec::Zero => Ok(Potential::zero()),
            PotentialSpec::Constant(c) => Ok(Potential::constant(*c)),
            PotentialSpec::Linear(a) => Potential::linear(a.clone(), domain),
            PotentialSpec::Quadratic(rows) => {
                let q = crate::config::matrix_from_rows(rows, "potential.quadratic")?;
                Potential::quadratic(q, domain)
            }
            PotentialSpec::Builtin(name) => match name.as_str() {
                "cosine" => Ok(Potential::cosine(domain.dim())),
                other => Err(Error::config("potential.builtin", format!("unknown built-in `{other}`"))),
            },
        }
    }
}

/// Parses `zero`, `constant:c`, `linear:a1,a2,..` or `builtin:name`.
impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::config("--phi", m.to_string());
        let (head, tail) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> {
            tail.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
                .collect()
        };
        match head.trim() {
            "zero" => Ok(PotentialSpec::Zero),
            "constant" => Ok(PotentialSpec::Constant(
                tail.trim().parse().map_err(|_| bad("expected constant:<value>"))?,
            )),
            "linear" => Ok(PotentialSpec::Linear(nums()?)),
            "builtin" => Ok(PotentialSpec::Builtin(tail.trim().to_string())),
            other => Err(bad(&format!("unknown potential `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::build_partition;

    #[test]
    fn declared_bounds_hold_on_centers() {
        let dom = Domain::new(vec![-1.0, 0.0], vec![2.0, 1.0], true).unwrap();
        let part = build_partition(&dom, 7).unwrap();
        let cases = [
            Potential::linear(vec![1.5, -2.0], &dom).unwrap(),
            Potential::quadratic(nalgebra::dmatrix![1.0, 0.2; 0.2, 0.5], &dom).unwrap(),
            Potential::cosine(2),
            Potential::constant(-3.0),
        ];
        for p in cases {
            p.check_bounds(&part).unwrap();
        }
    }

    #[test]
    fn violated_bounds_detected() {
        let part = build_partition(&Domain::unit(1, true), 4).unwrap();
        let p = Potential::custom(|x| 10.0 * x[0], 0.0, 1.0);
        assert!(p.check_bounds(&part).is_err());
    }

    #[test]
    fn parse_cli_forms() {
        assert_eq!("zero".parse::<PotentialSpec>().unwrap(), PotentialSpec::Zero);
        assert_eq!("constant:1.5".parse::<PotentialSpec>().unwrap(), PotentialSpec::Constant(1.5));
        assert_eq!(
            "linear:1,-2".parse::<PotentialSpec>().unwrap(),
            PotentialSpec::Linear(vec![1.0, -2.0])
        );
        assert!("bogus".parse::<PotentialSpec>().is_err());
    }

    #[test]
    fn non_finite_reports_center() {
        let part = build_partition(&Domain::unit(1, true), 2).unwrap();
        let p = Potential::custom(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }, -1.0, 1.0);
        match p.on_centers(&part) {
            Err(Error::Potential { center }) => assert_eq!(center, vec![0.75]),
            other => panic!("{other:?}"),
        }
    }
}
