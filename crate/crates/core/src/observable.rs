//! Continuous observables with a known modulus of continuity.

use std::f64::consts::TAU;

use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::genericity::TentFunction;
use crate::torus::{parse_rational, rational_to_string, TorusPoint};
use crate::weyl::Character;

/// Periodic piecewise-linear function of the first coordinate through
/// equispaced nodes. A single node is a constant, valid in any dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzTable {
    values: Vec<f64>,
}

impl LipschitzTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("table needs finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![c])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    fn eval(&self, x: &TorusPoint) -> f64 {
        if self.is_constant() {
            return self.values[0];
        }
        let n = self.values.len();
        let t = x.coord_f64(0) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        let a = self.values[i];
        let b = self.values[(i + 1) % n];
        a + (b - a) * frac
    }

    /// Lipschitz constant in `rho`.
    pub fn lipschitz(&self) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return 0.0;
        }
        (0..n).map(|i| (self.values[(i + 1) % n] - self.values[i]).abs()).fold(0.0, f64::max) * n as f64
    }

    /// Mean over the nodes, which is the exact integral of the interpolant.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    Character(Character),
    Tent(TentFunction),
    CustomLipschitz(LipschitzTable),
}

impl Observable {
    /// `char:1`, `char:1;-2`, `tent:0.05`, `tent:1/20`, `const:1`, `table:0,1,0.5`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let (kind, arg) =
            spec.split_once(':').ok_or_else(|| Error::InvalidConfig(format!("observable {spec:?} needs kind:arg")))?;
        let obs = match kind.trim() {
            "char" => Self::Character(Character::parse(arg)?),
            "tent" => Self::Tent(TentFunction::new(parse_rational(arg)?)?),
            "const" => Self::CustomLipschitz(LipschitzTable::constant(parse_f64(arg)?)?),
            "table" => {
                let values = arg.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
                Self::CustomLipschitz(LipschitzTable::new(values)?)
            }
            other => return Err(Error::InvalidConfig(format!("unknown observable kind {other:?}"))),
        };
        obs.check_dim(dim)?;
        Ok(obs)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Self::Character(c) if c.dim() != dim => Err(Error::DimensionMismatch { expected: dim, got: c.dim() }),
            Self::Tent(_) if dim == 0 => Err(Error::UnsupportedDim(dim)),
            Self::CustomLipschitz(t) if !t.is_constant() && dim != 1 => Err(Error::UnsupportedDim(dim)),
            _ => Ok(()),
        }
    }

    /// Round-trips through [`parse`](Self::parse).
    pub fn spec(&self) -> String {
        match self {
            Self::Character(c) => format!("char:{}", c.label()),
            Self::Tent(t) => format!("tent:{}", rational_to_string(t.delta())),
            Self::CustomLipschitz(t) if t.is_constant() => format!("const:{}", t.values()[0]),
            Self::CustomLipschitz(t) => {
                format!("table:{}", t.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            }
        }
    }

    pub fn value(&self, x: &TorusPoint) -> Result<Complex64> {
        Ok(match self {
            Self::Character(c) => c.eval(x)?,
            Self::Tent(t) => Complex64::new(t.value(x), 0.0),
            Self::CustomLipschitz(t) => Complex64::new(t.eval(x), 0.0),
        })
    }

    /// `omega(t)` with `|f(z) - f(w)| <= omega(rho(z, w))`.
    pub fn modulus(&self, t: f64) -> f64 {
        match self {
            Self::Character(c) => TAU * c.l1().to_f64().unwrap_or(f64::INFINITY) * t,
            Self::Tent(tent) => tent.lipschitz() * t,
            Self::CustomLipschitz(tab) => tab.lipschitz() * t,
        }
    }

    pub fn integral(&self, dim: usize) -> Complex64 {
        match self {
            Self::Character(_) => Complex64::new(0.0, 0.0),
            Self::Tent(t) => Complex64::new(t.integral(dim).to_f64().expect("finite"), 0.0),
            Self::CustomLipschitz(t) => Complex64::new(t.integral(), 0.0),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Character(_) | Self::Tent(_) => 1.0,
            Self::CustomLipschitz(t) => t.values().iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad number {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Precision;

    #[test]
    fn specs_round_trip() {
        for (spec, dim) in [("char:1", 1), ("char:2;-1", 2), ("tent:1/20", 1), ("const:1", 3), ("table:0,1,0.5", 1)] {
            let o = Observable::parse(spec, dim).unwrap();
            assert_eq!(Observable::parse(&o.spec(), dim).unwrap(), o);
        }
        assert_eq!(Observable::parse("tent:0.05", 1).unwrap().spec(), "tent:1/20");
        assert!(Observable::parse("char:1", 2).is_err());
        assert!(Observable::parse("table:0,1", 2).is_err());
        assert!(Observable::parse("wave:1", 1).is_err());
    }

    #[test]
    fn table_interpolates_periodically() {
        let o = Observable::parse("table:0,1", 1).unwrap();
        let prec = Precision::new(64).unwrap();
        let at = |v: f64| o.value(&TorusPoint::from_f64(&prec, &[v]).unwrap()).unwrap().re;
        assert!((at(0.25) - 0.5).abs() < 1e-12);
        assert!((at(0.75) - 0.5).abs() < 1e-12);
        assert!((o.modulus(0.1) - 0.2).abs() < 1e-12);
        assert_eq!(o.integral(1).re, 0.5);
    }

    #[test]
    fn moduli() {
        let c = Observable::parse("char:1;-2", 2).unwrap();
        assert!((c.modulus(0.5) - 3.0 * std::f64::consts::PI).abs() < 1e-12);
        let t = Observable::parse("tent:0.05", 1).unwrap();
        assert!((t.modulus(0.01) - 0.4).abs() < 1e-12);
        assert!((t.integral(1).re - 0.075).abs() < 1e-15);
        assert_eq!(Observable::parse("const:2.5", 2).unwrap().integral(2).re, 2.5);
    }
}
