//! Named boundary-data selectors: `NAME[:param[:param...]]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, GridDomain};
use crate::profiles::{AnalyticStack, Category, Example46, HalfSpaceProfile, LayeredProfile, PiecewiseQuadratic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BcSelector {
    /// Traces of a planar category, `example46-<cat>[:angle_deg]`.
    Example46 { category: Category, angle: f64 },
    /// `halfspace-profile[:angle_deg[:a1,a2,..[:b1,b2,..]]]`, null-averaged.
    HalfspaceProfile { angle: f64, a: Option<Vec<f64>>, b: Option<Vec<f64>> },
    /// `constant-ordered[:c1,c2,..]`
    ConstantOrdered { values: Option<Vec<f64>> },
    /// `radial-eps[:eps]`: `(eps, -eps)` on the circle, two membranes.
    RadialEps { eps: f64 },
    /// `layered[:angle_deg[:width]]`
    Layered { angle: f64, width: f64 },
}

fn num(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("--bc: cannot parse {field} '{s}'")))
}

fn list(field: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| num(field, v)).collect()
}

impl FromStr for BcSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or("").trim();
        let params: Vec<&str> = parts.collect();
        let deg = |i: usize| -> Result<f64> {
            params.get(i).map_or(Ok(0.0), |p| num("angle", p).map(f64::to_radians))
        };
        let too_many = |max: usize| -> Result<()> {
            if params.len() > max {
                Err(Error::InvalidArgument(format!("--bc: too many parameters for '{name}'")))
            } else {
                Ok(())
            }
        };
        if let Some(cat) = name.strip_prefix("example46-") {
            too_many(1)?;
            let category = cat.parse::<Category>().map_err(|_| {
                Error::InvalidArgument(format!("--bc: unknown category '{cat}' (expected i, ii, iii, iv or v)"))
            })?;
            return Ok(BcSelector::Example46 { category, angle: deg(0)? });
        }
        match name {
            "halfspace-profile" => {
                too_many(3)?;
                let a = params.get(1).map(|p| list("a", p)).transpose()?;
                let b = params.get(2).map(|p| list("b", p)).transpose()?;
                Ok(BcSelector::HalfspaceProfile { angle: deg(0)?, a, b })
            }
            "constant-ordered" => {
                too_many(1)?;
                Ok(BcSelector::ConstantOrdered { values: params.first().map(|p| list("value", p)).transpose()? })
            }
            "radial-eps" => {
                too_many(1)?;
                let eps = params.first().map_or(Ok(0.05), |p| num("eps", p))?;
                Ok(BcSelector::RadialEps { eps })
            }
            "layered" => {
                too_many(2)?;
                let width = params.get(1).map_or(Ok(0.125), |p| num("width", p))?;
                Ok(BcSelector::Layered { angle: deg(0)?, width })
            }
            other => Err(Error::InvalidArgument(format!(
                "--bc: unknown selector '{other}' (expected example46-<cat>, halfspace-profile, constant-ordered, radial-eps or layered)"
            ))),
        }
    }
}

impl fmt::Display for BcSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            BcSelector::Example46 { category, angle } => write!(f, "example46-{category}:{}", angle.to_degrees()),
            BcSelector::HalfspaceProfile { angle, a, b } => {
                write!(f, "halfspace-profile:{}", angle.to_degrees())?;
                if let Some(a) = a {
                    write!(f, ":{}", join(a))?;
                }
                if let Some(b) = b {
                    write!(f, ":{}", join(b))?;
                }
                Ok(())
            }
            BcSelector::ConstantOrdered { values } => match values {
                Some(v) => write!(f, "constant-ordered:{}", join(v)),
                None => f.write_str("constant-ordered"),
            },
            BcSelector::RadialEps { eps } => write!(f, "radial-eps:{eps}"),
            BcSelector::Layered { angle, width } => write!(f, "layered:{}:{width}", angle.to_degrees()),
        }
    }
}

impl BcSelector {
    /// Membrane count the selector forces, if any.
    pub fn required_membranes(&self) -> Option<usize> {
        match self {
            BcSelector::Example46 { .. } | BcSelector::Layered { .. } => Some(3),
            BcSelector::RadialEps { .. } => Some(2),
            BcSelector::HalfspaceProfile { a: Some(a), .. } => Some(a.len()),
            BcSelector::ConstantOrdered { values: Some(v) } => Some(v.len()),
            _ => None,
        }
    }

    /// Closed form whose traces are imposed, when the selector has one.
    pub fn closed_form(&self, n_membranes: usize) -> Result<Option<PiecewiseQuadratic>> {
        Ok(match self {
            BcSelector::Example46 { category, angle } => Some(Example46::canonical(*category, *angle).build()?),
            BcSelector::HalfspaceProfile { angle, a, b } => {
                let n = n_membranes as f64;
                let a = a.clone().unwrap_or_else(|| {
                    (0..n_membranes).map(|j| 0.5 - j as f64 / (n - 1.0)).collect()
                });
                let b = b.clone().unwrap_or_else(|| vec![0.0; a.len()]);
                Some(HalfSpaceProfile::null_average(*angle, a, b)?.pieces())
            }
            BcSelector::Layered { angle, width } => Some(LayeredProfile::new(*angle, *width)?.pieces()),
            BcSelector::ConstantOrdered { .. } | BcSelector::RadialEps { .. } => None,
        })
    }

    pub fn boundary_data(&self, domain: Arc<GridDomain>, n_membranes: usize) -> Result<BoundaryData> {
        if let Some(req) = self.required_membranes() {
            if req != n_membranes {
                return Err(Error::InvalidArgument(format!(
                    "--N: boundary data '{self}' needs N = {req} (got {n_membranes})"
                )));
            }
        }
        if let Some(p) = self.closed_form(n_membranes)? {
            return BoundaryData::from_fn(domain, n_membranes, |x, y, g| p.value(x, y, g));
        }
        match self {
            BcSelector::ConstantOrdered { values } => {
                let v = values.clone().unwrap_or_else(|| {
                    (0..n_membranes).map(|j| (n_membranes - 1) as f64 / 2.0 - j as f64).collect()
                });
                BoundaryData::from_fn(domain, n_membranes, |_, _, g| g.copy_from_slice(&v))
            }
            BcSelector::RadialEps { eps } => {
                if !(*eps >= 0.0) {
                    return Err(Error::InvalidArgument(format!("--bc: eps must be non-negative (got {eps})")));
                }
                BoundaryData::from_fn(domain, 2, |_, _, g| g.copy_from_slice(&[*eps, -*eps]))
            }
            _ => unreachable!(),
        }
    }

    /// Forcing used when none is given.
    pub fn default_forcing(&self, n_membranes: usize) -> Vec<f64> {
        if n_membranes == 1 {
            return vec![0.0];
        }
        (0..n_membranes).map(|j| 1.0 - 2.0 * j as f64 / (n_membranes - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};

    #[test]
    fn parse_selectors() {
        assert_eq!(
            "example46-ii:30".parse::<BcSelector>().unwrap(),
            BcSelector::Example46 { category: Category::Ii, angle: 30f64.to_radians() }
        );
        assert_eq!("radial-eps".parse::<BcSelector>().unwrap(), BcSelector::RadialEps { eps: 0.05 });
        assert_eq!(
            "constant-ordered:2,1,0".parse::<BcSelector>().unwrap(),
            BcSelector::ConstantOrdered { values: Some(vec![2.0, 1.0, 0.0]) }
        );
        assert!("example46-vi".parse::<BcSelector>().is_err());
        assert!("nonsense".parse::<BcSelector>().is_err());
        assert!("radial-eps:x".parse::<BcSelector>().is_err());
    }

    #[test]
    fn boundary_data_respects_membrane_count() {
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let s: BcSelector = "radial-eps:0.1".parse().unwrap();
        assert!(s.boundary_data(d.clone(), 3).is_err());
        let bc = s.boundary_data(d.clone(), 2).unwrap();
        assert_eq!(bc.max_abs(), 0.1);
        let h: BcSelector = "halfspace-profile:10".parse().unwrap();
        assert!(h.boundary_data(d, 4).is_ok());
    }

    #[test]
    fn display_roundtrip() {
        for s in ["example46-iv:30", "radial-eps:0.05", "layered:0:0.125", "constant-ordered:1,0"] {
            let sel: BcSelector = s.parse().unwrap();
            assert_eq!(sel.to_string().parse::<BcSelector>().unwrap(), sel);
        }
    }
}
