//! Stack CSV files (`x,y,class,u_1,...,u_N`) and their JSON header.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_domain, DomainShape, GridDomain, MembraneStack, NodeClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackHeader {
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub h: f64,
    pub shape: DomainShape,
    #[serde(rename = "N")]
    pub n_membranes: usize,
    pub forcing: Vec<f64>,
}

impl StackHeader {
    pub fn new(domain: &GridDomain, n_membranes: usize, forcing: &[f64]) -> Self {
        Self {
            n: domain.n(),
            radius: domain.radius(),
            h: domain.h(),
            shape: domain.shape(),
            n_membranes,
            forcing: forcing.to_vec(),
        }
    }

    pub fn domain(&self) -> Result<Arc<GridDomain>> {
        build_domain(self.n, self.radius, self.shape)
    }
}

/// CSV text with one row per node; values keep 17 significant digits.
pub fn stack_to_csv(stack: &MembraneStack) -> String {
    let d = stack.domain();
    let mut out = String::with_capacity(d.len() * (24 * (stack.len() + 2) + 10));
    out.push_str("x,y,class");
    for j in 1..=stack.len() {
        out.push_str(&format!(",u_{j}"));
    }
    out.push('\n');
    for k in 0..d.len() {
        let (x, y) = d.coords_of(k);
        out.push_str(&format!("{x:.16e},{y:.16e},{}", d.class(k).as_str()));
        for f in stack.fields() {
            out.push_str(&format!(",{:.16e}", f.values()[k]));
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text written by [`stack_to_csv`] onto the header's lattice.
pub fn stack_from_csv(text: &str, header: &StackHeader) -> Result<MembraneStack> {
    let d = header.domain()?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty stack file".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols.len() < 5 || cols[..3] != ["x", "y", "class"] {
        return Err(Error::Parse(format!("unexpected header '{head}'")));
    }
    let m = cols.len() - 3;
    if m != header.n_membranes {
        return Err(Error::Parse(format!("{m} membrane columns, header says {}", header.n_membranes)));
    }
    let mut values = vec![vec![0.0; d.len()]; m];
    let mut k = 0;
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if k >= d.len() {
            return Err(Error::Parse("more rows than grid nodes".into()));
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != m + 3 {
            return Err(Error::Parse(format!("row {}: expected {} fields", row + 2, m + 3)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", row + 2)));
        let (x, y) = (num(parts[0])?, num(parts[1])?);
        let (gx, gy) = d.coords_of(k);
        if (x - gx).abs() > 1e-9 * d.h() || (y - gy).abs() > 1e-9 * d.h() {
            return Err(Error::Parse(format!("row {}: node coordinates do not match the grid", row + 2)));
        }
        let class = parse_class(parts[2])?;
        if class != d.class(k) {
            return Err(Error::Parse(format!("row {}: node class does not match the grid", row + 2)));
        }
        for j in 0..m {
            values[j][k] = num(parts[3 + j])?;
        }
        k += 1;
    }
    if k != d.len() {
        return Err(Error::Parse(format!("{k} rows for {} grid nodes", d.len())));
    }
    MembraneStack::new_unchecked(d, values)
}

fn parse_class(s: &str) -> Result<NodeClass> {
    match s {
        "interior" => Ok(NodeClass::Interior),
        "boundary" => Ok(NodeClass::Boundary),
        "exterior" => Ok(NodeClass::Exterior),
        other => Err(Error::Parse(format!("unknown node class '{other}'"))),
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_stack(dir: &Path, stem: &str, stack: &MembraneStack, forcing: &[f64]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let header = StackHeader::new(stack.domain(), stack.len(), forcing);
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header)? + "\n")?;
    let mut f = fs::File::create(dir.join(format!("{stem}.csv")))?;
    f.write_all(stack_to_csv(stack).as_bytes())?;
    Ok(())
}

pub fn read_stack(dir: &Path, stem: &str) -> Result<(StackHeader, MembraneStack)> {
    let header: StackHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let stack = stack_from_csv(&fs::read_to_string(dir.join(format!("{stem}.csv")))?, &header)?;
    Ok((header, stack))
}
