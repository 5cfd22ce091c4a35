use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{Field, GridSpec};
use crate::error::{Error, Result};

/// Samples `u(r_j)` of a radial function in `dim` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 4 {
            return Err(Error::InvalidInput(
                "profile needs at least four (r, u) pairs".into(),
            ));
        }
        if radii[0] != 0.0 {
            return Err(Error::InvalidInput("profile radii must start at 0".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "profile radii must increase strictly".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("profile sample".into()));
        }
        Ok(RadialProfile { dim, radii, values })
    }

    /// Sample `f` at `n` equally spaced radii on `[0, r_max]`.
    pub fn from_fn(dim: usize, r_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let radii: Vec<f64> = (0..n).map(|j| r_max * j as f64 / (n - 1) as f64).collect();
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(dim, radii, values)
    }

    /// Local cubic interpolation; radii past the last sample evaluate to zero.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r > self.radii[n - 1] {
            return 0.0;
        }
        let j = match self.radii.binary_search_by(|p| p.partial_cmp(&r).unwrap()) {
            Ok(j) => return self.values[j],
            Err(j) => j - 1,
        };
        let start = j.saturating_sub(1).min(n - 4);
        let xs = &self.radii[start..start + 4];
        let ys = &self.values[start..start + 4];
        let mut s = 0.0;
        for i in 0..4 {
            let mut w = 1.0;
            for l in 0..4 {
                if l != i {
                    w *= (r - xs[l]) / (xs[i] - xs[l]);
                }
            }
            s += w * ys[i];
        }
        s
    }
}

/// Sample a radial profile on the lattice about the origin.
///
/// Fails when the profile stops short of the box corner while its last sample is not negligible,
/// since the embedded field would then be truncated inside the box.
pub fn radial_embed(p: &RadialProfile, grid: GridSpec) -> Result<Field> {
    if p.dim != grid.dim {
        return Err(Error::InvalidInput(format!(
            "profile dimension {} on a {}-D grid",
            p.dim, grid.dim
        )));
    }
    let corner = grid.half_width * (grid.dim as f64).sqrt();
    let last = *p.radii.last().unwrap();
    let scale = p.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if last < corner && p.values.last().unwrap().abs() > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "profile support ends at r = {last} with non-negligible value, box corner at {corner}"
        )));
    }
    Ok(Field::from_fn(grid, |x| {
        p.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }))
}

/// Read a radial profile off the lattice: samples at `r = j h` along the `2N` coordinate
/// half-axes, averaged.
pub fn radial_extract(u: &Field) -> RadialProfile {
    let g = *u.grid();
    let o = g.origin_index();
    let count = g.points / 2;
    let mut radii = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    let mut idx = [o; 3];
    for j in 0..count {
        let mut s = 0.0;
        for a in 0..g.dim {
            for sign in [1i64, -1] {
                idx[..g.dim].fill(o);
                idx[a] = ((o as i64 + sign * j as i64).rem_euclid(g.points as i64)) as usize;
                s += u.values()[g.ravel(&idx)];
            }
        }
        radii.push(j as f64 * g.spacing());
        values.push(s / (2 * g.dim) as f64);
    }
    RadialProfile {
        dim: g.dim,
        radii,
        values,
    }
}

/// CSV with header `r,u`.
pub fn write_profile_csv(p: &RadialProfile, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(["r", "u"])
        .map_err(|e| Error::Io(e.into()))?;
    for (r, v) in p.radii.iter().zip(&p.values) {
        w.write_record([format!("{r:e}"), format!("{v:e}")])
            .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv(path: &Path, dim: usize) -> Result<RadialProfile> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Io(e.into()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad CSV field {i} in {rec:?}")))
        };
        radii.push(parse(0)?);
        values.push(parse(1)?);
    }
    RadialProfile::new(dim, radii, values)
}
