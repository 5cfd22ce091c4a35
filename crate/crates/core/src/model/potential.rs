use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coeff * x^powers` with one power per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(x)
            .fold(self.coeff, |acc, (&p, &xi)| acc * xi.powi(p as i32))
    }
}

/// Sparse polynomial in `N` variables.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.powers.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "monomial has {} powers in dimension {dim}",
                    t.powers.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite("monomial coefficient".into()));
            }
        }
        Ok(Polynomial { dim, terms }.simplified())
    }

    /// `|x|^degree` for even `degree`, expanded into monomials.
    pub fn isotropic(dim: usize, degree: u32) -> Result<Self> {
        if degree % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "isotropic degree {degree} must be even"
            )));
        }
        let mut p = Polynomial {
            dim,
            terms: vec![Monomial {
                coeff: 1.0,
                powers: vec![0; dim],
            }],
        };
        let square = Polynomial {
            dim,
            terms: (0..dim)
                .map(|a| {
                    let mut powers = vec![0; dim];
                    powers[a] = 2;
                    Monomial { coeff: 1.0, powers }
                })
                .collect(),
        };
        for _ in 0..degree / 2 {
            p = p.product(&square);
        }
        Ok(p)
    }

    fn product(&self, other: &Polynomial) -> Polynomial {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let powers = a.powers.iter().zip(&b.powers).map(|(x, y)| x + y).collect();
                terms.push(Monomial {
                    coeff: a.coeff * b.coeff,
                    powers,
                });
            }
        }
        Polynomial {
            dim: self.dim,
            terms,
        }
        .simplified()
    }

    /// Merge equal multi-indices and drop zero coefficients; terms sorted by multi-index.
    fn simplified(mut self) -> Self {
        self.terms.sort_by(|a, b| a.powers.cmp(&b.powers));
        let mut out: Vec<Monomial> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            match out.last_mut() {
                Some(last) if last.powers == t.powers => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff != 0.0);
        Polynomial {
            dim: self.dim,
            terms: out,
        }
    }

    pub fn scaled(&self, s: f64) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|t| Monomial {
                coeff: t.coeff * s,
                powers: t.powers.clone(),
            })
            .collect();
        Polynomial {
            dim: self.dim,
            terms,
        }
        .simplified()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn partial(&self, axis: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers.clone();
                powers[axis] -= 1;
                Monomial {
                    coeff: t.coeff * t.powers[axis] as f64,
                    powers,
                }
            })
            .collect();
        Polynomial {
            dim: self.dim,
            terms,
        }
        .simplified()
    }

    /// Exact Laplacian, term by term.
    pub fn laplacian(&self) -> Polynomial {
        let mut terms = Vec::new();
        for a in 0..self.dim {
            terms.extend(self.partial(a).partial(a).terms);
        }
        Polynomial {
            dim: self.dim,
            terms,
        }
        .simplified()
    }

    /// Common degree of all terms, if homogeneous.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let d = self.terms.first()?.degree();
        self.terms.iter().all(|t| t.degree() == d).then_some(d)
    }
}

/// One remainder term `coeff * x^powers * exp(-|x|^2 / width^2)`; no width means no envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemainderTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl RemainderTerm {
    fn envelope(&self, r2: f64) -> f64 {
        self.width.map_or(1.0, |w| (-r2 / (w * w)).exp())
    }
}

/// `V(x) = Q(x) * g(x) + sum of remainder terms`, where `Q` is the homogeneous leading part and
/// `g` an optional Gaussian cap `exp(-|x|^2 / w^2)` that keeps `V` bounded.
///
/// The cap changes `V` only at order `deg Q + 2` near the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    leading: Polynomial,
    degree: u32,
    cap_width: Option<f64>,
    remainder: Vec<RemainderTerm>,
    leading_grad: Vec<Polynomial>,
    leading_laplacian: Polynomial,
}

impl Potential {
    pub fn new(
        leading: Polynomial,
        degree: u32,
        cap_width: Option<f64>,
        remainder: Vec<RemainderTerm>,
    ) -> Result<Self> {
        let dim = leading.dim;
        if let Some(w) = cap_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "cap width {w} must be positive"
                )));
            }
        }
        for t in &remainder {
            if t.powers.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "remainder term has {} powers in dimension {dim}",
                    t.powers.len()
                )));
            }
            if let Some(w) = t.width {
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "remainder width {w} must be positive"
                    )));
                }
            }
        }
        let leading_grad = (0..dim).map(|a| leading.partial(a)).collect();
        let leading_laplacian = leading.laplacian();
        Ok(Potential {
            leading,
            degree,
            cap_width,
            remainder,
            leading_grad,
            leading_laplacian,
        })
    }

    /// `V = |x|^degree` exactly.
    pub fn isotropic(dim: usize, degree: u32) -> Result<Self> {
        Self::new(
            Polynomial::isotropic(dim, degree)?,
            degree,
            None,
            Vec::new(),
        )
    }

    pub fn dim(&self) -> usize {
        self.leading.dim
    }

    pub fn leading(&self) -> &Polynomial {
        &self.leading
    }

    /// Declared order of the leading part.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn cap_width(&self) -> Option<f64> {
        self.cap_width
    }

    pub fn remainder(&self) -> &[RemainderTerm] {
        &self.remainder
    }

    /// Same potential with the leading part multiplied by `s`.
    pub fn with_leading_scaled(&self, s: f64) -> Potential {
        Potential::new(
            self.leading.scaled(s),
            self.degree,
            self.cap_width,
            self.remainder.clone(),
        )
        .expect("scaling keeps a valid potential")
    }

    pub fn leading_laplacian(&self) -> &Polynomial {
        &self.leading_laplacian
    }

    /// Sign of the Laplacian of the leading part at `x` (0 when it vanishes there).
    pub fn laplacian_sign_at(&self, x: &[f64]) -> f64 {
        let v = self.leading_laplacian.eval(x);
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    fn cap(&self, r2: f64) -> f64 {
        self.cap_width.map_or(1.0, |w| (-r2 / (w * w)).exp())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x = &x[..self.dim()];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mut v = self.leading.eval(x) * self.cap(r2);
        for t in &self.remainder {
            v += t.coeff * monomial_value(&t.powers, x) * t.envelope(r2);
        }
        v
    }

    /// Exact partial derivative of `V` along `axis`.
    pub fn partial(&self, x: &[f64], axis: usize) -> f64 {
        let x = &x[..self.dim()];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let cap = self.cap(r2);
        let mut d = self.leading_grad[axis].eval(x) * cap;
        if let Some(w) = self.cap_width {
            d -= 2.0 * x[axis] / (w * w) * self.leading.eval(x) * cap;
        }
        for t in &self.remainder {
            let env = t.envelope(r2);
            let p = t.powers[axis];
            if p > 0 {
                let mut powers = t.powers.clone();
                powers[axis] -= 1;
                d += t.coeff * p as f64 * monomial_value(&powers, x) * env;
            }
            if let Some(w) = t.width {
                d -= 2.0 * x[axis] / (w * w) * t.coeff * monomial_value(&t.powers, x) * env;
            }
        }
        d
    }
}

fn monomial_value(powers: &[u32], x: &[f64]) -> f64 {
    powers
        .iter()
        .zip(x)
        .fold(1.0, |acc, (&p, &xi)| acc * xi.powi(p as i32))
}
