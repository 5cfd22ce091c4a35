use serde::{Deserialize, Serialize};

/// One term `a |t|^(beta - 2) t` of a sum-of-powers nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exponent: f64,
}

/// `f(t) = sum_i a_i |t|^(beta_i - 2) t` with terms kept in increasing exponent order.
///
/// An empty term list is the zero nonlinearity, used for linear test models.
#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    terms: Vec<PowerTerm>,
}

impl Nonlinearity {
    pub fn new(mut terms: Vec<PowerTerm>) -> Self {
        terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        Nonlinearity { terms }
    }

    /// `f(t) = |t|^2 t`.
    pub fn cubic() -> Self {
        Self::pure_power(4.0)
    }

    /// `f(t) = |t|^(p - 2) t`.
    pub fn pure_power(p: f64) -> Self {
        Self::new(vec![PowerTerm {
            coeff: 1.0,
            exponent: p,
        }])
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == 0.0)
    }

    /// Coefficient and exponent when the family is a single power.
    pub fn single_power(&self) -> Option<(f64, f64)> {
        match self.terms.as_slice() {
            [t] => Some((t.coeff, t.exponent)),
            _ => None,
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        let a = t.abs();
        self.terms
            .iter()
            .map(|p| p.coeff * a.powf(p.exponent - 2.0) * t)
            .sum()
    }

    /// Primitive `F(t) = sum_i a_i |t|^beta_i / beta_i`.
    pub fn primitive(&self, t: f64) -> f64 {
        let a = t.abs();
        self.terms
            .iter()
            .map(|p| p.coeff * a.powf(p.exponent) / p.exponent)
            .sum()
    }

    pub fn fprime(&self, t: f64) -> f64 {
        let a = t.abs();
        self.terms
            .iter()
            .map(|p| p.coeff * (p.exponent - 1.0) * a.powf(p.exponent - 2.0))
            .sum()
    }

    /// Ambrosetti-Rabinowitz constant, the smallest exponent.
    pub fn mu(&self) -> f64 {
        self.terms.first().map_or(f64::NAN, |t| t.exponent)
    }

    /// Smallest and largest exponents, the growth bounds on `f'`.
    pub fn growth_exponents(&self) -> (f64, f64) {
        match (self.terms.first(), self.terms.last()) {
            (Some(a), Some(b)) => (a.exponent, b.exponent),
            _ => (f64::NAN, f64::NAN),
        }
    }

    /// Hoelder exponent of `f'` near zero; equals the smallest exponent for this family.
    pub fn holder_exponent(&self) -> f64 {
        self.mu()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let f = Nonlinearity::cubic();
        assert_eq!(f.f(2.0), 8.0);
        assert_eq!(f.primitive(2.0), 4.0);
        assert_eq!(f.fprime(2.0), 12.0);
        assert_eq!(f.f(-2.0), -8.0);
    }

    #[test]
    fn vanishes_at_zero() {
        let f = Nonlinearity::new(vec![
            PowerTerm {
                coeff: 0.5,
                exponent: 3.0,
            },
            PowerTerm {
                coeff: 2.0,
                exponent: 5.5,
            },
        ]);
        assert_eq!(f.f(0.0), 0.0);
        assert_eq!(f.primitive(0.0), 0.0);
        assert_eq!(f.fprime(0.0), 0.0);
    }

    #[test]
    fn two_term_values() {
        let f = Nonlinearity::new(vec![
            PowerTerm {
                coeff: 1.0,
                exponent: 4.0,
            },
            PowerTerm {
                coeff: 1.0,
                exponent: 3.0,
            },
        ]);
        assert_eq!(f.f(1.0), 2.0);
        assert!((f.primitive(1.0) - (1.0 / 3.0 + 0.25)).abs() < 1e-15);
        assert_eq!(f.mu(), 3.0);
        assert_eq!(f.growth_exponents(), (3.0, 4.0));
    }

    #[test]
    fn derivatives_match_differences() {
        let f = Nonlinearity::new(vec![
            PowerTerm {
                coeff: 1.0,
                exponent: 3.0,
            },
            PowerTerm {
                coeff: 0.3,
                exponent: 4.5,
            },
        ]);
        for &t in &[-1.7, -0.4, 0.3, 1.1, 2.5] {
            let s = 1e-5;
            let df = (f.primitive(t + s) - f.primitive(t - s)) / (2.0 * s);
            let dfp = (f.f(t + s) - f.f(t - s)) / (2.0 * s);
            assert!((df - f.f(t)).abs() < 1e-8 * (1.0 + f.f(t).abs()));
            assert!((dfp - f.fprime(t)).abs() < 1e-7 * (1.0 + f.fprime(t).abs()));
        }
    }
}
