//! Sparse multivariate polynomials over [`ExactScalar`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scalar::ExactScalar;
use super::space::VariableSpace;
use crate::error::{Error, Result};

/// Dense exponent vector, one entry per variable of the space.
pub type Monomial = Vec<u16>;

pub fn monomial_degree(m: &[u16]) -> u32 {
    m.iter().map(|&e| e as u32).sum()
}

/// Polynomial keyed by exponent vectors. Zero coefficients are never stored,
/// so equal polynomials have identical term maps.
#[derive(Clone)]
pub struct Polynomial {
    space: Arc<VariableSpace>,
    terms: BTreeMap<Monomial, ExactScalar>,
}

pub(crate) fn same_space(a: &Arc<VariableSpace>, b: &Arc<VariableSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl Polynomial {
    pub fn zero(space: &Arc<VariableSpace>) -> Self {
        Self {
            space: space.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: &Arc<VariableSpace>, c: ExactScalar) -> Self {
        let mut p = Self::zero(space);
        if !c.is_zero() {
            p.terms.insert(vec![0; space.len()], c);
        }
        p
    }

    pub fn one(space: &Arc<VariableSpace>) -> Self {
        Self::constant(space, ExactScalar::one())
    }

    /// The coordinate polynomial `x_var`.
    pub fn var(space: &Arc<VariableSpace>, var: usize) -> Self {
        assert!(var < space.len(), "variable index out of range");
        let mut e = vec![0; space.len()];
        e[var] = 1;
        Self::monomial(space, e, ExactScalar::one())
    }

    pub fn monomial(space: &Arc<VariableSpace>, exps: Monomial, coeff: ExactScalar) -> Self {
        assert_eq!(exps.len(), space.len(), "exponent length");
        let mut p = Self::zero(space);
        if !coeff.is_zero() {
            p.terms.insert(exps, coeff);
        }
        p
    }

    /// Builds from arbitrary terms, merging duplicates and dropping zeros.
    pub fn from_terms<I>(space: &Arc<VariableSpace>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, ExactScalar)>,
    {
        let mut p = Self::zero(space);
        for (e, c) in terms {
            if e.len() != space.len() {
                return Err(Error::DimensionMismatch {
                    expected: space.len(),
                    got: e.len(),
                });
            }
            p.add_term(e, &c);
        }
        Ok(p)
    }

    pub(crate) fn add_term(&mut self, e: Monomial, c: &ExactScalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn space(&self) -> &Arc<VariableSpace> {
        &self.space
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, ExactScalar> {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u16]) -> ExactScalar {
        self.terms.get(e).cloned().unwrap_or_default()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| monomial_degree(e)).max()
    }

    /// Highest exponent of `var` appearing in any term.
    pub fn degree_in(&self, var: usize) -> u16 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&x| x == 0))
    }

    /// Variables with a nonzero exponent somewhere.
    pub fn support(&self) -> Vec<usize> {
        (0..self.space.len())
            .filter(|&v| self.terms.keys().any(|e| e[v] > 0))
            .collect()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if same_space(&self.space, &other.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), &-c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = Self::zero(&self.space);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Monomial = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, &(ca * cb));
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &ExactScalar) -> Self {
        if c.is_zero() {
            return Self::zero(&self.space);
        }
        Self {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(e, x)| (e.clone(), x * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(&self.space);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Exact partial derivative with respect to `var`.
    pub fn partial(&self, var: usize) -> Result<Self> {
        if var >= self.space.len() {
            return Err(Error::VariableOutOfRange {
                index: var,
                len: self.space.len(),
            });
        }
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let k = e[var];
            if k == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            out.add_term(d, &(c * &ExactScalar::from_int(k as i64)));
        }
        Ok(out)
    }

    /// Gradient with respect to every coordinate.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.space.len())
            .map(|v| self.partial(v).expect("in range"))
            .collect()
    }

    pub fn eval(&self, point: &[ExactScalar]) -> Result<ExactScalar> {
        if point.len() != self.space.len() {
            return Err(Error::DimensionMismatch {
                expected: self.space.len(),
                got: point.len(),
            });
        }
        // Cache powers per variable; exponents stay small at desk scale.
        let mut powers: Vec<Vec<ExactScalar>> = vec![vec![ExactScalar::one()]; point.len()];
        let mut acc = ExactScalar::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (v, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let pw = &mut powers[v];
                while pw.len() <= k as usize {
                    let next = pw.last().unwrap() * &point[v];
                    pw.push(next);
                }
                term *= &pw[k as usize];
            }
            acc += &term;
        }
        Ok(acc)
    }

    /// Floating-point evaluation; coefficients are rounded once.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.space.len(), "point dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .fold(c.to_f64(), |acc, (v, &k)| acc * point[v].powi(k as i32))
            })
            .sum()
    }

    /// Moves the polynomial into `target`, sending variable `i` to `var_map[i]`.
    pub fn embed(&self, target: &Arc<VariableSpace>, var_map: &[usize]) -> Result<Self> {
        if var_map.len() != self.space.len() {
            return Err(Error::DimensionMismatch {
                expected: self.space.len(),
                got: var_map.len(),
            });
        }
        if let Some(&bad) = var_map.iter().find(|&&v| v >= target.len()) {
            return Err(Error::VariableOutOfRange {
                index: bad,
                len: target.len(),
            });
        }
        let mut out = Self::zero(target);
        for (e, c) in &self.terms {
            let mut d = vec![0u16; target.len()];
            for (i, &k) in e.iter().enumerate() {
                d[var_map[i]] += k;
            }
            out.add_term(d, c);
        }
        Ok(out)
    }

    /// Reinterprets the polynomial over a space with the same number of variables.
    pub fn rehome(&self, target: &Arc<VariableSpace>) -> Result<Self> {
        if target.len() != self.space.len() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            space: target.clone(),
            terms: self.terms.clone(),
        })
    }

    /// Clears denominators, divides by the content and makes the leading
    /// (largest) term positive. Returns the zero polynomial unchanged.
    pub fn primitive(&self) -> Self {
        use num_integer::Integer;
        use num_traits::{One, Signed, Zero};
        if self.is_zero() {
            return self.clone();
        }
        let mut lcm = num_bigint::BigInt::one();
        for c in self.terms.values() {
            lcm = lcm.lcm(c.denom());
        }
        let mut gcd = num_bigint::BigInt::zero();
        for c in self.terms.values() {
            let n = c.numer() * (&lcm / c.denom());
            gcd = gcd.gcd(&n);
        }
        let lead_negative = self.terms.values().next_back().unwrap().is_negative();
        let mut factor = ExactScalar::from_bigints(lcm, gcd.abs()).expect("nonzero content");
        if lead_negative {
            factor = -factor;
        }
        self.scale(&factor)
    }

    /// Canonical re-normalization of every coefficient (idempotent).
    pub fn normalized(&self) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), &c.normalized());
        }
        out
    }

    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            vars: self.space.names().to_vec(),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    coeff: c.clone(),
                    exps: e.clone(),
                })
                .collect(),
        }
    }

    /// Decodes against `space`, whose variable names must match exactly.
    pub fn from_json(json: &PolynomialJson, space: &Arc<VariableSpace>) -> Result<Self> {
        if json.vars.as_slice() != space.names() {
            return Err(Error::SpaceMismatch);
        }
        Self::from_terms(space, json.terms.iter().map(|t| (t.exps.clone(), t.coeff.clone())))
    }
}

/// Wire form: `{ "vars": [...], "terms": [ { "coeff": "p/q", "exps": [...] } ] }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialJson {
    pub vars: Vec<String>,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub coeff: ExactScalar,
    pub exps: Vec<u16>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.terms == other.terms
    }
}

impl Eq for Polynomial {}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().rev().enumerate() {
            let mut body = Vec::new();
            for (v, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => body.push(self.space.name(v).to_string()),
                    _ => body.push(format!("{}^{}", self.space.name(v), k)),
                }
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if body.is_empty() {
                write!(f, "{mag:?}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag:?}*")?;
                }
                write!(f, "{}", body.join("*"))?;
            }
        }
        Ok(())
    }
}

// Operator sugar for same-space arithmetic. Panics on a space mismatch; use
// the `checked_*` methods when operands come from different sources.
impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("space mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_sub(rhs).expect("space mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.checked_mul(rhs).expect("space mismatch")
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&ExactScalar::from_int(-1))
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}
