//! Quantum Ito algebra of the fundamental differentials `dΛ^β_α`.
//!
//! Indices run over `0 … d`. `dΛ^i_0 = dA_i` (annihilation), `dΛ^0_i = dA_i†`
//! (creation), `dΛ^i_j` (conservation) and `dΛ^0_0 = dt`. Products follow
//!
//! ```text
//! dΛ^β_α · dΛ^ε_γ = δ̂^β_γ dΛ^ε_α,    δ̂^β_γ = δ^β_γ unless β = 0 or γ = 0 (then 0).
//! ```
//!
//! A differential `E^α_β dΛ^β_α` stores `E^α_β` under the key `(α, β)`, so
//! the product of `E` and `F` has coefficients `G^α_ε = Σ_{k≥1} E^α_k F^k_ε`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{hermiticity_defect, ComplexMatrix};

/// Coefficient ring of an [`ItoDifferential`]. Multiplication need not commute.
pub trait Coefficient: Clone + PartialEq {
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// Whether `self` and `other` live in the same space.
    fn compatible(&self, _other: &Self) -> bool {
        true
    }
}

impl Coefficient for ComplexMatrix {
    fn is_zero(&self) -> bool {
        self.iter().all(|x| *x == Complex64::new(0.0, 0.0))
    }

    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn mul(&self, other: &Self) -> Self {
        self * other
    }

    fn compatible(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.is_square()
    }
}

/// Monomial: sorted `(atom, power)` pairs.
type Monomial = Vec<(String, u32)>;

/// Commutative polynomial with real coefficients over named atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(Vec::new(), c);
        }
        Self { terms }
    }

    pub fn atom(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(name.to_string(), 1)], 1.0);
        Self { terms }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), v * c))
                .filter(|(_, v)| *v != 0.0)
                .collect(),
        }
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    /// Largest coefficient of `self − other` in absolute value.
    pub fn distance(&self, other: &Self) -> f64 {
        self.add(&other.scale(-1.0)).terms.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn merge(a: &Monomial, b: &Monomial) -> Monomial {
        let mut out: BTreeMap<String, u32> = a.iter().cloned().collect();
        for (name, p) in b {
            *out.entry(name.clone()).or_insert(0) += p;
        }
        out.into_iter().collect()
    }
}

impl Coefficient for Poly {
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, v) in &other.terms {
            *terms.entry(m.clone()).or_insert(0.0) += v;
        }
        terms.retain(|_, v| *v != 0.0);
        Self { terms }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, va) in &self.terms {
            for (mb, vb) in &other.terms {
                *terms.entry(Self::merge(ma, mb)).or_insert(0.0) += va * vb;
            }
        }
        terms.retain(|_, v| *v != 0.0);
        Self { terms }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (mono, c)) in self.terms.iter().enumerate() {
            let mut c = *c;
            if idx > 0 {
                if c < 0.0 {
                    write!(f, " - ")?;
                    c = -c;
                } else {
                    write!(f, " + ")?;
                }
            }
            let mut first = true;
            if mono.is_empty() || c != 1.0 {
                if c == -1.0 && !mono.is_empty() {
                    write!(f, "-")?;
                } else {
                    write!(f, "{c}")?;
                    first = false;
                }
            }
            for (name, p) in mono {
                if !first {
                    write!(f, "·")?;
                }
                first = false;
                if *p == 1 {
                    write!(f, "{name}")?;
                } else {
                    write!(f, "{name}^{p}")?;
                }
            }
        }
        Ok(())
    }
}

/// `Σ E^α_β dΛ^β_α` with `E^α_β` stored under `(α, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoDifferential<C> {
    d: usize,
    terms: BTreeMap<(usize, usize), C>,
}

impl<C: Coefficient> ItoDifferential<C> {
    pub fn zero(d: usize) -> Self {
        Self { d, terms: BTreeMap::new() }
    }

    /// `c · dΛ^β_α`.
    pub fn term(d: usize, alpha: usize, beta: usize, c: C) -> Result<Self> {
        if alpha > d || beta > d {
            return Err(invalid(format!("index ({alpha}, {beta}) out of range for d = {d}")));
        }
        let mut out = Self::zero(d);
        if !c.is_zero() {
            out.terms.insert((alpha, beta), c);
        }
        Ok(out)
    }

    /// `c · dA_i = c · dΛ^i_0`.
    pub fn annihilation(d: usize, i: usize, c: C) -> Result<Self> {
        Self::colour(d, i)?;
        Self::term(d, 0, i, c)
    }

    /// `c · dA_i† = c · dΛ^0_i`.
    pub fn creation(d: usize, i: usize, c: C) -> Result<Self> {
        Self::colour(d, i)?;
        Self::term(d, i, 0, c)
    }

    /// `c · dΛ^i_j`.
    pub fn conservation(d: usize, i: usize, j: usize, c: C) -> Result<Self> {
        Self::colour(d, i)?;
        Self::colour(d, j)?;
        Self::term(d, j, i, c)
    }

    /// `c · dt = c · dΛ^0_0`.
    pub fn time(d: usize, c: C) -> Self {
        let mut out = Self::zero(d);
        if !c.is_zero() {
            out.terms.insert((0, 0), c);
        }
        out
    }

    fn colour(d: usize, i: usize) -> Result<()> {
        if i == 0 || i > d {
            Err(invalid(format!("noise colour {i} outside 1..={d}")))
        } else {
            Ok(())
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `E^α_β`, the coefficient of `dΛ^β_α`.
    pub fn coefficient(&self, alpha: usize, beta: usize) -> Option<&C> {
        self.terms.get(&(alpha, beta))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &C)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(shape(format!("noise dimensions {} and {} differ", self.d, other.d)));
        }
        let mut coeffs = self.terms.values().chain(other.terms.values());
        if let Some(first) = coeffs.next() {
            if coeffs.any(|c| !first.compatible(c)) {
                return Err(shape("coefficients live in different spaces"));
            }
        }
        Ok(())
    }

    fn insert_add(terms: &mut BTreeMap<(usize, usize), C>, key: (usize, usize), c: C) {
        match terms.remove(&key) {
            Some(old) => {
                let sum = old.add(&c);
                if !sum.is_zero() {
                    terms.insert(key, sum);
                }
            }
            None => {
                if !c.is_zero() {
                    terms.insert(key, c);
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            Self::insert_add(&mut terms, *k, c.clone());
        }
        Ok(Self { d: self.d, terms })
    }

    /// `c · dX`.
    pub fn left_mul(&self, c: &C) -> Self {
        self.map(|e| c.mul(e))
    }

    /// `dX · c` (coefficients commute with the differentials).
    pub fn right_mul(&self, c: &C) -> Self {
        self.map(|e| e.mul(c))
    }

    fn map(&self, f: impl Fn(&C) -> C) -> Self {
        Self {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (*k, f(c)))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        }
    }
}

/// `dX · dY` under the quantum Ito table.
pub fn ito_product<C: Coefficient>(x: &ItoDifferential<C>, y: &ItoDifferential<C>) -> Result<ItoDifferential<C>> {
    x.check_compatible(y)?;
    let mut terms = BTreeMap::new();
    for (&(alpha, k), e) in &x.terms {
        if k == 0 {
            continue;
        }
        for (&(k2, eps), f) in y.terms.range((k, 0)..=(k, x.d)) {
            debug_assert_eq!(k, k2);
            ItoDifferential::insert_add(&mut terms, (alpha, eps), e.mul(f));
        }
    }
    Ok(ItoDifferential { d: x.d, terms })
}

/// `d(XY) = X dY + (dX) Y + dX dY` for processes with current values `x`, `y`.
pub fn leibniz<C: Coefficient>(
    x: &C,
    dx: &ItoDifferential<C>,
    y: &C,
    dy: &ItoDifferential<C>,
) -> Result<ItoDifferential<C>> {
    dy.left_mul(x).add(&dx.right_mul(y))?.add(&ito_product(dx, dy)?)
}

fn differential_name(d: usize, alpha: usize, beta: usize) -> String {
    let _ = d;
    match (alpha, beta) {
        (0, 0) => "dt".into(),
        (0, i) => format!("dA_{i}"),
        (i, 0) => format!("dA†_{i}"),
        (j, i) => format!("dΛ^{i}_{j}"),
    }
}

impl<C: Coefficient + fmt::Display> fmt::Display for ItoDifferential<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (&(alpha, beta), c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c}) {}", differential_name(self.d, alpha, beta))?;
        }
        Ok(())
    }
}

fn unit() -> Poly {
    Poly::constant(1.0)
}

/// `dQ_i = dA_i + dA_i†`.
pub fn quadrature_differential(d: usize, i: usize) -> Result<ItoDifferential<Poly>> {
    ItoDifferential::annihilation(d, i, unit())?.add(&ItoDifferential::creation(d, i, unit())?)
}

/// `dN_i = s(dA_i + dA_i†) + dΛ^i_i + s² dt` with `s = √λ_i`.
pub fn poisson_differential(d: usize, i: usize, sqrt_lambda: &Poly) -> Result<ItoDifferential<Poly>> {
    quadrature_differential(d, i)?
        .left_mul(sqrt_lambda)
        .add(&ItoDifferential::conservation(d, i, i, unit())?)?
        .add(&ItoDifferential::time(d, sqrt_lambda.mul(sqrt_lambda)))
}

/// All products `dQ_i dQ_j`, `1 ≤ i, j ≤ d`.
pub fn quadrature_table(d: usize) -> Result<Vec<Vec<ItoDifferential<Poly>>>> {
    if d == 0 {
        return Err(invalid("noise dimension must be at least 1"));
    }
    let dq = (1..=d).map(|i| quadrature_differential(d, i)).collect::<Result<Vec<_>>>()?;
    dq.iter()
        .map(|x| dq.iter().map(|y| ito_product(x, y)).collect())
        .collect()
}

/// Whether `dQ_i dQ_j = δ_ij dt` for all pairs.
pub fn quadrature_table_holds(d: usize) -> Result<bool> {
    let table = quadrature_table(d)?;
    Ok(table.iter().enumerate().all(|(i, row)| {
        row.iter().enumerate().all(|(j, p)| {
            if i == j {
                *p == ItoDifferential::time(d, unit())
            } else {
                p.is_zero()
            }
        })
    }))
}

/// `dN_i dN_j` and the expected `δ_ij dN_j` for two Poisson colours
/// (colours `i ≠ j` are embedded in `d = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonProduct {
    pub product: ItoDifferential<Poly>,
    pub expected: ItoDifferential<Poly>,
}

impl PoissonProduct {
    pub fn defect(&self) -> f64 {
        let keys: Vec<_> = self.product.terms().chain(self.expected.terms()).map(|(k, _)| *k).collect();
        let zero = Poly::zero();
        keys.iter()
            .map(|&(a, b)| {
                let p = self.product.coefficient(a, b).unwrap_or(&zero);
                let e = self.expected.coefficient(a, b).unwrap_or(&zero);
                p.distance(e)
            })
            .fold(0.0, f64::max)
    }
}

pub fn poisson_table(i: usize, j: usize, lambda_i: f64, lambda_j: f64) -> Result<PoissonProduct> {
    if !(lambda_i > 0.0 && lambda_j > 0.0) {
        return Err(invalid("Poisson intensities must be positive"));
    }
    let (d, ci, cj) = if i == j { (1, 1, 1) } else { (2, 1, 2) };
    if i == j && lambda_i != lambda_j {
        return Err(invalid("one colour cannot carry two intensities"));
    }
    let dni = poisson_with_intensity(d, ci, lambda_i)?;
    let dnj = poisson_with_intensity(d, cj, lambda_j)?;
    let product = ito_product(&dni, &dnj)?;
    let expected = if i == j { dnj } else { ItoDifferential::zero(d) };
    Ok(PoissonProduct { product, expected })
}

fn poisson_with_intensity(d: usize, i: usize, lambda: f64) -> Result<ItoDifferential<Poly>> {
    quadrature_differential(d, i)?
        .left_mul(&Poly::constant(lambda.sqrt()))
        .add(&ItoDifferential::conservation(d, i, i, unit())?)?
        .add(&ItoDifferential::time(d, Poly::constant(lambda)))
}

/// Multiplication table of classical differentials, row = left factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTable {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<String>>,
}

impl ClassicalTable {
    fn build(basis: Vec<(String, ItoDifferential<Poly>)>) -> Result<Self> {
        let mut entries = Vec::with_capacity(basis.len());
        for (_, x) in &basis {
            let mut row = Vec::with_capacity(basis.len());
            for (_, y) in &basis {
                let p = ito_product(x, y)?;
                let name = if p.is_zero() {
                    "0".to_string()
                } else if let Some((label, _)) = basis.iter().find(|(_, b)| *b == p) {
                    label.clone()
                } else {
                    p.to_string()
                };
                row.push(name);
            }
            entries.push(row);
        }
        Ok(Self { labels: basis.into_iter().map(|(l, _)| l).collect(), entries })
    }

    /// Brownian table in `d` colours: `dQ_1 … dQ_d, dt`.
    pub fn brownian(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("noise dimension must be at least 1"));
        }
        let mut basis = (1..=d)
            .map(|i| Ok((format!("dQ_{i}"), quadrature_differential(d, i)?)))
            .collect::<Result<Vec<_>>>()?;
        basis.push(("dt".into(), ItoDifferential::time(d, unit())));
        Self::build(basis)
    }

    /// Single-colour Poisson table with symbolic intensity `s² = λ`.
    pub fn poisson() -> Result<Self> {
        let s = Poly::atom("√λ");
        Self::build(vec![
            ("dN".into(), poisson_differential(1, 1, &s)?),
            ("dt".into(), ItoDifferential::time(1, unit())),
        ])
    }
}

impl fmt::Display for ClassicalTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .labels
            .iter()
            .chain(self.entries.iter().flatten())
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(1);
        let pad = |s: &str| {
            let n = s.chars().count();
            let mut out = String::from(s);
            out.extend(core::iter::repeat(' ').take(width - n));
            out
        };
        write!(f, "{} |", pad(""))?;
        for l in &self.labels {
            write!(f, " {}", pad(l))?;
        }
        writeln!(f)?;
        writeln!(f, "{}", "-".repeat((width + 1) * (self.labels.len() + 1) + 1))?;
        for (label, row) in self.labels.iter().zip(&self.entries) {
            write!(f, "{} |", pad(label))?;
            for e in row {
                write!(f, " {}", pad(e))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// `L^α_β` on a system of dimension `m` with `d` noise colours.
#[derive(Debug, Clone, PartialEq)]
pub struct HPCoefficients {
    d: usize,
    m: usize,
    l: Vec<Vec<ComplexMatrix>>,
}

/// Largest entries of the two unitarity conditions over all `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitarityReport {
    pub holds: bool,
    pub isometry_defect: f64,
    pub coisometry_defect: f64,
}

impl HPCoefficients {
    /// `l[α][β] = L^α_β`, a `(d+1) × (d+1)` grid of `m × m` matrices.
    pub fn new(l: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let d1 = l.len();
        if d1 == 0 || l.iter().any(|row| row.len() != d1) {
            return Err(shape("coefficient grid must be square and nonempty"));
        }
        let m = l[0][0].nrows();
        if l.iter().flatten().any(|x| x.shape() != (m, m)) {
            return Err(shape("coefficients must all be square of the same size"));
        }
        Ok(Self { d: d1 - 1, m, l })
    }

    /// Only `L^0_0 = −iH`.
    pub fn schrodinger(h: &ComplexMatrix, d: usize) -> Result<Self> {
        let m = h.nrows();
        let mut l = vec![vec![ComplexMatrix::zeros(m, m); d + 1]; d + 1];
        l[0][0] = h * Complex64::new(0.0, -1.0);
        Self::new(l)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn system_dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, alpha: usize, beta: usize) -> &ComplexMatrix {
        &self.l[alpha][beta]
    }

    /// `Σ L^α_β dΛ^β_α`, the differential of the cocycle.
    pub fn differential(&self) -> ItoDifferential<ComplexMatrix> {
        let mut out = ItoDifferential::zero(self.d);
        for a in 0..=self.d {
            for b in 0..=self.d {
                if !self.l[a][b].is_zero() {
                    out.terms.insert((a, b), self.l[a][b].clone());
                }
            }
        }
        out
    }

    /// Adjoint differential: coefficient of `dΛ^β_α` is `(L^β_α)†`.
    pub fn adjoint_differential(&self) -> ItoDifferential<ComplexMatrix> {
        let mut out = ItoDifferential::zero(self.d);
        for a in 0..=self.d {
            for b in 0..=self.d {
                if !self.l[b][a].is_zero() {
                    out.terms.insert((a, b), self.l[b][a].adjoint());
                }
            }
        }
        out
    }
}

/// Checks `L^α_β + (L^β_α)† + Σ_i (L^i_α)† L^i_β = 0` and
/// `L^α_β + (L^β_α)† + Σ_i L^α_i (L^β_i)† = 0` for all `α, β`.
pub fn unitarity_check(coeffs: &HPCoefficients, tol: f64) -> UnitarityReport {
    let d = coeffs.d;
    let mut iso = 0.0_f64;
    let mut coiso = 0.0_f64;
    for a in 0..=d {
        for b in 0..=d {
            let base = coeffs.get(a, b) + coeffs.get(b, a).adjoint();
            let mut c1 = base.clone();
            let mut c2 = base;
            for i in 1..=d {
                c1 += coeffs.get(i, a).adjoint() * coeffs.get(i, b);
                c2 += coeffs.get(a, i) * coeffs.get(b, i).adjoint();
            }
            iso = iso.max(c1.camax());
            coiso = coiso.max(c2.camax());
        }
    }
    UnitarityReport { holds: iso <= tol && coiso <= tol, isometry_defect: iso, coisometry_defect: coiso }
}

/// Tolerance on the unitarity of `S` and the Hermiticity of `H`.
pub const HP_INPUT_TOL: f64 = 1e-10;

fn block(s: &ComplexMatrix, m: usize, i: usize, j: usize) -> ComplexMatrix {
    s.view((i * m, j * m), (m, m)).into_owned()
}

fn check_hp_inputs(s: &ComplexMatrix, l: &[ComplexMatrix], h: &ComplexMatrix) -> Result<(usize, usize)> {
    let m = h.nrows();
    let d = l.len();
    if !h.is_square() || m == 0 {
        return Err(shape("Hamiltonian must be square and nonempty"));
    }
    if s.shape() != (d * m, d * m) {
        return Err(shape(format!("scattering matrix must be {0}x{0}", d * m)));
    }
    if l.iter().any(|x| x.shape() != (m, m)) {
        return Err(shape(format!("Lindblad operators must be {m}x{m}")));
    }
    let hd = hermiticity_defect(h);
    if hd > HP_INPUT_TOL {
        return Err(Error::NotHermitian { defect: hd });
    }
    if d > 0 {
        let defect = (s.adjoint() * s - ComplexMatrix::identity(d * m, d * m)).camax();
        if defect > HP_INPUT_TOL {
            return Err(Error::NotUnitary { defect });
        }
    }
    Ok((d, m))
}

/// Fills `L^α_β` from a scattering matrix `S` (block `(i, j)` of size `m`
/// is `S^{i+1}_{j+1}`), Lindblad operators `L_1 … L_d` and a Hamiltonian.
pub fn hp_coefficients(s: &ComplexMatrix, l: &[ComplexMatrix], h: &ComplexMatrix) -> Result<HPCoefficients> {
    let (d, m) = check_hp_inputs(s, l, h)?;
    let id = ComplexMatrix::identity(m, m);
    let mut grid = vec![vec![ComplexMatrix::zeros(m, m); d + 1]; d + 1];
    for i in 1..=d {
        for j in 1..=d {
            grid[i][j] = block(s, m, i - 1, j - 1);
            if i == j {
                grid[i][j] -= &id;
            }
        }
        grid[i][0] = l[i - 1].clone();
    }
    for j in 1..=d {
        let mut acc = ComplexMatrix::zeros(m, m);
        for k in 1..=d {
            acc -= l[k - 1].adjoint() * block(s, m, k - 1, j - 1);
        }
        grid[0][j] = acc;
    }
    let mut l00 = h * Complex64::new(0.0, -1.0);
    for lk in l {
        l00 -= lk.adjoint() * lk * Complex64::new(0.5, 0.0);
    }
    grid[0][0] = l00;
    HPCoefficients::new(grid)
}

/// `θ^α_β(X)` for all `α, β`, indexed `[α][β]`.
pub fn flow_generator(
    s: &ComplexMatrix,
    l: &[ComplexMatrix],
    h: &ComplexMatrix,
    x: &ComplexMatrix,
) -> Result<Vec<Vec<ComplexMatrix>>> {
    let (d, m) = check_hp_inputs(s, l, h)?;
    if x.shape() != (m, m) {
        return Err(shape(format!("observable must be {m}x{m}")));
    }
    let sb = |k: usize, j: usize| block(s, m, k - 1, j - 1);
    let mut out = vec![vec![ComplexMatrix::zeros(m, m); d + 1]; d + 1];
    for i in 1..=d {
        for j in 1..=d {
            let mut acc = ComplexMatrix::zeros(m, m);
            for k in 1..=d {
                acc += sb(k, i).adjoint() * x * sb(k, j);
            }
            if i == j {
                acc -= x;
            }
            out[i][j] = acc;
        }
        let mut acc = ComplexMatrix::zeros(m, m);
        for k in 1..=d {
            acc += sb(k, i).adjoint() * (x * &l[k - 1] - &l[k - 1] * x);
        }
        out[i][0] = acc;
    }
    for j in 1..=d {
        let mut acc = ComplexMatrix::zeros(m, m);
        for k in 1..=d {
            let ld = l[k - 1].adjoint();
            acc += (&ld * x - x * &ld) * sb(k, j);
        }
        out[0][j] = acc;
    }
    out[0][0] = lindbladian_adjoint(l, h, x);
    Ok(out)
}

/// `i[H, X] − ½Σ(L†LX + XL†L − 2L†XL)`.
pub fn lindbladian_adjoint(l: &[ComplexMatrix], h: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let mut out = (h * x - x * h) * Complex64::i();
    for lk in l {
        let ld = lk.adjoint();
        let ldl = &ld * lk;
        out -= (&ldl * x + x * &ldl - &ld * x * lk * Complex64::new(2.0, 0.0)) * Complex64::new(0.5, 0.0);
    }
    out
}

/// `θ^α_β(X)` obtained by running `d(U†XU) = dU†·X + X·dU + dU†·X·dU`
/// through the Ito engine.
pub fn flow_generator_ito(coeffs: &HPCoefficients, x: &ComplexMatrix) -> Result<Vec<Vec<ComplexMatrix>>> {
    let m = coeffs.system_dim();
    if x.shape() != (m, m) {
        return Err(shape(format!("observable must be {m}x{m}")));
    }
    let du = coeffs.differential();
    let dud = coeffs.adjoint_differential();
    let left = dud.right_mul(x);
    let total = left.add(&du.left_mul(x))?.add(&ito_product(&left, &du)?)?;
    let d = coeffs.d();
    let mut out = vec![vec![ComplexMatrix::zeros(m, m); d + 1]; d + 1];
    for (&(a, b), c) in total.terms() {
        out[a][b] = c.clone();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> Poly {
        Poly::constant(1.0)
    }

    #[test]
    fn annihilation_creation() {
        let a = ItoDifferential::annihilation(1, 1, p1()).unwrap();
        let ad = ItoDifferential::creation(1, 1, p1()).unwrap();
        assert_eq!(ito_product(&a, &ad).unwrap(), ItoDifferential::time(1, p1()));
        assert!(ito_product(&ad, &a).unwrap().is_zero());
        let dt = ItoDifferential::time(1, p1());
        for x in [&a, &ad, &dt] {
            assert!(ito_product(&dt, x).unwrap().is_zero());
            assert!(ito_product(x, &dt).unwrap().is_zero());
        }
    }

    #[test]
    fn conservation_rules() {
        // dΛ^i_j dΛ^k_l = δ^i_l dΛ^k_j
        let d = 2;
        for (i, j, k, l) in [(1, 2, 2, 1), (1, 2, 1, 2), (2, 2, 1, 2)] {
            let x = ItoDifferential::conservation(d, i, j, p1()).unwrap();
            let y = ItoDifferential::conservation(d, k, l, p1()).unwrap();
            let got = ito_product(&x, &y).unwrap();
            if i == l {
                assert_eq!(got, ItoDifferential::conservation(d, k, j, p1()).unwrap());
            } else {
                assert!(got.is_zero());
            }
        }
        let a = ItoDifferential::annihilation(d, 1, p1()).unwrap();
        let lam = ItoDifferential::conservation(d, 1, 2, p1()).unwrap();
        // dA_1 dΛ^1_2 = dΛ^1_0 dΛ^1_2: no contraction since 1 ≠ 2
        assert!(ito_product(&a, &lam).unwrap().is_zero());
        let lam21 = ItoDifferential::conservation(d, 2, 1, p1()).unwrap();
        assert_eq!(ito_product(&a, &lam21).unwrap(), ItoDifferential::annihilation(d, 2, p1()).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let a = ItoDifferential::annihilation(1, 1, p1()).unwrap();
        let b = ItoDifferential::annihilation(2, 1, p1()).unwrap();
        assert!(ito_product(&a, &b).is_err());
        let m1 = ItoDifferential::time(1, ComplexMatrix::identity(2, 2));
        let m2 = ItoDifferential::time(1, ComplexMatrix::identity(3, 3));
        assert!(ito_product(&m1, &m2).is_err());
        assert!(ItoDifferential::annihilation(1, 2, p1()).is_err());
        assert!(ItoDifferential::creation(1, 0, p1()).is_err());
    }

    #[test]
    fn brownian_and_poisson() {
        for d in 1..=4 {
            assert!(quadrature_table_holds(d).unwrap());
        }
        let same = poisson_table(1, 1, 2.5, 2.5).unwrap();
        assert!(same.defect() < 1e-14);
        let other = poisson_table(1, 2, 2.5, 0.3).unwrap();
        assert!(other.product.is_zero());
        assert!(poisson_table(1, 1, -1.0, -1.0).is_err());
    }

    #[test]
    fn classical_tables() {
        let t = ClassicalTable::brownian(2).unwrap();
        assert_eq!(t.entries, vec![vec!["dt", "0", "0"], vec!["0", "dt", "0"], vec!["0", "0", "0"]]);
        let p = ClassicalTable::poisson().unwrap();
        assert_eq!(p.entries, vec![vec!["dN", "0"], vec!["0", "0"]]);
        assert!(p.to_string().contains("dN"));
    }

    #[test]
    fn poly_arithmetic() {
        let s = Poly::atom("s");
        let sq = s.mul(&s);
        assert_eq!(sq.to_string(), "s^2");
        assert_eq!(s.add(&s.scale(-1.0)), Poly::zero());
        assert_eq!(Poly::constant(2.0).add(&s).to_string(), "2 + s");
    }

    #[test]
    fn schrodinger_is_unitary() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5),
            Complex64::new(0.0, -0.5), Complex64::new(-0.3, 0.0),
        ]);
        assert!(unitarity_check(&HPCoefficients::schrodinger(&h, 1).unwrap(), 1e-12).holds);
        let mut l = vec![vec![ComplexMatrix::zeros(2, 2); 2]; 2];
        l[0][0] = ComplexMatrix::identity(2, 2);
        assert!(!unitarity_check(&HPCoefficients::new(l).unwrap(), 1e-12).holds);
    }

    #[test]
    fn trivial_hp_coefficients() {
        let h = ComplexMatrix::identity(2, 2) * Complex64::new(0.7, 0.0);
        let c = hp_coefficients(&ComplexMatrix::identity(2, 2), &[ComplexMatrix::zeros(2, 2)], &h).unwrap();
        assert_eq!(c.get(0, 0), &(&h * Complex64::new(0.0, -1.0)));
        assert!(c.get(1, 1).is_zero() && c.get(1, 0).is_zero() && c.get(0, 1).is_zero());
        let bad = ComplexMatrix::identity(2, 2) * Complex64::new(2.0, 0.0);
        assert!(matches!(hp_coefficients(&bad, &[ComplexMatrix::zeros(2, 2)], &h), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn heisenberg_limit() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.2, 0.0), Complex64::new(1.0, 1.0),
            Complex64::new(1.0, -1.0), Complex64::new(0.0, 0.0),
        ]);
        let x = ComplexMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 3.0),
        ]);
        let th = flow_generator(&ComplexMatrix::identity(2, 2), &[ComplexMatrix::zeros(2, 2)], &h, &x).unwrap();
        let want = (&h * &x - &x * &h) * Complex64::i();
        assert!((&th[0][0] - want).camax() < 1e-15);
        assert!(th[1][1].camax() < 1e-15);
    }

    #[test]
    fn poisson_leibniz() {
        // d(N²) = 2N dN + dN for a Poisson process N
        let s = Poly::atom("s");
        let dn = poisson_differential(1, 1, &s).unwrap();
        let n = Poly::atom("N");
        let got = leibniz(&n, &dn, &n, &dn).unwrap();
        let want = dn.left_mul(&n.scale(2.0).add(&p1()));
        assert_eq!(got, want);
    }
}
