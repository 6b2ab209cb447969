//! Truncated multivariate power series in the ray variables `T_i`, over
//! exact coefficient rings.
//!
//! Every series carries the region of multidegrees on which its coefficients
//! are guaranteed exact. Arithmetic shrinks the region to the intersection of
//! the operands; a series with no bound at all is an exact polynomial.
//! Coefficients outside the region are never stored and never reported.

use crate::error::{Error, Result};
use crate::gring::MotClass;
use crate::{rat_int, Rat};
use num::{BigInt, One, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Multidegree, ordered by total degree then lexicographically on the fixed
/// ray order.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MDeg(pub Vec<u32>);

impl MDeg {
    pub fn zero(nvars: usize) -> Self {
        MDeg(vec![0; nvars])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&x| u64::from(x)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        MDeg(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other` when `other <= self` componentwise.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            if b > a {
                return None;
            }
            out.push(a - b);
        }
        Some(MDeg(out))
    }

    pub fn scale(&self, f: u32) -> Self {
        MDeg(self.0.iter().map(|&x| x * f).collect())
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl Ord for MDeg {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MDeg {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MDeg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", x)?;
        }
        write!(f, ")")
    }
}

/// Guaranteed-exact region: an optional per-variable box and an optional
/// total-degree bound. Both absent means the series is an exact polynomial.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Region {
    pub box_bound: Option<Vec<u32>>,
    pub total_bound: Option<u32>,
}

impl Region {
    pub fn unbounded() -> Self {
        Region {
            box_bound: None,
            total_bound: None,
        }
    }

    pub fn total(bound: u32) -> Self {
        Region {
            box_bound: None,
            total_bound: Some(bound),
        }
    }

    pub fn boxed(bound: Vec<u32>) -> Self {
        Region {
            box_bound: Some(bound),
            total_bound: None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.box_bound.is_none() && self.total_bound.is_none()
    }

    pub fn contains(&self, e: &MDeg) -> bool {
        if let Some(b) = &self.box_bound {
            if e.0.iter().zip(b).any(|(x, m)| x > m) {
                return false;
            }
        }
        if let Some(t) = self.total_bound {
            if e.total() > u64::from(t) {
                return false;
            }
        }
        true
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let box_bound = match (&self.box_bound, &other.box_bound) {
            (None, b) => b.clone(),
            (b, None) => b.clone(),
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()),
        };
        let total_bound = match (self.total_bound, other.total_bound) {
            (None, t) => t,
            (t, None) => t,
            (Some(a), Some(b)) => Some(a.min(b)),
        };
        Region {
            box_bound,
            total_bound,
        }
    }

    /// Smallest total degree of a multidegree outside the region, `None` for
    /// the unbounded region.
    pub fn min_omitted_total(&self) -> Option<u64> {
        let from_box = self
            .box_bound
            .as_ref()
            .map(|b| b.iter().map(|&x| u64::from(x) + 1).min().unwrap_or(1));
        let from_total = self.total_bound.map(|t| u64::from(t) + 1);
        match (from_box, from_total) {
            (None, t) => t,
            (b, None) => b,
            (Some(b), Some(t)) => Some(b.min(t)),
        }
    }

    /// All multidegrees in the region, in (total degree, lex) order.
    pub fn enumerate(&self, nvars: usize) -> Vec<MDeg> {
        let max_total: u64 = match (&self.box_bound, self.total_bound) {
            (Some(b), Some(t)) => b
                .iter()
                .map(|&x| u64::from(x))
                .sum::<u64>()
                .min(u64::from(t)),
            (Some(b), None) => b.iter().map(|&x| u64::from(x)).sum(),
            (None, Some(t)) => u64::from(t),
            (None, None) => panic!("cannot enumerate the unbounded region"),
        };
        let mut out = Vec::new();
        let mut cur = vec![0u32; nvars];
        for total in 0..=max_total {
            enumerate_rec(self, nvars, 0, total, &mut cur, &mut out);
        }
        out
    }
}

fn enumerate_rec(
    region: &Region,
    nvars: usize,
    pos: usize,
    remaining: u64,
    cur: &mut Vec<u32>,
    out: &mut Vec<MDeg>,
) {
    if pos == nvars {
        if remaining == 0 {
            out.push(MDeg(cur.clone()));
        }
        return;
    }
    if pos + 1 == nvars {
        // last variable takes everything that is left, if allowed
        let cap = region
            .box_bound
            .as_ref()
            .map(|b| u64::from(b[pos]))
            .unwrap_or(remaining);
        if remaining <= cap {
            cur[pos] = remaining as u32;
            out.push(MDeg(cur.clone()));
            cur[pos] = 0;
        }
        return;
    }
    let cap = region
        .box_bound
        .as_ref()
        .map(|b| u64::from(b[pos]))
        .unwrap_or(remaining)
        .min(remaining);
    for v in 0..=cap {
        cur[pos] = v as u32;
        enumerate_rec(region, nvars, pos + 1, remaining - v, cur, out);
    }
    cur[pos] = 0;
}

/// Coefficient ring abstraction shared by exact rationals and motivic
/// classes.
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn try_inv(&self) -> Option<Self>;
    fn from_int(n: i64) -> Self;
}

impl Coeff for Rat {
    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        <Rat as One>::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn try_inv(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(<Rat as One>::one() / self)
        }
    }
    fn from_int(n: i64) -> Self {
        rat_int(n)
    }
}

impl Coeff for MotClass {
    fn zero() -> Self {
        MotClass::zero()
    }
    fn one() -> Self {
        MotClass::one()
    }
    fn is_zero(&self) -> bool {
        MotClass::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        MotClass::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        MotClass::sub(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        MotClass::mul(self, other)
    }
    fn neg(&self) -> Self {
        MotClass::neg(self)
    }
    fn try_inv(&self) -> Option<Self> {
        MotClass::try_inv(self)
    }
    fn from_int(n: i64) -> Self {
        MotClass::from_int(n)
    }
}

/// Truncated multivariate power series with exact coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct MultiSeries<C: Coeff> {
    nvars: usize,
    region: Region,
    coeffs: BTreeMap<MDeg, C>,
}

impl<C: Coeff> MultiSeries<C> {
    pub fn zero(nvars: usize, region: Region) -> Self {
        MultiSeries {
            nvars,
            region,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize, region: Region) -> Self {
        let mut s = Self::zero(nvars, region);
        s.set(MDeg::zero(nvars), C::one());
        s
    }

    pub fn monomial(nvars: usize, region: Region, e: MDeg, c: C) -> Self {
        let mut s = Self::zero(nvars, region);
        s.set(e, c);
        s
    }

    /// Exact polynomial from explicit terms.
    pub fn polynomial(nvars: usize, terms: Vec<(MDeg, C)>) -> Self {
        let mut s = Self::zero(nvars, Region::unbounded());
        for (e, c) in terms {
            let cur = s.coeff(&e).add(&c);
            s.set(e, cur);
        }
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn is_exact_polynomial(&self) -> bool {
        self.region.is_unbounded()
    }

    pub fn coeff(&self, e: &MDeg) -> C {
        self.coeffs.get(e).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&MDeg::zero(self.nvars))
    }

    pub fn set(&mut self, e: MDeg, c: C) {
        debug_assert_eq!(e.0.len(), self.nvars);
        if !self.region.contains(&e) {
            return;
        }
        if c.is_zero() {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, c);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MDeg, &C)> + '_ {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1
            && self
                .coeffs
                .get(&MDeg::zero(self.nvars))
                .map(|c| *c == C::one())
                .unwrap_or(false)
    }

    pub fn max_total_degree(&self) -> u64 {
        self.coeffs.keys().map(|e| e.total()).max().unwrap_or(0)
    }

    /// Restrict to a (smaller) region, dropping coefficients outside it.
    pub fn truncate_to(&self, region: Region) -> Self {
        let region = self.region.intersect(&region);
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(e, _)| region.contains(e))
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect();
        MultiSeries {
            nvars: self.nvars,
            region,
            coeffs,
        }
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VariableMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let region = self.region.intersect(&other.region);
        let mut out = Self::zero(self.nvars, region);
        for (e, c) in &self.coeffs {
            if out.region.contains(e) {
                out.set(e.clone(), c.clone());
            }
        }
        for (e, c) in &other.coeffs {
            if out.region.contains(e) {
                let cur = out.coeff(e).add(c);
                out.set(e.clone(), cur);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        MultiSeries {
            nvars: self.nvars,
            region: self.region.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (e.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars, self.region.clone());
        }
        MultiSeries {
            nvars: self.nvars,
            region: self.region.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, v)| (e.clone(), v.mul(c)))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let region = self.region.intersect(&other.region);
        let mut out = Self::zero(self.nvars, region);
        // iterate the sparser operand outermost
        let (a, b) = if self.coeffs.len() <= other.coeffs.len() {
            (self, other)
        } else {
            (other, self)
        };
        for (ea, ca) in &a.coeffs {
            for (eb, cb) in &b.coeffs {
                let e = ea.add(eb);
                if !out.region.contains(&e) {
                    continue;
                }
                let cur = out.coeff(&e).add(&ca.mul(cb));
                out.set(e, cur);
            }
        }
        Ok(out)
    }

    /// `self / other`; the constant term of `other` must be a unit and the
    /// intersected region must be bounded.
    pub fn divide(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let region = self.region.intersect(&other.region);
        if region.is_unbounded() {
            return Err(Error::NoTruncation);
        }
        let c0 = other.constant_term();
        let inv = c0
            .try_inv()
            .ok_or_else(|| Error::NonUnitConstant(format!("{}", c0)))?;
        let g_rest: Vec<(&MDeg, &C)> = other
            .coeffs
            .iter()
            .filter(|(e, _)| !e.is_zero() && region.contains(e))
            .collect();
        let mut out = Self::zero(self.nvars, region.clone());
        for e in region.enumerate(self.nvars) {
            let mut acc = self.coeff(&e);
            for (f, gf) in &g_rest {
                if let Some(rest) = e.checked_sub(f) {
                    let h = out.coeff(&rest);
                    if !h.is_zero() {
                        acc = acc.sub(&gf.mul(&h));
                    }
                }
            }
            let val = acc.mul(&inv);
            out.set(e, val);
        }
        Ok(out)
    }

    /// Integer power; negative exponents invert via division by `self`.
    pub fn pow(&self, n: i64) -> Result<Self> {
        if n >= 0 {
            let mut acc = Self::one(self.nvars, self.region.clone());
            for _ in 0..n {
                acc = acc.mul(self)?;
            }
            Ok(acc)
        } else {
            let inv = Self::one(self.nvars, self.region.clone()).divide(self)?;
            inv.pow(-n)
        }
    }

    /// Substitute `T_i -> T_i^f` for every variable, keeping only terms in
    /// `region`.
    pub fn stretch_vars(&self, f: u32, region: Region) -> Self {
        let mut out = Self::zero(self.nvars, region);
        for (e, c) in &self.coeffs {
            let e2 = e.scale(f);
            if out.region.contains(&e2) {
                out.set(e2, c.clone());
            }
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, mut f: impl FnMut(&C) -> D) -> MultiSeries<D> {
        let mut out = MultiSeries::zero(self.nvars, self.region.clone());
        for (e, c) in &self.coeffs {
            out.set(e.clone(), f(c));
        }
        out
    }

    pub fn try_map_coeffs<D: Coeff>(
        &self,
        mut f: impl FnMut(&C) -> Result<D>,
    ) -> Result<MultiSeries<D>> {
        let mut out = MultiSeries::zero(self.nvars, self.region.clone());
        for (e, c) in &self.coeffs {
            out.set(e.clone(), f(c)?);
        }
        Ok(out)
    }

    /// Equality of coefficients on the intersection of regions (and the given
    /// extra region, if any).
    pub fn eq_within(&self, other: &Self, extra: Option<&Region>) -> bool {
        if self.nvars != other.nvars {
            return false;
        }
        let mut region = self.region.intersect(&other.region);
        if let Some(r) = extra {
            region = region.intersect(r);
        }
        for (e, c) in &self.coeffs {
            if region.contains(e) && other.coeff(e) != *c {
                return false;
            }
        }
        for (e, c) in &other.coeffs {
            if region.contains(e) && self.coeff(e) != *c {
                return false;
            }
        }
        true
    }

    /// First multidegree (in the canonical order) where the two series
    /// disagree within the intersected region.
    pub fn first_discrepancy(&self, other: &Self) -> Option<MDeg> {
        let region = self.region.intersect(&other.region);
        let mut keys: Vec<&MDeg> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .find(|e| region.contains(e) && self.coeff(e) != other.coeff(e))
            .cloned()
    }

    /// One line per multidegree, `e := coefficient`, sorted by total degree
    /// then lexicographically, preceded by `#` metadata lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# vars = {}\n", self.nvars));
        match (&self.region.box_bound, self.region.total_bound) {
            (None, None) => out.push_str("# truncation = exact\n"),
            (b, t) => {
                if let Some(t) = t {
                    out.push_str(&format!("# truncation = total:{}\n", t));
                }
                if let Some(b) = b {
                    let parts: Vec<String> = b.iter().map(|x| x.to_string()).collect();
                    out.push_str(&format!("# truncation = box:{}\n", parts.join(",")));
                }
            }
        }
        for (e, c) in &self.coeffs {
            out.push_str(&format!("{} := {}\n", e, c));
        }
        out
    }
}

impl MultiSeries<MotClass> {
    /// Finite-truncation proxy for the limsup convergence test: max over
    /// stored nonzero multidegrees of `vdim(coeff) / <alpha, d>`.
    pub fn convergence_margin(&self, alpha: &[Rat]) -> Result<Rat> {
        let mut margin: Option<Rat> = None;
        for (e, c) in &self.coeffs {
            if e.is_zero() {
                continue;
            }
            let pairing: Rat = e
                .0
                .iter()
                .zip(alpha)
                .map(|(x, a)| a * rat_int(i64::from(*x)))
                .sum();
            if pairing <= rat_int(0) {
                return Err(Error::NonPositivePairing(e.0.clone()));
            }
            if let Some(d) = c.virtual_dimension() {
                let ratio = d / pairing;
                margin = Some(match margin {
                    None => ratio,
                    Some(m) => m.max(ratio),
                });
            }
        }
        Ok(margin.unwrap_or_else(|| rat_int(0)))
    }

    /// Evaluate at `T_i = L^{s_i}`: returns the exact partial value over the
    /// stored region together with a dimension bound for the omitted tail
    /// (`None` = the series is an exact polynomial, no tail).
    ///
    /// `declared_slope` is the caller's certified per-degree dimension slope
    /// mu (with respect to alpha = -s): every coefficient, stored or not, has
    /// `vdim <= mu * <alpha, e>`. The measured margin on stored coefficients
    /// is checked too; the larger of the two drives the tail bound.
    pub fn evaluate_at_powers(
        &self,
        s: &[Rat],
        declared_slope: &Rat,
    ) -> Result<(MotClass, Option<Rat>)> {
        assert_eq!(s.len(), self.nvars);
        let alpha: Vec<Rat> = s.iter().map(|x| -x.clone()).collect();
        let measured = self.convergence_margin(&alpha)?;
        let mu = measured.clone().max(declared_slope.clone());
        if mu >= rat_int(1) && !self.is_exact_polynomial() {
            return Err(Error::Divergent(mu.to_string()));
        }
        let mut value = MotClass::zero();
        for (e, c) in &self.coeffs {
            let exponent: Rat = e
                .0
                .iter()
                .zip(s)
                .map(|(x, si)| si * rat_int(i64::from(*x)))
                .sum();
            let root: u32 = exponent
                .denom()
                .try_into()
                .map_err(|_| Error::FractionalExponent)?;
            let l_pow = MotClass::lefschetz_power(&exponent, root)?;
            value = value.add(&c.mul(&l_pow));
        }
        let tail = match self.region.min_omitted_total() {
            None => None,
            Some(frontier) => {
                let min_alpha = alpha
                    .iter()
                    .cloned()
                    .fold(None::<Rat>, |m, a| Some(m.map_or(a.clone(), |m| m.min(a))))
                    .unwrap_or_else(|| rat_int(0));
                Some((mu - rat_int(1)) * rat_int(frontier as i64) * min_alpha)
            }
        };
        Ok((value, tail))
    }

    /// Specialise every coefficient at `q`; requires integral `L`-exponents.
    pub fn specialize_rat(&self, q: u64) -> Result<MultiSeries<Rat>> {
        self.try_map_coeffs(|c| c.specialize_rat(q))
    }
}

/// Parse the dump format back into a motivic-coefficient series.
pub fn parse_dump(input: &str) -> Result<MultiSeries<MotClass>> {
    let mut nvars: Option<usize> = None;
    let mut box_bound: Option<Vec<u32>> = None;
    let mut total_bound: Option<u32> = None;
    let mut exact = false;
    let mut terms: Vec<(MDeg, MotClass)> = Vec::new();
    let bad = |line: &str| Error::ParseClass(format!("dump line '{}'", line));
    for line in input.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("vars") {
                let v = v.trim_start_matches(['=', ' ']).trim();
                nvars = Some(v.parse().map_err(|_| bad(line))?);
            } else if let Some(v) = rest.strip_prefix("truncation") {
                let v = v.trim_start_matches(['=', ' ']).trim();
                if v == "exact" {
                    exact = true;
                } else if let Some(t) = v.strip_prefix("total:") {
                    total_bound = Some(t.trim().parse().map_err(|_| bad(line))?);
                } else if let Some(b) = v.strip_prefix("box:") {
                    let parts: std::result::Result<Vec<u32>, _> =
                        b.split(',').map(|p| p.trim().parse()).collect();
                    box_bound = Some(parts.map_err(|_| bad(line))?);
                } else {
                    return Err(bad(line));
                }
            }
            continue;
        }
        let (deg, val) = line.split_once(":=").ok_or_else(|| bad(line))?;
        let deg = deg.trim();
        let deg = deg
            .strip_prefix('(')
            .and_then(|d| d.strip_suffix(')'))
            .ok_or_else(|| bad(line))?;
        let parts: std::result::Result<Vec<u32>, _> =
            deg.split(',').map(|p| p.trim().parse()).collect();
        let e = MDeg(parts.map_err(|_| bad(line))?);
        let c = MotClass::parse(val.trim())?;
        terms.push((e, c));
    }
    let nvars = nvars
        .or_else(|| terms.first().map(|(e, _)| e.0.len()))
        .ok_or_else(|| Error::ParseClass("empty dump".into()))?;
    let region = if exact {
        Region::unbounded()
    } else {
        Region {
            box_bound,
            total_bound,
        }
    };
    let mut out = MultiSeries::zero(nvars, region);
    for (e, c) in terms {
        if e.0.len() != nvars {
            return Err(Error::DegreeLength(e.0.len(), nvars));
        }
        out.set(e, c);
    }
    Ok(out)
}

/// One factor `(1 - L^{l_exp} T^{degree})^{-mult}` of a geometric
/// factorisation.
#[derive(Clone, Debug, PartialEq)]
pub struct GeomFactor {
    pub degree: MDeg,
    pub l_exp: Rat,
    pub mult: i64,
}

/// A product of geometric factors reproducing a series within its region.
#[derive(Clone, Debug)]
pub struct GeomFactorisation {
    pub nvars: usize,
    pub factors: Vec<GeomFactor>,
    /// true when the factorisation terminated with residual exactly 1, so it
    /// replays the source as a polynomial identity (not merely within a
    /// truncation region)
    pub exact: bool,
}

impl GeomFactorisation {
    /// Expand the factorisation back into a series on `region`.
    pub fn replay(&self, region: &Region) -> Result<MultiSeries<MotClass>> {
        let mut out = MultiSeries::one(self.nvars, region.clone());
        for f in &self.factors {
            out = mul_binomial_power(&out, &f.degree, &f.l_exp, -f.mult, region)?;
        }
        Ok(out)
    }
}

/// Multiply by `(1 - L^j T^k)^{power}` within `region`.
fn mul_binomial_power(
    s: &MultiSeries<MotClass>,
    k: &MDeg,
    j: &Rat,
    power: i64,
    region: &Region,
) -> Result<MultiSeries<MotClass>> {
    if power == 0 {
        return Ok(s.truncate_to(region.clone()));
    }
    let root: u32 = j
        .denom()
        .try_into()
        .map_err(|_| Error::FractionalExponent)?;
    let l_j = MotClass::lefschetz_power(j, root)?;
    // how many powers of T^k fit in the region
    let mut max_a: u32 = 0;
    {
        let mut acc = k.clone();
        while region.contains(&acc) && max_a <= 10_000 {
            max_a += 1;
            acc = acc.add(k);
        }
    }
    let nvars = s.nvars();
    let mut factor = MultiSeries::zero(nvars, region.clone());
    factor.set(MDeg::zero(nvars), MotClass::one());
    if power > 0 {
        // (1 - u)^n = sum_a (-1)^a C(n, a) u^a
        let n = power as u64;
        let mut binom = BigInt::one();
        let mut upow = MotClass::one();
        for a in 1..=max_a.min(power as u32) {
            binom = binom * BigInt::from(n - u64::from(a) + 1) / BigInt::from(a);
            upow = upow.mul(&l_j);
            let sign = if a % 2 == 1 { -1 } else { 1 };
            let c = upow.scale(&Rat::from_integer(binom.clone() * BigInt::from(sign)));
            factor.set(k.scale(a), c);
        }
    } else {
        // (1 - u)^{-n} = sum_a C(n - 1 + a, a) u^a
        let n = (-power) as u64;
        let mut binom = BigInt::one();
        let mut upow = MotClass::one();
        for a in 1..=u64::from(max_a) {
            binom = binom * BigInt::from(n - 1 + a) / BigInt::from(a);
            upow = upow.mul(&l_j);
            let c = upow.scale(&Rat::from_integer(binom.clone()));
            factor.set(k.scale(a as u32), c);
        }
    }
    s.truncate_to(region.clone()).mul(&factor)
}

/// Exact polynomial division `p / (1 - c T^k)^n`, aborting (returns `None`)
/// if the quotient grows past `cap` in total degree.
fn exact_divide_binomial(
    p: &MultiSeries<MotClass>,
    k: &MDeg,
    c: &MotClass,
    n: u32,
    cap: u64,
) -> Option<MultiSeries<MotClass>> {
    let mut cur = p.clone();
    for _ in 0..n {
        let mut quo = MultiSeries::zero(cur.nvars(), Region::unbounded());
        let mut rem = cur.clone();
        while !rem.is_zero() {
            let (e, ce) = {
                let (e, c) = rem.terms().next().unwrap();
                (e.clone(), c.clone())
            };
            if e.total() > cap {
                return None;
            }
            quo.set(e.clone(), ce.clone());
            // rem -= ce*T^e * (1 - c T^k)
            rem.set(e.clone(), MotClass::zero());
            let carry = e.add(k);
            let cur_c = rem.coeff(&carry).add(&ce.mul(c));
            rem.set(carry, cur_c);
        }
        cur = quo;
    }
    Some(cur)
}

/// Greedy geometric factorisation of a unit-constant series.
///
/// Multidegrees are processed in increasing (total degree, lex) order; at
/// each one the residual coefficient, a Laurent polynomial with integer
/// coefficients, is peeled off monomial by monomial into factors
/// `(1 - L^j T^k)^{-b}`.
///
/// When the input is an exact polynomial the routine first tries to
/// terminate with residual exactly 1; if that succeeds the factorisation is
/// flagged `exact`. Otherwise it falls back to the truncated region (the
/// input's region intersected with `total:bound`).
pub fn geometric_decompose(
    series: &MultiSeries<MotClass>,
    bound: u32,
) -> Result<GeomFactorisation> {
    if !series.constant_term().is_one() {
        return Err(Error::NonUnitConstant(format!(
            "{}",
            series.constant_term()
        )));
    }
    if series.is_exact_polynomial() {
        if let Some(f) = try_exact_decompose(series) {
            return Ok(f);
        }
    }
    let region = series.region().intersect(&Region::total(bound));
    if region.is_unbounded() {
        return Err(Error::NoTruncation);
    }
    let mut residual = series.truncate_to(region.clone());
    let mut factors = Vec::new();
    for e in region.enumerate(series.nvars()) {
        if e.is_zero() {
            continue;
        }
        let c = residual.coeff(&e);
        if c.is_zero() {
            continue;
        }
        for (l_exp, coeff) in c.terms() {
            if !coeff.denom().is_one() {
                return Err(Error::NonIntegerMultiplicity(
                    coeff.to_string(),
                    e.0.clone(),
                ));
            }
            let b: i64 = coeff
                .numer()
                .try_into()
                .map_err(|_| Error::NonIntegerMultiplicity(coeff.to_string(), e.0.clone()))?;
            factors.push(GeomFactor {
                degree: e.clone(),
                l_exp: l_exp.clone(),
                mult: b,
            });
            // divide the factor out: residual *= (1 - L^j T^e)^{b}
            residual = mul_binomial_power(&residual, &e, &l_exp, b, &region)?;
        }
        debug_assert!(residual.coeff(&e).is_zero());
    }
    Ok(GeomFactorisation {
        nvars: series.nvars(),
        factors,
        exact: false,
    })
}

fn try_exact_decompose(series: &MultiSeries<MotClass>) -> Option<GeomFactorisation> {
    let cap = series.max_total_degree() * 2 + 32;
    let mut residual = series.clone();
    let mut factors = Vec::new();
    loop {
        let mut rest = residual.clone();
        rest.set(MDeg::zero(series.nvars()), MotClass::zero());
        if rest.is_zero() {
            break;
        }
        let e = rest.terms().next().map(|(e, _)| e.clone()).unwrap();
        if e.total() > cap || factors.len() > 4096 {
            return None;
        }
        let c = residual.coeff(&e);
        for (l_exp, coeff) in c.terms() {
            if !coeff.denom().is_one() {
                return None;
            }
            let b: i64 = coeff.numer().try_into().ok()?;
            factors.push(GeomFactor {
                degree: e.clone(),
                l_exp: l_exp.clone(),
                mult: b,
            });
            let root: u32 = l_exp.denom().try_into().ok()?;
            let l_j = MotClass::lefschetz_power(&l_exp, root).ok()?;
            if b > 0 {
                // multiply by (1 - L^j T^e)^b, exactly
                let binomial = MultiSeries::polynomial(
                    series.nvars(),
                    vec![
                        (MDeg::zero(series.nvars()), MotClass::one()),
                        (e.clone(), l_j.neg()),
                    ],
                );
                let mut acc = residual;
                for _ in 0..b {
                    acc = acc.mul(&binomial).ok()?;
                }
                residual = acc;
            } else {
                residual = exact_divide_binomial(&residual, &e, &l_j, (-b) as u32, cap)?;
            }
        }
    }
    if residual.is_one() {
        Some(GeomFactorisation {
            nvars: series.nvars(),
            factors,
            exact: true,
        })
    } else {
        None
    }
}
