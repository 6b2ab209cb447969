//! The coefficient ring: Laurent polynomials in a root `x = L^{1/r}` of the
//! Lefschetz class, with exact rational coefficients, plus its image
//! `Q[x]/(x^r - q)` under the counting specialisation.
//!
//! Every class the pipeline manipulates (orbit decompositions, Möbius
//! coefficients, Kapranov coefficients, normalisation factors) lives in this
//! subring, where equality is decidable and the virtual-dimension filtration
//! is read off the exponents.

use crate::error::{Error, Result};
use crate::{rat_int, Rat};
use num::{BigInt, One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

fn gcd_u32(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd_u32(b, a % b)
    }
}

pub fn lcm_u32(a: u32, b: u32) -> u32 {
    a / gcd_u32(a, b) * b
}

/// An element of the specialised Grothendieck ring: a finite Laurent series
/// in `L^{1/root}` with exact rational coefficients.
///
/// The representation is canonical: no zero coefficient is stored and the
/// root order is minimal, so `==` is structural equality of classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MotClass {
    root: u32,
    /// exponent k (meaning `L^{k/root}`) -> coefficient
    terms: BTreeMap<i64, Rat>,
}

impl MotClass {
    fn canonical(root: u32, mut terms: BTreeMap<i64, Rat>) -> Self {
        terms.retain(|_, c| !c.is_zero());
        if terms.is_empty() {
            return MotClass {
                root: 1,
                terms,
            };
        }
        let mut g = root;
        for k in terms.keys() {
            g = gcd_u32(g, k.unsigned_abs().min(u64::from(u32::MAX)) as u32);
            if g == 1 {
                break;
            }
        }
        if g > 1 {
            let terms = terms
                .into_iter()
                .map(|(k, c)| (k / i64::from(g), c))
                .collect();
            MotClass {
                root: root / g,
                terms,
            }
        } else {
            MotClass { root, terms }
        }
    }

    pub fn zero() -> Self {
        MotClass {
            root: 1,
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::from_rat(Rat::one())
    }

    pub fn from_rat(c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(0, c);
        }
        MotClass { root: 1, terms }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rat(rat_int(n))
    }

    /// The Lefschetz class `L`.
    pub fn lefschetz() -> Self {
        Self::monomial(Rat::one(), 1, 1)
    }

    /// The monomial `c * L^{k/root}`.
    pub fn monomial(c: Rat, k: i64, root: u32) -> Self {
        assert!(root >= 1);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(k, c);
        }
        Self::canonical(root, terms)
    }

    /// The monomial `L^s` for a rational exponent `s` whose denominator must
    /// divide `root`.
    pub fn lefschetz_power(s: &Rat, root: u32) -> Result<Self> {
        if root == 0 {
            return Err(Error::IncompatibleRoot(s.to_string(), root));
        }
        let den = s.denom();
        let r = BigInt::from(root);
        if (&r % den) != BigInt::zero() {
            return Err(Error::IncompatibleRoot(s.to_string(), root));
        }
        let k = s.numer() * (&r / den);
        let k: i64 = k.try_into().map_err(|_| Error::IncompatibleRoot(s.to_string(), root))?;
        Ok(Self::monomial(Rat::one(), k, root))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&0).map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn root_order(&self) -> u32 {
        self.root
    }

    /// Iterate over `(exponent of L, coefficient)` pairs as exact rationals.
    pub fn terms(&self) -> impl Iterator<Item = (Rat, &Rat)> + '_ {
        self.terms
            .iter()
            .map(|(k, c)| (Rat::new(BigInt::from(*k), BigInt::from(self.root)), c))
    }

    /// Coefficient of `L^s`, zero if absent.
    pub fn coeff_at(&self, s: &Rat) -> Rat {
        let den = s.denom();
        let r = BigInt::from(self.root);
        if (&r % den) != BigInt::zero() {
            return Rat::zero();
        }
        let k = s.numer() * (&r / den);
        match i64::try_from(k) {
            Ok(k) => self.terms.get(&k).cloned().unwrap_or_else(Rat::zero),
            Err(_) => Rat::zero(),
        }
    }

    /// True when the class is a single monomial `c * L^{k/r}` with `c != 0`.
    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// Inverse of a monomial; `None` for anything else (including zero).
    pub fn try_inv(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let (k, c) = self.terms.iter().next().unwrap();
        Some(Self::monomial(Rat::one() / c, -k, self.root))
    }

    fn rescaled_terms(&self, root: u32) -> BTreeMap<i64, Rat> {
        debug_assert!(root % self.root == 0);
        let f = i64::from(root / self.root);
        self.terms.iter().map(|(k, c)| (k * f, c.clone())).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let root = lcm_u32(self.root, other.root);
        let mut terms = self.rescaled_terms(root);
        for (k, c) in other.rescaled_terms(root) {
            let entry = terms.entry(k).or_insert_with(Rat::zero);
            *entry += c;
        }
        Self::canonical(root, terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        MotClass {
            root: self.root,
            terms: self.terms.iter().map(|(k, c)| (*k, -c.clone())).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let root = lcm_u32(self.root, other.root);
        let a = self.rescaled_terms(root);
        let b = other.rescaled_terms(root);
        let mut terms: BTreeMap<i64, Rat> = BTreeMap::new();
        for (ka, ca) in &a {
            for (kb, cb) in &b {
                let entry = terms.entry(ka + kb).or_insert_with(Rat::zero);
                *entry += ca * cb;
            }
        }
        Self::canonical(root, terms)
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        MotClass {
            root: self.root,
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Virtual dimension: max over nonzero terms of `k/root`; `None` encodes
    /// dimension `-oo` of the zero class.
    pub fn virtual_dimension(&self) -> Option<Rat> {
        self.terms
            .keys()
            .next_back()
            .map(|k| Rat::new(BigInt::from(*k), BigInt::from(self.root)))
    }

    /// Drop every term strictly below the dimension threshold `-m`.
    pub fn truncate_filtration(&self, m: &Rat) -> Self {
        let threshold = -m;
        let terms = self
            .terms
            .iter()
            .filter(|(k, _)| Rat::new(BigInt::from(**k), BigInt::from(self.root)) >= threshold)
            .map(|(k, c)| (*k, c.clone()))
            .collect();
        Self::canonical(self.root, terms)
    }

    /// Substitute `L -> L^e`. Used for the degree-`e` local factors of Euler
    /// products.
    pub fn stretch_lefschetz(&self, e: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| (k * i64::from(e), c.clone()))
            .collect();
        Self::canonical(self.root, terms)
    }

    /// True when all exponents of `L` are integers.
    pub fn has_integral_exponents(&self) -> bool {
        self.root == 1
    }

    /// True when all coefficients are integers.
    pub fn has_integral_coeffs(&self) -> bool {
        self.terms.values().all(|c| c.denom().is_one())
    }

    /// Counting specialisation `L -> q` (so `x -> q^{1/r}` stays symbolic).
    pub fn count_specialize(&self, q: u64) -> AlgNumber {
        let root = self.root;
        let mut out = AlgNumber::zero(q, root);
        for (k, c) in &self.terms {
            out = out.add(&AlgNumber::x_power(q, root, *k).scale(c));
        }
        out
    }

    /// Specialise and demand a plain rational (all exponents integral).
    pub fn specialize_rat(&self, q: u64) -> Result<Rat> {
        self.count_specialize(q)
            .as_rational()
            .ok_or(Error::FractionalExponent)
    }

    /// Parse the textual rendering produced by `Display`.
    pub fn parse(input: &str) -> Result<Self> {
        parse_motclass(input)
    }
}

impl fmt::Display for MotClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let power = if *k == 0 {
                None
            } else {
                let e = Rat::new(BigInt::from(*k), BigInt::from(self.root));
                Some(if e.denom().is_one() {
                    if e.is_one() {
                        "L".to_string()
                    } else {
                        format!("L^{}", e)
                    }
                } else {
                    format!("L^({})", e)
                })
            };
            match power {
                None => write!(f, "{}", mag)?,
                Some(p) => {
                    if mag.is_one() {
                        write!(f, "{}", p)?;
                    } else {
                        write!(f, "{}·{}", mag, p)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::ParseClass(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(Rat::new(n, d))
    } else {
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Rat::from_integer(n))
    }
}

fn parse_motclass(input: &str) -> Result<MotClass> {
    let cleaned = input.trim();
    if cleaned.is_empty() {
        return Err(Error::ParseClass(input.to_string()));
    }
    // Split into signed terms at top level.
    let mut terms: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut sign = false;
    let mut depth = 0usize;
    let mut chars = cleaned.chars().peekable();
    let mut expect_term = true;
    while let Some(ch) = chars.next() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
                expect_term = false;
            }
            ')' => {
                depth = depth.checked_sub(1).ok_or_else(|| Error::ParseClass(input.to_string()))?;
                cur.push(ch);
                expect_term = false;
            }
            '+' | '-' | '−' if depth == 0 && !expect_term => {
                terms.push((sign, std::mem::take(&mut cur)));
                sign = ch != '+';
                expect_term = true;
            }
            '-' | '−' if depth == 0 && expect_term && cur.trim().is_empty() => {
                sign = !sign;
            }
            '+' if depth == 0 => {
                return Err(Error::ParseClass(input.to_string()));
            }
            '^' => {
                cur.push(ch);
                // a leading '-' right after '^' belongs to the exponent
                if let Some('-') | Some('−') = chars.peek() {
                    chars.next();
                    cur.push('-');
                }
                expect_term = false;
            }
            c if c.is_whitespace() => {}
            _ => {
                cur.push(ch);
                expect_term = false;
            }
        }
    }
    if depth != 0 {
        return Err(Error::ParseClass(input.to_string()));
    }
    terms.push((sign, cur));

    let mut acc = MotClass::zero();
    for (neg, body) in terms {
        let body = body.trim();
        if body.is_empty() {
            return Err(Error::ParseClass(input.to_string()));
        }
        // body is  coeff | coeff·L(^exp)? | L(^exp)?
        let (coeff_str, l_part) = match body.find('L') {
            None => (body, None),
            Some(pos) => {
                let (c, l) = body.split_at(pos);
                let c = c.trim().trim_end_matches(['·', '*']).trim();
                (c, Some(l))
            }
        };
        let coeff = if coeff_str.is_empty() {
            Rat::one()
        } else {
            parse_rat(coeff_str)?
        };
        let coeff = if neg { -coeff } else { coeff };
        let term = match l_part {
            None => MotClass::from_rat(coeff),
            Some(l) => {
                let rest = &l[1..];
                let exp = if rest.is_empty() {
                    Rat::one()
                } else {
                    let rest = rest
                        .strip_prefix('^')
                        .ok_or_else(|| Error::ParseClass(input.to_string()))?;
                    let rest = rest.trim();
                    let rest = rest
                        .strip_prefix('(')
                        .and_then(|r| r.strip_suffix(')'))
                        .unwrap_or(rest);
                    parse_rat(rest)?
                };
                let root: u32 = exp
                    .denom()
                    .try_into()
                    .map_err(|_| Error::ParseClass(input.to_string()))?;
                let k: i64 = exp
                    .numer()
                    .try_into()
                    .map_err(|_| Error::ParseClass(input.to_string()))?;
                MotClass::monomial(coeff, k, root)
            }
        };
        acc = acc.add(&term);
    }
    Ok(acc)
}

/// An element of `Q[x]/(x^root - q)`: the image of [`MotClass`] under the
/// counting measure `L -> q`, with `x = L^{1/root}` kept symbolic even when
/// `x^root = q` happens to have a rational root.
#[derive(Clone, Debug)]
pub struct AlgNumber {
    q: u64,
    root: u32,
    /// coefficients of 1, x, ..., x^{root-1}
    coeffs: Vec<Rat>,
}

impl AlgNumber {
    pub fn zero(q: u64, root: u32) -> Self {
        assert!(root >= 1);
        AlgNumber {
            q,
            root,
            coeffs: vec![Rat::zero(); root as usize],
        }
    }

    pub fn from_rat(q: u64, root: u32, c: Rat) -> Self {
        let mut out = Self::zero(q, root);
        out.coeffs[0] = c;
        out
    }

    /// `x^k` for any integer `k`, reduced via `x^root = q`.
    pub fn x_power(q: u64, root: u32, k: i64) -> Self {
        let r = i64::from(root);
        let rem = k.rem_euclid(r);
        let quo = (k - rem) / r;
        let mut out = Self::zero(q, root);
        let qpow = if quo >= 0 {
            Rat::from_integer(BigInt::from(q).pow(quo as u32))
        } else {
            Rat::one() / Rat::from_integer(BigInt::from(q).pow((-quo) as u32))
        };
        out.coeffs[rem as usize] = qpow;
        out
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn root_order(&self) -> u32 {
        self.root
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// The element as a plain rational if it has no x-part.
    pub fn as_rational(&self) -> Option<Rat> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    fn rescaled(&self, root: u32) -> Self {
        debug_assert!(root % self.root == 0);
        let f = (root / self.root) as usize;
        let mut out = Self::zero(self.q, root);
        for (j, c) in self.coeffs.iter().enumerate() {
            out.coeffs[j * f] = c.clone();
        }
        out
    }

    fn merged(a: &Self, b: &Self) -> (Self, Self) {
        assert_eq!(a.q, b.q, "cannot mix specialisations at different q");
        let root = lcm_u32(a.root, b.root);
        (a.rescaled(root), b.rescaled(root))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (mut a, b) = Self::merged(self, other);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x += y;
        }
        a
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        AlgNumber {
            q: self.q,
            root: self.root,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = Self::merged(self, other);
        let r = a.root as usize;
        let qr = Rat::from_integer(BigInt::from(a.q));
        let mut out = Self::zero(a.q, a.root);
        for (i, ci) in a.coeffs.iter().enumerate() {
            if ci.is_zero() {
                continue;
            }
            for (j, cj) in b.coeffs.iter().enumerate() {
                if cj.is_zero() {
                    continue;
                }
                let k = i + j;
                let prod = ci * cj;
                if k < r {
                    out.coeffs[k] += prod;
                } else {
                    out.coeffs[k - r] += prod * &qr;
                }
            }
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Self {
        AlgNumber {
            q: self.q,
            root: self.root,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::from_rat(self.q, self.root, Rat::one());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiplicative inverse via the extended Euclidean algorithm in
    /// `Q[x]` modulo `x^root - q`.
    pub fn try_inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NotInvertible(self.root, self.q));
        }
        // modulus m = x^root - q
        let mut m = vec![Rat::zero(); self.root as usize + 1];
        m[0] = -Rat::from_integer(BigInt::from(self.q));
        m[self.root as usize] = Rat::one();
        let a = trim_poly(self.coeffs.clone());
        let (g, u) = poly_ext_gcd(&a, &m);
        if g.len() != 1 {
            return Err(Error::NotInvertible(self.root, self.q));
        }
        // a*u ≡ g (mod m), so inverse = u / g[0], reduced mod m.
        let inv_g = Rat::one() / &g[0];
        let (_, u) = poly_divmod(&u, &m);
        let mut coeffs = vec![Rat::zero(); self.root as usize];
        for (i, c) in u.iter().enumerate() {
            if i < coeffs.len() {
                coeffs[i] = c * &inv_g;
            }
        }
        Ok(AlgNumber {
            q: self.q,
            root: self.root,
            coeffs,
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        let (a, b) = Self::merged(self, other);
        Ok(a.mul(&b.try_inv()?))
    }

    /// Numeric value with `x = q^{1/root}` as a float; for logarithms and
    /// report diagnostics only, never for equality decisions.
    pub fn to_f64(&self) -> f64 {
        let x = (self.q as f64).powf(1.0 / f64::from(self.root));
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            let cf = rat_to_f64(c);
            acc += cf * x.powi(j as i32);
        }
        acc
    }
}

impl PartialEq for AlgNumber {
    fn eq(&self, other: &Self) -> bool {
        if self.q != other.q {
            return false;
        }
        let (a, b) = Self::merged(self, other);
        a.coeffs == b.coeffs
    }
}

impl Eq for AlgNumber {}

impl fmt::Display for AlgNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match j {
                0 => write!(f, "{}", mag)?,
                1 if mag.is_one() => write!(f, "x")?,
                1 => write!(f, "{}·x", mag)?,
                _ if mag.is_one() => write!(f, "x^{}", j)?,
                _ => write!(f, "{}·x^{}", mag, j)?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

pub fn rat_to_f64(c: &Rat) -> f64 {
    // num's to_f64 on BigRational can overflow for huge numerators; do it via
    // a scaled division which is fine at the magnitudes reports use.
    let n = c.numer();
    let d = c.denom();
    match (n.to_string().parse::<f64>(), d.to_string().parse::<f64>()) {
        (Ok(a), Ok(b)) if b != 0.0 => a / b,
        _ => f64::NAN,
    }
}

fn trim_poly(mut p: Vec<Rat>) -> Vec<Rat> {
    while p.len() > 1 && p.last().map(|c| c.is_zero()).unwrap_or(false) {
        p.pop();
    }
    p
}

fn poly_is_zero(p: &[Rat]) -> bool {
    p.iter().all(|c| c.is_zero())
}

/// Extended gcd in Q[x]: returns (g, u) with a*u ≡ g modulo m and g the gcd.
fn poly_ext_gcd(a: &[Rat], m: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let mut r0 = m.to_vec();
    let mut r1 = trim_poly(a.to_vec());
    let mut s0 = vec![Rat::zero()];
    let mut s1 = vec![Rat::one()];
    while !poly_is_zero(&r1) {
        let (quo, rem) = poly_divmod(&r0, &r1);
        let s2 = poly_sub(&s0, &poly_mul(&quo, &s1));
        r0 = r1;
        r1 = rem;
        s0 = s1;
        s1 = s2;
    }
    (trim_poly(r0), trim_poly(s0))
}

fn poly_divmod(a: &[Rat], b: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let b = trim_poly(b.to_vec());
    let mut rem = trim_poly(a.to_vec());
    let db = b.len() - 1;
    let lead = b.last().unwrap().clone();
    if poly_is_zero(&rem) || rem.len() - 1 < db {
        return (vec![Rat::zero()], rem);
    }
    let mut quo = vec![Rat::zero(); rem.len() - db];
    while !poly_is_zero(&rem) && rem.len() - 1 >= db {
        let da = rem.len() - 1;
        let c = rem.last().unwrap() / &lead;
        quo[da - db] = c.clone();
        for i in 0..=db {
            let v = &b[i] * &c;
            rem[da - db + i] -= v;
        }
        rem = trim_poly(rem);
        if rem.len() == 1 && rem[0].is_zero() {
            break;
        }
    }
    (trim_poly(quo), rem)
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim_poly(out)
}

fn poly_sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] -= y;
    }
    trim_poly(out)
}

/// Ring arithmetic entry point mirroring the operation table.
pub fn mot_arith(a: &MotClass, b: &MotClass, op: ArithOp) -> MotClass {
    match op {
        ArithOp::Add => a.add(b),
        ArithOp::Sub => a.sub(b),
        ArithOp::Mul => a.mul(b),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}
