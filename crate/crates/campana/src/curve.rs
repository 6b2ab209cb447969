//! The source curve, modelled by its genus and zeta numerator.
//!
//! Everything the pipeline needs from the curve is derived from these two
//! pieces of data: point counts over extensions, closed-point counts,
//! section counts in the stable range, the class number `#Pic^0`, and the
//! Kapranov zeta series whose coefficients are the symmetric-power classes.

use crate::error::{Error, Result};
use crate::gring::MotClass;
use crate::mvseries::{MDeg, MultiSeries, Region};
use crate::{rat_int, Rat};
use num::{BigInt, One, Signed, Zero};

/// A curve given by its genus and the numerator `P(T)` of its zeta function,
/// with `P(0) = 1` and `deg P <= 2g`. For genus 0 the numerator is forced to
/// be 1.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveModel {
    genus: u32,
    /// numerator coefficients, index = power of T; `numerator[0] == 1`
    numerator: Vec<MotClass>,
    label: String,
}

impl CurveModel {
    pub fn new(genus: u32, numerator: Vec<MotClass>, label: impl Into<String>) -> Result<Self> {
        let mut numerator = numerator;
        while numerator
            .last()
            .map(|c| c.is_zero())
            .unwrap_or(false)
        {
            numerator.pop();
        }
        if numerator.is_empty() || !numerator[0].is_one() {
            return Err(Error::InvalidCurve(
                "numerator must have constant term 1".into(),
            ));
        }
        if numerator.len() - 1 > 2 * genus as usize {
            return Err(Error::InvalidCurve(format!(
                "numerator degree {} exceeds 2g = {}",
                numerator.len() - 1,
                2 * genus
            )));
        }
        Ok(CurveModel {
            genus,
            numerator,
            label: label.into(),
        })
    }

    /// Named presets: `p1` and `elliptic:q2a2` (genus 1, `1 + 2T + 2T^2`,
    /// matching a curve with 5 rational points over F_2).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "p1" => CurveModel::new(0, vec![MotClass::one()], "p1"),
            "elliptic:q2a2" => CurveModel::new(
                1,
                vec![
                    MotClass::one(),
                    MotClass::from_int(2),
                    MotClass::from_int(2),
                ],
                "elliptic:q2a2",
            ),
            _ => Err(Error::Config(format!("unknown curve '{}'", name))),
        }
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn numerator(&self) -> &[MotClass] {
        &self.numerator
    }

    fn numerator_ints(&self, q: u64) -> Result<Vec<BigInt>> {
        self.numerator
            .iter()
            .map(|c| {
                let v = c.specialize_rat(q).map_err(|_| Error::NonIntegralNumerator(q))?;
                if v.denom().is_one() {
                    Ok(v.numer().clone())
                } else {
                    Err(Error::NonIntegralNumerator(q))
                }
            })
            .collect()
    }

    /// Rational-point counts `N_m = #C(F_{q^m})` for `m <= e_max` and
    /// closed-point counts `B_e`, from the numerator via Newton's identities
    /// (no root extraction).
    pub fn point_counts(&self, q: u64, e_max: u32) -> Result<PointCounts> {
        let c = self.numerator_ints(q)?;
        let deg = c.len() - 1;
        // power sums of the inverse roots of P: p_k + sum_{j<k} c_j p_{k-j} + k c_k = 0
        let mut p: Vec<BigInt> = vec![BigInt::zero(); e_max as usize + 1];
        for k in 1..=e_max as usize {
            let mut acc = if k <= deg {
                -(&c[k] * BigInt::from(k))
            } else {
                BigInt::zero()
            };
            for j in 1..k.min(deg + 1) {
                acc -= &c[j] * &p[k - j];
            }
            p[k] = acc;
        }
        let qi = BigInt::from(q);
        let mut n = Vec::with_capacity(e_max as usize);
        for m in 1..=e_max as usize {
            n.push(qi.pow(m as u32) + 1 - &p[m]);
        }
        // Möbius inversion: B_e = (1/e) sum_{d|e} mu(d) N_{e/d}
        let mut b = Vec::with_capacity(e_max as usize);
        for e in 1..=e_max as usize {
            let mut acc = BigInt::zero();
            for d in 1..=e {
                if e % d == 0 {
                    acc += BigInt::from(moebius_int(d as u64)) * &n[e / d - 1];
                }
            }
            let (quot, rem) = num::Integer::div_rem(&acc, &BigInt::from(e));
            if !rem.is_zero() {
                return Err(Error::InvalidCurve(format!(
                    "closed-point count B_{} is not an integer at q={}",
                    e, q
                )));
            }
            if quot.is_negative() {
                return Err(Error::NegativePointCount(e as u32, quot.to_string()));
            }
            b.push(quot);
        }
        Ok(PointCounts { n, b })
    }

    /// The Kapranov zeta series `P(T) / ((1-T)(1-LT))` truncated at total
    /// degree `bound`; the degree-d coefficient is the symmetric-power class
    /// `[Sym^d C]`.
    pub fn kapranov_zeta(&self, bound: u32) -> MultiSeries<MotClass> {
        let region = Region::total(bound);
        let mut out = MultiSeries::zero(1, region);
        let coeffs = self.kapranov_coeffs(bound);
        for (d, c) in coeffs.into_iter().enumerate() {
            out.set(MDeg(vec![d as u32]), c);
        }
        out
    }

    /// Coefficients `[Sym^d C]` for `d <= bound`.
    pub fn kapranov_coeffs(&self, bound: u32) -> Vec<MotClass> {
        // g_c = sum_{b<=c} L^b, the coefficient of (1/(1-T))(1/(1-LT)) at T^c
        let mut g = Vec::with_capacity(bound as usize + 1);
        let mut acc = MotClass::zero();
        let mut lpow = MotClass::one();
        for _ in 0..=bound {
            acc = acc.add(&lpow);
            g.push(acc.clone());
            lpow = lpow.mul(&MotClass::lefschetz());
        }
        (0..=bound as usize)
            .map(|d| {
                let mut z = MotClass::zero();
                for (i, pi) in self.numerator.iter().enumerate() {
                    if i > d {
                        break;
                    }
                    z = z.add(&pi.mul(&g[d - i]));
                }
                z
            })
            .collect()
    }

    /// Section count `h^0` of a degree-`d` line bundle in the regimes where
    /// it is determined by Riemann-Roch; the range `0 <= d <= 2g-2` with
    /// `g >= 1` depends on the bundle and is refused.
    pub fn h0(&self, d: i64) -> Result<u64> {
        if d < 0 {
            return Ok(0);
        }
        if self.genus == 0 {
            return Ok(d as u64 + 1);
        }
        if d > 2 * i64::from(self.genus) - 2 {
            return Ok((d + 1 - i64::from(self.genus)) as u64);
        }
        Err(Error::AmbiguousH0 {
            genus: self.genus,
            degree: d,
        })
    }

    /// `#Pic^0` under counting specialisation: `P(1)` at `q`.
    pub fn pic0_count(&self, q: u64) -> Result<BigInt> {
        let c = self.numerator_ints(q)?;
        let total: BigInt = c.into_iter().sum();
        if total <= BigInt::zero() {
            return Err(Error::InvalidCurve(format!(
                "nonpositive Pic^0 count {} at q={}",
                total, q
            )));
        }
        Ok(total)
    }
}

/// `n[m-1] = N_m`, `b[e-1] = B_e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointCounts {
    pub n: Vec<BigInt>,
    pub b: Vec<BigInt>,
}

impl PointCounts {
    pub fn closed_points(&self, e: u32) -> &BigInt {
        &self.b[e as usize - 1]
    }
}

/// Integer Möbius function by trial division.
fn moebius_int(mut n: u64) -> i64 {
    let mut mu = 1i64;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

/// The orbit-decomposition class of the toric variety: the sum over
/// cone-supported ray subsets `S` of `(L-1)^{n-|S|}`.
pub fn toric_class(fan: &crate::fan::Fan) -> MotClass {
    let n = fan.dim();
    let lm1 = MotClass::lefschetz().sub(&MotClass::one());
    let mut powers = vec![MotClass::one()];
    for _ in 0..n {
        let next = powers.last().unwrap().mul(&lm1);
        powers.push(next);
    }
    let mut acc = MotClass::zero();
    for s in cone_supported_subsets(fan) {
        acc = acc.add(&powers[n - s.count_ones() as usize]);
    }
    acc
}

/// Bitmasks of all cone-supported subsets (the faces of the fan, each once).
pub fn cone_supported_subsets(fan: &crate::fan::Fan) -> Vec<u32> {
    let mut set = std::collections::BTreeSet::new();
    for cone in fan.max_cones() {
        let k = cone.len();
        for sub in 0u32..(1 << k) {
            let mut mask = 0u32;
            for (pos, &ray) in cone.iter().enumerate() {
                if sub & (1 << pos) != 0 {
                    mask |= 1 << ray;
                }
            }
            set.insert(mask);
        }
    }
    set.into_iter().collect()
}

/// Lemma-style positivity shape for the local Tamagawa factor:
/// `(1 - L^{-1})^rank * [X] / L^n` must lie in `1 + F^2`, i.e. every
/// non-constant term has virtual dimension <= -2.
pub fn tamagawa_local_shape_holds(fan: &crate::fan::Fan) -> Result<bool> {
    let pic = fan.picard_lattice()?;
    let x = toric_class(fan);
    let lm1_inv = MotClass::one().sub(&MotClass::monomial(Rat::one(), -1, 1));
    let mut v = x.mul(&MotClass::monomial(Rat::one(), -(fan.dim() as i64), 1));
    for _ in 0..pic.rank {
        v = v.mul(&lm1_inv);
    }
    let rest = v.sub(&MotClass::one());
    Ok(match rest.virtual_dimension() {
        None => true,
        Some(d) => d <= rat_int(-2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::{library_fan, LIBRARY_FANS};

    fn p1() -> CurveModel {
        CurveModel::preset("p1").unwrap()
    }

    fn elliptic() -> CurveModel {
        CurveModel::preset("elliptic:q2a2").unwrap()
    }

    #[test]
    fn construction_contract() {
        assert!(CurveModel::new(0, vec![MotClass::one()], "c").is_ok());
        assert!(CurveModel::new(
            1,
            vec![MotClass::one(), MotClass::from_int(2), MotClass::from_int(2)],
            "e"
        )
        .is_ok());
        // P(0) != 1
        assert!(CurveModel::new(1, vec![MotClass::from_int(2), MotClass::one()], "x").is_err());
        // degree exceeds 2g
        assert!(CurveModel::new(0, vec![MotClass::one(), MotClass::from_int(1)], "x").is_err());
    }

    #[test]
    fn p1_point_counts() {
        let pc = p1().point_counts(2, 2).unwrap();
        assert_eq!(pc.n, vec![BigInt::from(3), BigInt::from(5)]);
        assert_eq!(pc.b, vec![BigInt::from(3), BigInt::from(1)]);
        let pc = p1().point_counts(3, 1).unwrap();
        assert_eq!(pc.b, vec![BigInt::from(4)]);
    }

    #[test]
    fn elliptic_point_counts() {
        // a = N_1 - (q+1) = 2 at q = 2; p_2 = a^2 - 2q = 0 so N_2 = 5
        let pc = elliptic().point_counts(2, 4).unwrap();
        assert_eq!(pc.n[0], BigInt::from(5));
        assert_eq!(pc.n[1], BigInt::from(5));
        assert_eq!(pc.b[0], BigInt::from(5));
        assert_eq!(pc.b[1], BigInt::from(0));
    }

    #[test]
    fn counting_consistency() {
        // sum_{e|m} e * B_e = N_m
        for curve in [p1(), elliptic()] {
            for q in [2u64, 3] {
                let pc = curve.point_counts(q, 6).unwrap();
                for m in 1..=6usize {
                    let mut acc = BigInt::zero();
                    for e in 1..=m {
                        if m % e == 0 {
                            acc += BigInt::from(e) * &pc.b[e - 1];
                        }
                    }
                    assert_eq!(acc, pc.n[m - 1], "curve {} q={} m={}", curve.label(), q, m);
                }
            }
        }
    }

    #[test]
    fn kapranov_coefficients() {
        let z = p1().kapranov_coeffs(4);
        assert!(z[0].is_one());
        let expect = MotClass::lefschetz()
            .pow(2)
            .add(&MotClass::lefschetz())
            .add(&MotClass::one());
        assert_eq!(z[2], expect);
        // g = 0 coefficient at q equals the number of effective divisors
        for q in [2u64, 3] {
            for (d, c) in z.iter().enumerate() {
                let v = c.specialize_rat(q).unwrap();
                let expect = (BigInt::from(q).pow(d as u32 + 1) - 1) / (BigInt::from(q) - 1);
                assert_eq!(v, Rat::from_integer(expect));
            }
        }
        // Sym^1 E = E
        let ze = elliptic().kapranov_coeffs(2);
        assert_eq!(ze[1].specialize_rat(2).unwrap(), rat_int(5));
    }

    #[test]
    fn kapranov_rationality() {
        // kapranov * (1-T)(1-LT) = P within truncation
        for curve in [p1(), elliptic()] {
            let bound = 8;
            let z = curve.kapranov_zeta(bound);
            let denom = MultiSeries::polynomial(
                1,
                vec![
                    (MDeg(vec![0]), MotClass::one()),
                    (
                        MDeg(vec![1]),
                        MotClass::lefschetz().add(&MotClass::one()).neg(),
                    ),
                    (MDeg(vec![2]), MotClass::lefschetz()),
                ],
            );
            let prod = z.mul(&denom).unwrap();
            let p = MultiSeries::polynomial(
                1,
                curve
                    .numerator()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (MDeg(vec![i as u32]), c.clone()))
                    .collect(),
            );
            assert!(
                prod.eq_within(&p, None),
                "rationality fails for {}",
                curve.label()
            );
        }
    }

    #[test]
    fn h0_contract() {
        assert_eq!(p1().h0(3).unwrap(), 4);
        assert_eq!(p1().h0(-2).unwrap(), 0);
        let g2 = CurveModel::new(
            2,
            vec![MotClass::one()],
            "g2", // numerator 1 is fine for the h0 contract
        )
        .unwrap();
        assert_eq!(g2.h0(5).unwrap(), 4);
        assert!(matches!(
            g2.h0(2),
            Err(Error::AmbiguousH0 { genus: 2, degree: 2 })
        ));
    }

    #[test]
    fn pic0_examples() {
        assert_eq!(p1().pic0_count(2).unwrap(), BigInt::from(1));
        assert_eq!(p1().pic0_count(7).unwrap(), BigInt::from(1));
        assert_eq!(elliptic().pic0_count(2).unwrap(), BigInt::from(5));
    }

    #[test]
    fn toric_classes() {
        let p2 = toric_class(&library_fan("p2").unwrap());
        let expect = MotClass::lefschetz()
            .pow(2)
            .add(&MotClass::lefschetz())
            .add(&MotClass::one());
        assert_eq!(p2, expect);

        let p1c = toric_class(&library_fan("p1").unwrap());
        assert_eq!(p1c, MotClass::lefschetz().add(&MotClass::one()));

        let p1xp1 = toric_class(&library_fan("p1xp1").unwrap());
        assert_eq!(
            p1xp1,
            MotClass::lefschetz().add(&MotClass::one()).pow(2)
        );

        // closed-form point counts at small q
        let cases: [(&str, fn(u64) -> u64); 3] = [
            ("p2", |q| q * q + q + 1),
            ("p1", |q| q + 1),
            ("p1xp1", |q| (q + 1) * (q + 1)),
        ];
        for (name, f) in cases {
            let cls = toric_class(&library_fan(name).unwrap());
            for q in [2u64, 3, 4] {
                assert_eq!(
                    cls.specialize_rat(q).unwrap(),
                    rat_int(f(q) as i64),
                    "{} at q={}",
                    name,
                    q
                );
            }
        }
    }

    #[test]
    fn tamagawa_local_shape() {
        for name in LIBRARY_FANS {
            let fan = library_fan(name).unwrap();
            assert!(
                tamagawa_local_shape_holds(&fan).unwrap(),
                "local factor shape fails for {}",
                name
            );
        }
    }
}
