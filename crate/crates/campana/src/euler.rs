//! Local series attached to a fan (coprimality, Campana admissibility,
//! Möbius) and their Euler products over the curve, expanded by two
//! independent algorithms:
//!
//! * the counting path multiplies the specialised local factor over closed
//!   points degree by degree;
//! * the motivic path factors the local series into geometric factors and
//!   assembles Kapranov zeta values.
//!
//! The two must agree under the counting specialisation; that agreement is
//! the main cross-check of the prediction side.

use crate::curve::CurveModel;
use crate::error::{Error, Result};
use crate::fan::Fan;
use crate::gring::MotClass;
use crate::mvseries::{geometric_decompose, MDeg, MultiSeries, Region};
use crate::{rat_int, Rat};
use num::{BigInt, One, Zero};

/// A uniform local factor: at a closed point of degree `e` substitute
/// `T -> T^e` and `L -> L^e` (or `q^e`). Constant term is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFactor {
    pub series: MultiSeries<MotClass>,
}

impl LocalFactor {
    pub fn new(series: MultiSeries<MotClass>) -> Result<Self> {
        if !series.constant_term().is_one() {
            return Err(Error::NonUnitConstant(format!(
                "{}",
                series.constant_term()
            )));
        }
        Ok(LocalFactor { series })
    }

    pub fn one(nvars: usize) -> Self {
        LocalFactor {
            series: MultiSeries::one(nvars, Region::unbounded()),
        }
    }

    pub fn nvars(&self) -> usize {
        self.series.nvars()
    }
}

/// The classical local Möbius polynomial, supported on `{0,1}^rays`:
/// inclusion-exclusion over cone-supported subsets of the support.
pub fn classical_moebius(fan: &Fan) -> LocalFactor {
    let m = fan.num_rays();
    let cone_masks: Vec<u32> = fan
        .max_cones()
        .iter()
        .map(|c| c.iter().fold(0u32, |acc, &r| acc | (1 << r)))
        .collect();
    let supported = |mask: u32| cone_masks.iter().any(|&c| mask & !c == 0);
    let mut series = MultiSeries::zero(m, Region::unbounded());
    for e_mask in 0u32..(1u32 << m) {
        // mu(e) = sum over subsets s of supp(e) of (-1)^{|supp(e)\s|} [s cone-supported]
        let mut mu: i64 = 0;
        let mut sub = e_mask;
        loop {
            if supported(sub) {
                let dropped = (e_mask & !sub).count_ones();
                mu += if dropped % 2 == 0 { 1 } else { -1 };
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & e_mask;
        }
        if mu != 0 {
            let e = MDeg((0..m).map(|i| u32::from(e_mask & (1 << i) != 0)).collect());
            series.set(e, MotClass::from_int(mu));
        }
    }
    LocalFactor { series }
}

/// Check the multiplicity lists used all over the module.
fn check_mults(fan: &Fan, m: &[u32]) -> Result<()> {
    if m.len() != fan.num_rays() {
        return Err(Error::DegreeLength(m.len(), fan.num_rays()));
    }
    if m.iter().any(|&x| x == 0) {
        return Err(Error::InvalidMultiplicity);
    }
    Ok(())
}

/// Membership in the admissible tuple set: support cone-supported and every
/// nonzero coordinate at least `m_i`.
pub fn tuple_admissible(fan: &Fan, m: &[u32], n: &[u32]) -> bool {
    let support: Vec<usize> = (0..n.len()).filter(|&i| n[i] > 0).collect();
    if !fan.cone_supported(&support) {
        return false;
    }
    n.iter().zip(m).all(|(&x, &mi)| x == 0 || x >= mi)
}

/// Generating series of admissible tuples: support cone-supported, every
/// nonzero coordinate `>= m_i`. For `m = 1` this is the classical
/// coprimality series.
pub fn campana_admissible_local(fan: &Fan, m: &[u32], bound: u32) -> Result<LocalFactor> {
    campana_admissible_region(fan, m, &Region::total(bound))
}

/// Admissible-tuple series on an arbitrary bounded region.
pub fn campana_admissible_region(fan: &Fan, m: &[u32], region: &Region) -> Result<LocalFactor> {
    check_mults(fan, m)?;
    let mut series = MultiSeries::zero(fan.num_rays(), region.clone());
    for e in region.enumerate(fan.num_rays()) {
        if tuple_admissible(fan, m, &e.0) {
            series.set(e, MotClass::one());
        }
    }
    LocalFactor::new(series)
}

/// Generating series of the multiplicity constraint alone: every coordinate
/// is 0 or `>= m_i`, with no support condition.
pub fn unconstrained_local(nvars: usize, m: &[u32], bound: u32) -> Result<LocalFactor> {
    unconstrained_region(nvars, m, &Region::total(bound))
}

/// Multiplicity-constraint series on an arbitrary bounded region.
pub fn unconstrained_region(nvars: usize, m: &[u32], region: &Region) -> Result<LocalFactor> {
    if m.len() != nvars {
        return Err(Error::DegreeLength(m.len(), nvars));
    }
    if m.iter().any(|&x| x == 0) {
        return Err(Error::InvalidMultiplicity);
    }
    let mut series = MultiSeries::zero(nvars, region.clone());
    for e in region.enumerate(nvars) {
        if e.0.iter().zip(m).all(|(&x, &mi)| x == 0 || x >= mi) {
            series.set(e, MotClass::one());
        }
    }
    LocalFactor::new(series)
}

/// The Campana local Möbius series, defined by the convolution identity
/// `admissible = moebius * unconstrained`, i.e. by series division.
pub fn campana_moebius(fan: &Fan, m: &[u32], bound: u32) -> Result<LocalFactor> {
    campana_moebius_region(fan, m, &Region::total(bound))
}

/// Campana Möbius series on an arbitrary bounded region.
pub fn campana_moebius_region(fan: &Fan, m: &[u32], region: &Region) -> Result<LocalFactor> {
    let admissible = campana_admissible_region(fan, m, region)?;
    let unconstrained = unconstrained_region(fan.num_rays(), m, region)?;
    let series = admissible.series.divide(&unconstrained.series)?;
    LocalFactor::new(series)
}

/// The density local factor `prod_i (1 - T_i^{m_i}) * admissible`, computed
/// directly as an exact polynomial:
/// `sum over cone-supported S of prod_{i in S} T_i^{m_i}(1 + ... + T_i^{m_i - 1})
///  * prod_{i not in S} (1 - T_i^{m_i})`.
pub fn density_local(fan: &Fan, m: &[u32]) -> Result<LocalFactor> {
    check_mults(fan, m)?;
    let nvars = fan.num_rays();
    let mut acc = MultiSeries::zero(nvars, Region::unbounded());
    for s_mask in crate::curve::cone_supported_subsets(fan) {
        let mut term = MultiSeries::one(nvars, Region::unbounded());
        for i in 0..nvars {
            let mut e_lo = MDeg::zero(nvars);
            let mut factor = MultiSeries::zero(nvars, Region::unbounded());
            if s_mask & (1 << i) != 0 {
                // T^m (1 + T + ... + T^{m-1})
                for a in m[i]..(2 * m[i]) {
                    e_lo.0[i] = a;
                    factor.set(e_lo.clone(), MotClass::one());
                }
            } else {
                factor.set(e_lo.clone(), MotClass::one());
                let mut e_hi = MDeg::zero(nvars);
                e_hi.0[i] = m[i];
                factor.set(e_hi, MotClass::from_int(-1));
            }
            term = term.mul(&factor)?;
        }
        acc = acc.add(&term)?;
    }
    LocalFactor::new(acc)
}

/// Certified per-degree dimension slope of an Euler product of `local` over
/// a curve, with respect to the weights `alpha`: the product's coefficient
/// at `e` has virtual dimension at most `slope * <alpha, e>`.
///
/// Each closed point contributes one support vector `v` of the local factor,
/// with moduli dimension `vdim(coeff_v) + dim(curve)`; the slope is the
/// worst ratio over support vectors.
pub fn ep_dimension_slope(local: &LocalFactor, alpha: &[Rat]) -> Result<Rat> {
    let mut slope = rat_int(0);
    for (e, c) in local.series.terms() {
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
        let dim = c.virtual_dimension().unwrap_or_else(|| rat_int(0));
        let ratio = (dim + rat_int(1)) / pairing;
        slope = slope.max(ratio);
    }
    Ok(slope)
}

/// Counting-side Euler product: `prod_{e >= 1} local(q^e, T^e)^{B_e}`
/// truncated at total degree `bound`. Coefficients are exact rationals.
pub fn euler_product_counting(
    local: &LocalFactor,
    curve: &CurveModel,
    q: u64,
    bound: u32,
) -> Result<MultiSeries<Rat>> {
    let nvars = local.nvars();
    let region = Region::total(bound);
    let counts = curve.point_counts(q, bound.max(1))?;
    let mut result = MultiSeries::<Rat>::one(nvars, region.clone());
    for e in 1..=bound {
        let b_e = counts.closed_points(e);
        if b_e.is_zero() {
            continue;
        }
        // local factor at level e: T -> T^e, L -> q^e
        let stretched = local
            .series
            .stretch_vars(e, region.clone())
            .try_map_coeffs(|c| c.stretch_lefschetz(e).specialize_rat(q))?;
        // u = local_e - 1 has valuation >= e, so (1+u)^{B_e} truncates fast
        let mut u = stretched;
        u.set(MDeg::zero(nvars), Rat::zero());
        let mut upow = MultiSeries::<Rat>::one(nvars, region.clone());
        let mut factor = MultiSeries::<Rat>::one(nvars, region.clone());
        let mut binom = BigInt::one();
        let max_j = bound / e;
        for j in 1..=u64::from(max_j) {
            binom = binom * (b_e - BigInt::from(j) + BigInt::one()) / BigInt::from(j);
            if binom.is_zero() {
                break;
            }
            upow = upow.mul(&u)?;
            if upow.is_zero() {
                break;
            }
            factor = factor.add(&upow.scale(&Rat::from_integer(binom.clone())))?;
        }
        result = result.mul(&factor)?;
    }
    Ok(result)
}

/// Motivic-side Euler product: factor the local series geometrically and
/// assemble `prod Z_C(L^j T^k)^{b}` from Kapranov coefficients, truncated at
/// total degree `bound`.
pub fn euler_product_motivic(
    local: &LocalFactor,
    curve: &CurveModel,
    bound: u32,
) -> Result<MultiSeries<MotClass>> {
    let nvars = local.nvars();
    let region = Region::total(bound);
    let dec = geometric_decompose(&local.series, bound)?;
    let z = curve.kapranov_coeffs(bound);
    let mut result = MultiSeries::<MotClass>::one(nvars, region.clone());
    for f in &dec.factors {
        // Z_C(L^j T^k) truncated: sum_a [Sym^a C] L^{ja} T^{ak}
        let mut zs = MultiSeries::<MotClass>::one(nvars, region.clone());
        let mut a = 1u32;
        loop {
            let e = f.degree.scale(a);
            if !region.contains(&e) {
                break;
            }
            let exp = &f.l_exp * rat_int(i64::from(a));
            let root: u32 = exp
                .denom()
                .try_into()
                .map_err(|_| Error::FractionalExponent)?;
            let lp = MotClass::lefschetz_power(&exp, root)?;
            zs.set(e, z[a as usize].mul(&lp));
            a += 1;
        }
        if f.mult >= 0 {
            for _ in 0..f.mult {
                result = result.mul(&zs)?;
            }
        } else {
            for _ in 0..(-f.mult) {
                result = result.divide(&zs)?;
            }
        }
    }
    Ok(result)
}

/// Outcome of the multiplicativity law `EP(F) * EP(G) = EP(F*G)`.
#[derive(Clone, Debug)]
pub struct MultiplicativityReport {
    pub pass: bool,
    pub first_discrepancy: Option<MDeg>,
}

pub fn multiplicativity_check(
    f: &LocalFactor,
    g: &LocalFactor,
    curve: &CurveModel,
    q: u64,
    bound: u32,
) -> Result<MultiplicativityReport> {
    let ep_f = euler_product_counting(f, curve, q, bound)?;
    let ep_g = euler_product_counting(g, curve, q, bound)?;
    let lhs = ep_f.mul(&ep_g)?;
    let prod = LocalFactor::new(f.series.mul(&g.series)?)?;
    let rhs = euler_product_counting(&prod, curve, q, bound)?;
    let first_discrepancy = lhs.first_discrepancy(&rhs);
    Ok(MultiplicativityReport {
        pass: first_discrepancy.is_none(),
        first_discrepancy,
    })
}

/// Direct check of the defining inversion identity of the classical Möbius
/// series on the box `n <= box`:
/// `sum_{n' <= n} mu(n') = [support(n) cone-supported]`.
pub fn classical_inversion_holds(fan: &Fan, box_bound: &[u32]) -> bool {
    let mu = classical_moebius(fan);
    let region = Region::boxed(box_bound.to_vec());
    for n in region.enumerate(fan.num_rays()) {
        let mut acc = MotClass::zero();
        for (e, c) in mu.series.terms() {
            if n.checked_sub(e).is_some() {
                acc = acc.add(c);
            }
        }
        let expect = if tuple_admissible(fan, &vec![1; fan.num_rays()], &n.0) {
            MotClass::one()
        } else {
            MotClass::zero()
        };
        if acc != expect {
            return false;
        }
    }
    true
}

/// Direct check of the Campana inversion identity on the box `n <= box`:
/// `1_admissible(n) = sum_{n' <= n} mu_m(n') 1_constraint(n - n')`.
pub fn campana_inversion_holds(fan: &Fan, m: &[u32], box_bound: &[u32]) -> Result<bool> {
    let mu = campana_moebius_region(fan, m, &Region::boxed(box_bound.to_vec()))?;
    let region = Region::boxed(box_bound.to_vec());
    let constraint =
        |n: &[u32]| n.iter().zip(m).all(|(&x, &mi)| x == 0 || x >= mi);
    for n in region.enumerate(fan.num_rays()) {
        let mut acc = MotClass::zero();
        for (e, c) in mu.series.terms() {
            if let Some(rest) = n.checked_sub(e) {
                if constraint(&rest.0) {
                    acc = acc.add(c);
                }
            }
        }
        let expect = if tuple_admissible(fan, m, &n.0) {
            MotClass::one()
        } else {
            MotClass::zero()
        };
        if acc != expect {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::{library_fan, LIBRARY_FANS};
    use crate::rat;

    fn md(v: &[u32]) -> MDeg {
        MDeg(v.to_vec())
    }

    fn p1_curve() -> CurveModel {
        CurveModel::preset("p1").unwrap()
    }

    #[test]
    fn classical_moebius_examples() {
        let mu = classical_moebius(&library_fan("p1").unwrap());
        assert_eq!(mu.series.num_terms(), 2);
        assert!(mu.series.coeff(&md(&[0, 0])).is_one());
        assert_eq!(mu.series.coeff(&md(&[1, 1])), MotClass::from_int(-1));

        let mu = classical_moebius(&library_fan("p2").unwrap());
        assert_eq!(mu.series.num_terms(), 2);
        assert_eq!(mu.series.coeff(&md(&[1, 1, 1])), MotClass::from_int(-1));

        // p1xp1 factorises over the two opposite pairs
        let mu = classical_moebius(&library_fan("p1xp1").unwrap());
        let a = MultiSeries::polynomial(
            4,
            vec![
                (md(&[0, 0, 0, 0]), MotClass::one()),
                (md(&[1, 1, 0, 0]), MotClass::from_int(-1)),
            ],
        );
        let b = MultiSeries::polynomial(
            4,
            vec![
                (md(&[0, 0, 0, 0]), MotClass::one()),
                (md(&[0, 0, 1, 1]), MotClass::from_int(-1)),
            ],
        );
        assert_eq!(mu.series, a.mul(&b).unwrap());
    }

    #[test]
    fn moebius_valuation_bound() {
        // no nonzero coefficient at |e| = 1, for every library fan
        for name in LIBRARY_FANS {
            let fan = library_fan(name).unwrap();
            let mu = classical_moebius(&fan);
            for (e, c) in mu.series.terms() {
                assert!(
                    e.is_zero() || e.total() >= 2,
                    "{}: coefficient {} at |e|={}",
                    name,
                    c,
                    e.total()
                );
            }
        }
    }

    #[test]
    fn admissible_series_examples() {
        let fan = library_fan("p1").unwrap();
        let adm = campana_admissible_local(&fan, &[2, 2], 6).unwrap();
        assert!(adm.series.coeff(&md(&[0, 0])).is_one());
        assert!(adm.series.coeff(&md(&[3, 0])).is_one());
        assert!(adm.series.coeff(&md(&[1, 0])).is_zero());
        assert!(adm.series.coeff(&md(&[2, 2])).is_zero());

        let fan = library_fan("p2").unwrap();
        let adm = campana_admissible_local(&fan, &[1, 1, 1], 6).unwrap();
        assert!(adm.series.coeff(&md(&[1, 1, 1])).is_zero());
        assert!(adm.series.coeff(&md(&[2, 3, 0])).is_one());
    }

    #[test]
    fn campana_moebius_examples() {
        let fan = library_fan("p1").unwrap();
        let mu = campana_moebius(&fan, &[2, 2], 8).unwrap();
        assert_eq!(mu.series.coeff(&md(&[2, 2])), MotClass::from_int(-1));
        assert!(mu.series.coeff(&md(&[2, 0])).is_zero());
        assert!(mu.series.coeff(&md(&[0, 2])).is_zero());
        // every nonzero coefficient has >= 2 coordinates with e_i >= m_i
        for (e, _) in mu.series.terms() {
            if e.is_zero() {
                continue;
            }
            let heavy = e.0.iter().filter(|&&x| x >= 2).count();
            assert!(heavy >= 2, "term at {:?}", e);
        }
    }

    #[test]
    fn campana_moebius_at_one_is_classical() {
        for name in ["p1", "p2", "p1xp1", "hirzebruch:1"] {
            let fan = library_fan(name).unwrap();
            let ones = vec![1u32; fan.num_rays()];
            let campana = campana_moebius(&fan, &ones, 5).unwrap();
            let classical = classical_moebius(&fan);
            assert!(
                campana.series.eq_within(&classical.series, None),
                "mismatch for {}",
                name
            );
        }
    }

    #[test]
    fn inversion_identities_small() {
        for name in ["p1", "p2", "p1xp1"] {
            let fan = library_fan(name).unwrap();
            let b = vec![3u32; fan.num_rays()];
            assert!(classical_inversion_holds(&fan, &b), "classical {}", name);
            let m = vec![2u32; fan.num_rays()];
            assert!(
                campana_inversion_holds(&fan, &m, &b).unwrap(),
                "campana {}",
                name
            );
        }
    }

    #[test]
    fn density_local_matches_product_form() {
        // density = prod (1 - T^m) * admissible, checked within truncation
        for (name, m) in [("p1", vec![2u32, 2]), ("p2", vec![1u32, 1, 1])] {
            let fan = library_fan(name).unwrap();
            let density = density_local(&fan, &m).unwrap();
            assert!(density.series.is_exact_polynomial());
            let bound = 8;
            let adm = campana_admissible_local(&fan, &m, bound).unwrap();
            let mut prod = adm.series;
            for i in 0..fan.num_rays() {
                let mut hi = MDeg::zero(fan.num_rays());
                hi.0[i] = m[i];
                let binom = MultiSeries::polynomial(
                    fan.num_rays(),
                    vec![
                        (MDeg::zero(fan.num_rays()), MotClass::one()),
                        (hi, MotClass::from_int(-1)),
                    ],
                );
                prod = prod.mul(&binom).unwrap();
            }
            assert!(
                density.series.eq_within(&prod, None),
                "density mismatch for {}",
                name
            );
        }
    }

    #[test]
    fn density_p1_m22_support_shape() {
        // single-variable terms T^a with m < a < 2m survive; everything else
        // off the diagonal pairs has >= 2 heavy coordinates
        let fan = library_fan("p1").unwrap();
        let h = density_local(&fan, &[2, 2]).unwrap();
        assert!(h.series.coeff(&md(&[3, 0])).is_one());
        assert!(h.series.coeff(&md(&[2, 0])).is_zero());
        assert_eq!(h.series.coeff(&md(&[2, 2])), MotClass::from_int(-1));
    }

    #[test]
    fn counting_euler_products() {
        // local = 1 - T0 T1 over P^1 at q=2: coefficient at (1,1) is -B_1 = -3
        let local = LocalFactor::new(MultiSeries::polynomial(
            2,
            vec![
                (md(&[0, 0]), MotClass::one()),
                (md(&[1, 1]), MotClass::from_int(-1)),
            ],
        ))
        .unwrap();
        let ep = euler_product_counting(&local, &p1_curve(), 2, 6).unwrap();
        assert_eq!(ep.coeff(&md(&[1, 1])), rat_int(-3));

        // Euler product of ones is one
        let ep = euler_product_counting(&LocalFactor::one(2), &p1_curve(), 2, 6).unwrap();
        assert!(ep.is_one());

        // classical admissible series for the P^1 target: coefficient at
        // (d,d) is q^{2d-1}(q+1)
        let fan = library_fan("p1").unwrap();
        for q in [2u64, 3] {
            let adm = campana_admissible_local(&fan, &[1, 1], 7).unwrap();
            let ep = euler_product_counting(&adm, &p1_curve(), q, 7).unwrap();
            for d in 1..=3u32 {
                let expect = rat_int((q.pow(2 * d - 1) * (q + 1)) as i64);
                assert_eq!(ep.coeff(&md(&[d, d])), expect, "q={} d={}", q, d);
            }
        }
    }

    #[test]
    fn motivic_euler_products() {
        // local = 1/(1-T) gives the Kapranov zeta series
        let geom = MultiSeries::<MotClass>::one(1, Region::total(8))
            .divide(&MultiSeries::polynomial(
                1,
                vec![
                    (md(&[0]), MotClass::one()),
                    (md(&[1]), MotClass::from_int(-1)),
                ],
            ))
            .unwrap();
        let local = LocalFactor::new(geom).unwrap();
        for curve in [p1_curve(), CurveModel::preset("elliptic:q2a2").unwrap()] {
            let ep = euler_product_motivic(&local, &curve, 8).unwrap();
            let z = curve.kapranov_zeta(8);
            assert!(ep.eq_within(&z, None), "kapranov shape for {}", curve.label());
        }

        // local = 1 - T0 T1 over P^1: (1 - T0T1)(1 - L T0T1)
        let local = LocalFactor::new(MultiSeries::polynomial(
            2,
            vec![
                (md(&[0, 0]), MotClass::one()),
                (md(&[1, 1]), MotClass::from_int(-1)),
            ],
        ))
        .unwrap();
        let ep = euler_product_motivic(&local, &p1_curve(), 8).unwrap();
        let expect = MultiSeries::polynomial(
            2,
            vec![
                (md(&[0, 0]), MotClass::one()),
                (
                    md(&[1, 1]),
                    MotClass::lefschetz().add(&MotClass::one()).neg(),
                ),
                (md(&[2, 2]), MotClass::lefschetz()),
            ],
        );
        assert!(ep.eq_within(&expect, None));
    }

    #[test]
    fn two_paths_agree_on_specialisation() {
        let fan = library_fan("p2").unwrap();
        let curve = p1_curve();
        let bound = 6;
        for local in [
            classical_moebius(&fan),
            campana_admissible_local(&fan, &[1, 1, 1], bound).unwrap(),
            campana_moebius(&fan, &[2, 2, 2], bound).unwrap(),
        ] {
            for q in [2u64, 3] {
                let counting = euler_product_counting(&local, &curve, q, bound).unwrap();
                let motivic = euler_product_motivic(&local, &curve, bound)
                    .unwrap()
                    .specialize_rat(q)
                    .unwrap();
                assert!(
                    counting.eq_within(&motivic, None),
                    "q={} first discrepancy {:?}",
                    q,
                    counting.first_discrepancy(&motivic)
                );
            }
        }
    }

    #[test]
    fn multiplicativity_examples() {
        let f = LocalFactor::new(MultiSeries::polynomial(
            2,
            vec![
                (md(&[0, 0]), MotClass::one()),
                (md(&[1, 1]), MotClass::from_int(-1)),
            ],
        ))
        .unwrap();
        let geom = MultiSeries::<MotClass>::one(2, Region::total(5))
            .divide(&MultiSeries::polynomial(
                2,
                vec![
                    (md(&[0, 0]), MotClass::one()),
                    (md(&[1, 0]), MotClass::from_int(-1)),
                ],
            ))
            .unwrap();
        let g = LocalFactor::new(geom).unwrap();
        let report = multiplicativity_check(&f, &g, &p1_curve(), 2, 5).unwrap();
        assert!(report.pass, "discrepancy {:?}", report.first_discrepancy);

        let ones = multiplicativity_check(
            &LocalFactor::one(2),
            &LocalFactor::one(2),
            &p1_curve(),
            2,
            5,
        )
        .unwrap();
        assert!(ones.pass);

        // pseudo-random unit-constant polynomials
        let mut seed = 11u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..5 {
            let mut fp = MultiSeries::<MotClass>::one(2, Region::unbounded());
            let mut gp = MultiSeries::<MotClass>::one(2, Region::unbounded());
            for _ in 0..3 {
                let e = md(&[(next() % 3) as u32, (next() % 3) as u32]);
                if e.is_zero() {
                    continue;
                }
                let c = (next() % 5) as i64 - 2;
                let cur = fp.coeff(&e).add(&MotClass::from_int(c));
                fp.set(e, cur);
                let e = md(&[(next() % 3) as u32, (next() % 3) as u32]);
                if e.is_zero() {
                    continue;
                }
                let c = (next() % 5) as i64 - 2;
                let cur = gp.coeff(&e).add(&MotClass::from_int(c));
                gp.set(e, cur);
            }
            let report = multiplicativity_check(
                &LocalFactor::new(fp).unwrap(),
                &LocalFactor::new(gp).unwrap(),
                &p1_curve(),
                2,
                5,
            )
            .unwrap();
            assert!(report.pass, "discrepancy {:?}", report.first_discrepancy);
        }
    }

    #[test]
    fn dimension_bound_on_moebius_products() {
        // EP(classical moebius) coefficients have vdim <= |e|/2, hence
        // margin <= 1/2 at alpha = 1
        for name in ["p1", "p2", "p1xp1", "hirzebruch:1"] {
            let fan = library_fan(name).unwrap();
            let mu = classical_moebius(&fan);
            let alpha = vec![rat_int(1); fan.num_rays()];
            let slope = ep_dimension_slope(&mu, &alpha).unwrap();
            assert!(slope <= rat(1, 2), "slope {} for {}", slope, name);
            let ep = euler_product_motivic(&mu, &p1_curve(), 6).unwrap();
            for (e, c) in ep.terms() {
                if e.is_zero() {
                    continue;
                }
                if let Some(d) = c.virtual_dimension() {
                    assert!(
                        d <= rat(e.total() as i64, 2),
                        "{}: dim {} at |e|={}",
                        name,
                        d,
                        e.total()
                    );
                }
            }
            let margin = ep.convergence_margin(&alpha).unwrap();
            assert!(margin <= rat(1, 2), "margin {} for {}", margin, name);
        }
    }

    #[test]
    fn campana_moebius_dimension_bound() {
        // After u_i = T_i^{m_i}, EP(campana moebius) coefficients satisfy
        // vdim <= (1/2) sum e_i / m_i.
        let fan = library_fan("p1").unwrap();
        let m = [2u32, 2];
        let mu = campana_moebius(&fan, &m, 8).unwrap();
        let ep = euler_product_motivic(&mu, &p1_curve(), 8).unwrap();
        for (e, c) in ep.terms() {
            if e.is_zero() {
                continue;
            }
            if let Some(d) = c.virtual_dimension() {
                let weight: Rat = e
                    .0
                    .iter()
                    .zip(&m)
                    .map(|(x, mi)| rat(i64::from(*x), i64::from(*mi)))
                    .sum();
                assert!(d.clone() * rat_int(2) <= weight, "dim {} at {:?}", d, e);
            }
        }
    }

    #[test]
    fn factorisation_identity_p1() {
        // prod_i Z_C(T_i^{m_i}) * EP(density) = EP(admissible)
        let fan = library_fan("p1").unwrap();
        let curve = p1_curve();
        let bound = 8;
        for m in [vec![1u32, 1], vec![2u32, 2]] {
            let adm = campana_admissible_local(&fan, &m, bound).unwrap();
            let lhs_ep = euler_product_counting(
                &density_local(&fan, &m).unwrap(),
                &curve,
                2,
                bound,
            )
            .unwrap();
            let z = curve.kapranov_zeta(bound).specialize_rat(2).unwrap();
            let mut lhs = lhs_ep;
            for i in 0..fan.num_rays() {
                // Z_C(T_i^{m_i}) as a 2-variable series
                let region = Region::total(bound);
                let mut zi = MultiSeries::<Rat>::zero(2, region.clone());
                let mut a = 0u32;
                loop {
                    let mut e = MDeg::zero(2);
                    e.0[i] = a * m[i];
                    if !region.contains(&e) {
                        break;
                    }
                    zi.set(e, z.coeff(&md(&[a])));
                    a += 1;
                }
                lhs = lhs.mul(&zi).unwrap();
            }
            let rhs = euler_product_counting(&adm, &curve, 2, bound).unwrap();
            assert!(
                lhs.eq_within(&rhs, None),
                "factorisation fails for m={:?}, first {:?}",
                m,
                lhs.first_discrepancy(&rhs)
            );
        }
    }
}
