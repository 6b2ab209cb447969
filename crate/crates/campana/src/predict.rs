//! Predictions and limits: expected counts from the Euler products,
//! normalised values, Tamagawa constants, and convergence reports.

use crate::curve::CurveModel;
use crate::error::{Error, Result};
use crate::euler::{
    campana_admissible_local, density_local, ep_dimension_slope, euler_product_counting,
};
use crate::fan::Fan;
use crate::ffcount::{count_hom_divisors, count_hom_forms, CountOptions, Fq};
use crate::gring::AlgNumber;
use crate::mvseries::{geometric_decompose, MDeg};
use crate::{rat, rat_int, Rat};
use num::{BigInt, One, ToPrimitive, Zero};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

fn lcm_mults(m: &[u32]) -> u32 {
    m.iter().fold(1u32, |acc, &x| crate::gring::lcm_u32(acc, x))
}

/// Expected number of morphisms of multidegree `d`: the coefficient of the
/// admissible-series Euler product, times `(q-1)^n / #Pic^0(C)^n`.
///
/// For genus 0 this equals the brute-force morphism count exactly; for
/// higher genus it is the asymptotic prediction only.
pub fn predicted_count(
    fan: &Fan,
    curve: &CurveModel,
    q: u64,
    d: &[u32],
    m: &[u32],
    bound: u32,
) -> Result<Rat> {
    if !fan.degree_admissible(d)? {
        return Err(Error::NonAdmissible(d.to_vec()));
    }
    let total: u32 = d.iter().sum();
    if bound < total {
        return Err(Error::BoundTooSmall(bound, total));
    }
    let local = campana_admissible_local(fan, m, bound)?;
    let ep = euler_product_counting(&local, curve, q, bound)?;
    let coeff = ep.coeff(&MDeg(d.to_vec()));
    let n = fan.dim() as u32;
    let torus = Rat::from_integer(BigInt::from(q - 1).pow(n));
    let pic0 = curve.pic0_count(q)?;
    let pic0_n = Rat::from_integer(pic0.pow(n));
    Ok(coeff * torus / pic0_n)
}

/// Normalise a count by `q^{sum_i d_i/m_i + n(1-g)}`, as an element of
/// `Q[x]/(x^r - q)` with `r = lcm(m_i)`.
pub fn normalised_count(
    count: &Rat,
    fan: &Fan,
    curve: &CurveModel,
    q: u64,
    d: &[u32],
    m: &[u32],
) -> Result<AlgNumber> {
    let r = lcm_mults(m);
    let log_deg = fan.log_anticanonical_degree(m, d)?;
    let n = i64::try_from(fan.dim()).unwrap();
    let g = i64::from(curve.genus());
    let exponent = log_deg + rat_int(n * (1 - g));
    // r * exponent is an integer by construction
    let scaled = exponent * rat_int(i64::from(r));
    debug_assert!(scaled.denom().is_one());
    let k: i64 = scaled
        .numer()
        .try_into()
        .map_err(|_| Error::Config("normalisation exponent overflow".into()))?;
    let base = AlgNumber::from_rat(q, r, count.clone());
    Ok(base.mul(&AlgNumber::x_power(q, r, -k)))
}

/// A Tamagawa constant with its certification: `exact` means the geometric
/// decomposition of the density factor terminated and the value is a closed
/// form; otherwise `error_dim_bound` bounds the virtual dimension of the
/// truncation tail.
#[derive(Clone, Debug)]
pub struct TamagawaValue {
    pub value: AlgNumber,
    pub error_dim_bound: Option<Rat>,
    pub exact: bool,
}

/// Kapranov zeta value `Z_C(t)` at `t = x^{exp}` (with `x^r = q`), as a
/// rational function `P_C(t) / ((1-t)(1-qt))`.
fn zeta_value(curve: &CurveModel, q: u64, r: u32, exp: i64) -> Result<AlgNumber> {
    let t = AlgNumber::x_power(q, r, exp);
    let mut num = AlgNumber::zero(q, r);
    let mut tpow = AlgNumber::from_rat(q, r, Rat::one());
    for c in curve.numerator() {
        let cv = c.specialize_rat(q)?;
        num = num.add(&tpow.scale(&cv));
        tpow = tpow.mul(&t);
    }
    let one = AlgNumber::from_rat(q, r, Rat::one());
    let den = one
        .sub(&t)
        .mul(&one.sub(&t.scale(&rat_int(q as i64))));
    num.div(&den)
}

/// The predicted limit of normalised counts:
/// per-variable pole factors `P_C(q^{-1})/(1-q^{-1})`, times the density
/// Euler product evaluated at `T_i = q^{-1/m_i}`, times
/// `(q-1)^n q^{-n(1-g)} / #Pic^0(C)^n`.
pub fn tamagawa_constant(
    fan: &Fan,
    curve: &CurveModel,
    q: u64,
    m: &[u32],
    bound: u32,
) -> Result<TamagawaValue> {
    let r = lcm_mults(m);
    let nvars = fan.num_rays();
    let n = fan.dim() as u32;
    let density = density_local(fan, m)?;

    // exact route: a terminating geometric decomposition evaluates as a
    // finite product of rational zeta values
    let dec = geometric_decompose(&density.series, bound)?;
    let mut exact_value: Option<AlgNumber> = None;
    if dec.exact {
        let mut acc = AlgNumber::from_rat(q, r, Rat::one());
        let mut ok = true;
        for f in &dec.factors {
            // (1 - L^j T^k)^{-b} contributes Z_C(q^{j - sum k_i/m_i})^{b}
            let mut exp = f.l_exp.clone() * rat_int(i64::from(r));
            for (ki, mi) in f.degree.0.iter().zip(m) {
                exp -= rat(i64::from(*ki) * i64::from(r), i64::from(*mi));
            }
            debug_assert!(exp.denom().is_one());
            let exp: i64 = match exp.numer().try_into() {
                Ok(e) => e,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let z = match zeta_value(curve, q, r, exp) {
                Ok(z) => z,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            if f.mult >= 0 {
                acc = acc.mul(&z.pow(f.mult as u32));
            } else {
                match z.pow((-f.mult) as u32).try_inv() {
                    Ok(inv) => acc = acc.mul(&inv),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            exact_value = Some(acc);
        }
    }

    let (g_value, error_dim_bound, exact) = match exact_value {
        Some(v) => (v, None, true),
        None => {
            // truncated route with a certified dimension slope
            let alpha: Vec<Rat> = m.iter().map(|&mi| rat(1, i64::from(mi))).collect();
            let slope = ep_dimension_slope(&density, &alpha)?;
            if slope >= rat_int(1) {
                return Err(Error::Divergent(slope.to_string()));
            }
            let series = euler_product_counting(&density, curve, q, bound)?;
            let mut acc = AlgNumber::zero(q, r);
            for (e, c) in series.terms() {
                let mut exp: i64 = 0;
                for (ei, mi) in e.0.iter().zip(m) {
                    exp -= i64::from(*ei) * i64::from(r / mi);
                }
                acc = acc.add(&AlgNumber::x_power(q, r, exp).scale(c));
            }
            let min_alpha = alpha.iter().cloned().fold(rat_int(1), |a, b| a.min(b));
            let tail =
                (slope - rat_int(1)) * rat_int(i64::from(bound) + 1) * min_alpha;
            (acc, Some(tail), false)
        }
    };

    // pole factor per ray variable: P_C(q^{-1}) / (1 - q^{-1})
    let mut p_at = Rat::zero();
    let mut qinv_pow = Rat::one();
    let qinv = rat_int(1) / rat_int(q as i64);
    for c in curve.numerator() {
        p_at += c.specialize_rat(q)? * &qinv_pow;
        qinv_pow *= &qinv;
    }
    let pole_single = p_at / (rat_int(1) - &qinv);
    let mut scalar = Rat::one();
    for _ in 0..nvars {
        scalar *= &pole_single;
    }
    // (q-1)^n q^{-n(1-g)} / pic0^n
    scalar *= Rat::from_integer(BigInt::from(q - 1).pow(n));
    let g = i64::from(curve.genus());
    let qexp = i64::from(n) * (1 - g);
    let qpow = if qexp >= 0 {
        Rat::one() / Rat::from_integer(BigInt::from(q).pow(qexp as u32))
    } else {
        Rat::from_integer(BigInt::from(q).pow((-qexp) as u32))
    };
    scalar *= qpow;
    let pic0 = curve.pic0_count(q)?;
    scalar /= Rat::from_integer(pic0.pow(n));

    Ok(TamagawaValue {
        value: g_value.scale(&scalar),
        error_dim_bound,
        exact,
    })
}

/// One row of a convergence report.
#[derive(Clone, Debug)]
pub struct ReportRow {
    pub fan: String,
    pub curve: String,
    pub q: u64,
    pub m: Vec<u32>,
    pub d: Vec<u32>,
    pub brute_count: Option<u128>,
    pub predicted_count: Rat,
    pub normalised_value: AlgNumber,
    pub limit_constant: AlgNumber,
    pub limit_error_bound: Rat,
    pub theorem_error_exponent: Rat,
    pub budget_exhausted: bool,
    pub asymptotic: bool,
}

impl ReportRow {
    /// Observed error exponent `log_q |normalised - limit|`, or `None` when
    /// the error is exactly zero.
    pub fn observed_error_exponent(&self) -> Option<f64> {
        let diff = self.normalised_value.sub(&self.limit_constant);
        if diff.is_zero() {
            return None;
        }
        let v = diff.to_f64().abs();
        Some(v.ln() / (self.q as f64).ln())
    }
}

#[derive(Clone, Debug)]
pub struct ReportMeta {
    pub config_hash: String,
    pub bound: u32,
    pub max_tuples: u128,
    pub workers: Option<usize>,
    pub runtime_ms: u128,
}

#[derive(Clone, Debug)]
pub struct CountReport {
    pub rows: Vec<ReportRow>,
    pub meta: ReportMeta,
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn join_u32(v: &[u32]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl CountReport {
    pub const CSV_HEADER: &'static str = "fan,curve,q,m,d,brute_count,predicted_count,normalised_value,limit_constant,limit_error_bound,theorem_error_exponent";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let cells = [
                csv_escape(&row.fan),
                csv_escape(&row.curve),
                row.q.to_string(),
                csv_escape(&join_u32(&row.m)),
                csv_escape(&join_u32(&row.d)),
                row.brute_count
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                csv_escape(&row.predicted_count.to_string()),
                csv_escape(&row.normalised_value.to_string()),
                csv_escape(&row.limit_constant.to_string()),
                csv_escape(&row.limit_error_bound.to_string()),
                csv_escape(&row.theorem_error_exponent.to_string()),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Structured (TOML) rendering with full provenance.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[meta]\n");
        out.push_str(&format!("config_hash = \"{}\"\n", self.meta.config_hash));
        out.push_str(&format!("bound = {}\n", self.meta.bound));
        out.push_str(&format!("max_tuples = {}\n", self.meta.max_tuples));
        if let Some(w) = self.meta.workers {
            out.push_str(&format!("workers = {}\n", w));
        }
        out.push_str(&format!("runtime_ms = {}\n", self.meta.runtime_ms));
        for row in &self.rows {
            out.push_str("\n[[row]]\n");
            out.push_str(&format!("fan = \"{}\"\n", row.fan));
            out.push_str(&format!("curve = \"{}\"\n", row.curve));
            out.push_str(&format!("q = {}\n", row.q));
            out.push_str(&format!("m = [{}]\n", join_u32(&row.m)));
            out.push_str(&format!("d = [{}]\n", join_u32(&row.d)));
            match row.brute_count {
                Some(c) => out.push_str(&format!("brute_count = {}\n", c)),
                None => out.push_str("brute_count = \"null\"\n"),
            }
            out.push_str(&format!(
                "predicted_count = \"{}\"\n",
                row.predicted_count
            ));
            out.push_str(&format!(
                "normalised_value = \"{}\"\n",
                row.normalised_value
            ));
            out.push_str(&format!("limit_constant = \"{}\"\n", row.limit_constant));
            out.push_str(&format!(
                "limit_error_bound = \"{}\"\n",
                row.limit_error_bound
            ));
            out.push_str(&format!(
                "theorem_error_exponent = \"{}\"\n",
                row.theorem_error_exponent
            ));
            out.push_str(&format!("budget_exhausted = {}\n", row.budget_exhausted));
            out.push_str(&format!("asymptotic = {}\n", row.asymptotic));
            if let Some(exp) = row.observed_error_exponent() {
                out.push_str(&format!("observed_error_exponent = {:.6}\n", exp));
            } else {
                out.push_str("observed_error_exponent = \"exact\"\n");
            }
        }
        out
    }
}

/// Run both enumeration oracles within budget; they must agree when both
/// complete. Returns `(count, budget_exhausted)`.
pub fn brute_count_checked(
    fan: &Fan,
    field: &Fq,
    d: &[u32],
    m: &[u32],
    opts: &CountOptions,
) -> Result<(Option<u128>, bool)> {
    let is_budget = |e: &Error| {
        matches!(
            e,
            Error::BudgetExceeded(_, _) | Error::TimeBudgetExceeded(_)
        )
    };
    let forms = match count_hom_forms(fan, field, d, m, opts) {
        Ok(v) => Some(v),
        Err(e) if is_budget(&e) => None,
        Err(e) => return Err(e),
    };
    let divisors = match count_hom_divisors(fan, field, d, m, opts) {
        Ok(v) => Some(v),
        Err(e) if is_budget(&e) => None,
        Err(e) => return Err(e),
    };
    match (forms, divisors) {
        (Some(f), Some(dv)) => {
            if f != dv {
                Err(Error::OracleMismatch {
                    forms: f,
                    divisors: dv,
                })
            } else {
                Ok((Some(f), false))
            }
        }
        (Some(f), None) => Ok((Some(f), false)),
        (None, Some(dv)) => Ok((Some(dv), false)),
        (None, None) => Ok((None, true)),
    }
}

/// Assemble a convergence report: both counters (budget permitting), the
/// prediction, the normalised value and the limit constant for every
/// multidegree in the list.
#[allow(clippy::too_many_arguments)]
pub fn convergence_report(
    fan: &Fan,
    curve: &CurveModel,
    q: u64,
    m: &[u32],
    d_list: &[Vec<u32>],
    bound: u32,
    opts: &CountOptions,
) -> Result<CountReport> {
    let start = Instant::now();
    for d in d_list {
        if !fan.degree_admissible(d)? {
            return Err(Error::NonAdmissible(d.clone()));
        }
    }
    let field = Fq::new(q)?;
    let tam = tamagawa_constant(fan, curve, q, m, bound)?;
    let limit_error_bound = match &tam.error_dim_bound {
        None => Rat::zero(),
        Some(dim) => {
            // q^{ceil(dim)} upper-bounds the q^{dim} error scale
            let c = dim.ceil();
            let k: i64 = c
                .numer()
                .try_into()
                .map_err(|_| Error::Config("error bound overflow".into()))?;
            if k >= 0 {
                Rat::from_integer(BigInt::from(q).pow(k as u32))
            } else {
                Rat::one() / Rat::from_integer(BigInt::from(q).pow((-k) as u32))
            }
        }
    };
    let brute_possible = curve.genus() == 0;
    let asymptotic = curve.genus() >= 1;
    let mut rows = Vec::new();
    for d in d_list {
        let (brute, exhausted) = if brute_possible {
            brute_count_checked(fan, &field, d, m, opts)?
        } else {
            (None, false)
        };
        let predicted = predicted_count(fan, curve, q, d, m, bound)?;
        if let Some(b) = brute {
            let b_rat = Rat::from_integer(BigInt::from(b));
            if b_rat != predicted && curve.genus() == 0 {
                return Err(Error::Config(format!(
                    "prediction {} disagrees with brute count {} at d={:?}",
                    predicted, b, d
                )));
            }
        }
        let count_for_norm = match brute {
            Some(b) => Rat::from_integer(BigInt::from(b)),
            None => predicted.clone(),
        };
        let normalised = normalised_count(&count_for_norm, fan, curve, q, d, m)?;
        let min_ratio = d
            .iter()
            .zip(m)
            .map(|(di, mi)| rat(i64::from(*di), i64::from(*mi)))
            .fold(None::<Rat>, |acc, x| {
                Some(acc.map_or(x.clone(), |a| a.min(x)))
            })
            .unwrap_or_else(Rat::zero);
        rows.push(ReportRow {
            fan: fan.label().to_string(),
            curve: curve.label().to_string(),
            q,
            m: m.to_vec(),
            d: d.clone(),
            brute_count: brute,
            predicted_count: predicted,
            normalised_value: normalised,
            limit_constant: tam.value.clone(),
            limit_error_bound: limit_error_bound.clone(),
            theorem_error_exponent: -min_ratio / rat_int(4),
            budget_exhausted: exhausted,
            asymptotic,
        });
    }
    let mut hasher = DefaultHasher::new();
    (
        fan.label(),
        curve.label(),
        q,
        m,
        d_list,
        bound,
        opts.max_tuples as u64,
    )
        .hash(&mut hasher);
    let meta = ReportMeta {
        config_hash: format!("{:016x}", hasher.finish()),
        bound,
        max_tuples: opts.max_tuples,
        workers: opts.workers,
        runtime_ms: start.elapsed().as_millis(),
    };
    Ok(CountReport { rows, meta })
}

/// Convenience: f64 shadow of a rational (reports only).
pub fn rat_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::library_fan;

    fn p1_curve() -> CurveModel {
        CurveModel::preset("p1").unwrap()
    }

    #[test]
    fn predicted_counts_match_closed_forms() {
        let p1 = library_fan("p1").unwrap();
        // q=2, d=(3,3): 2^7 - 2^5 = 96
        let v = predicted_count(&p1, &p1_curve(), 2, &[3, 3], &[1, 1], 8).unwrap();
        assert_eq!(v, rat_int(96));
        let p2 = library_fan("p2").unwrap();
        let v = predicted_count(&p2, &p1_curve(), 2, &[1, 1, 1], &[1, 1, 1], 6).unwrap();
        assert_eq!(v, rat_int(24));
        // campana
        let v = predicted_count(&p1, &p1_curve(), 3, &[2, 2], &[2, 2], 8).unwrap();
        assert_eq!(v, rat_int(24));
        // non-admissible degree errors
        assert!(matches!(
            predicted_count(&p2, &p1_curve(), 2, &[1, 2, 1], &[1, 1, 1], 6),
            Err(Error::NonAdmissible(_))
        ));
    }

    #[test]
    fn normalisation_examples() {
        let p1 = library_fan("p1").unwrap();
        for q in [2u64, 3, 4, 5] {
            for d in 1..=3u32 {
                let count = rat_int((q.pow(2 * d + 1) - q.pow(2 * d - 1)) as i64);
                let v =
                    normalised_count(&count, &p1, &p1_curve(), q, &[d, d], &[1, 1]).unwrap();
                let expect = AlgNumber::from_rat(q, 1, rat_int(1) - rat(1, (q * q) as i64));
                assert_eq!(v, expect, "q={} d={}", q, d);
            }
        }
        // exponent arithmetic with multiplicities
        let v = normalised_count(&rat_int(0), &p1, &p1_curve(), 2, &[2, 2], &[2, 2]).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn tamagawa_p1_is_exact() {
        let p1 = library_fan("p1").unwrap();
        for q in [2u64, 3, 5] {
            let tam = tamagawa_constant(&p1, &p1_curve(), q, &[1, 1], 10).unwrap();
            assert!(tam.exact);
            let expect = AlgNumber::from_rat(q, 1, rat_int(1) - rat(1, (q * q) as i64));
            assert_eq!(tam.value, expect, "q={}", q);
        }
    }

    #[test]
    fn tamagawa_p2_closed_form() {
        // q/(q-1) * (1 - q^{-3})(1 - q^{-2}) = 21/16 at q=2
        let p2 = library_fan("p2").unwrap();
        let tam = tamagawa_constant(&p2, &p1_curve(), 2, &[1, 1, 1], 12).unwrap();
        assert!(tam.exact);
        assert_eq!(tam.value, AlgNumber::from_rat(2, 1, rat(21, 16)));
        let tam = tamagawa_constant(&p2, &p1_curve(), 3, &[1, 1, 1], 12).unwrap();
        // 3/2 * (26/27)(8/9) = 104/81
        assert_eq!(tam.value, AlgNumber::from_rat(3, 1, rat(104, 81)));
    }

    #[test]
    fn tamagawa_p1xp1_is_square_of_p1() {
        let p1xp1 = library_fan("p1xp1").unwrap();
        for q in [2u64, 3] {
            let tam = tamagawa_constant(&p1xp1, &p1_curve(), q, &[1; 4], 10).unwrap();
            assert!(tam.exact);
            let base = rat_int(1) - rat(1, (q * q) as i64);
            let expect = AlgNumber::from_rat(q, 1, base.clone() * base);
            assert_eq!(tam.value, expect, "q={}", q);
        }
    }

    #[test]
    fn tamagawa_campana_has_certified_tail() {
        let p1 = library_fan("p1").unwrap();
        let tam = tamagawa_constant(&p1, &p1_curve(), 2, &[2, 2], 12).unwrap();
        // the density factor for m=2 does not decompose finitely; we get the
        // truncated value with a dimension bound on the tail
        assert!(!tam.exact);
        let bound = tam.error_dim_bound.unwrap();
        assert!(bound < rat_int(-1), "tail bound {}", bound);
        // value lives in Q[x]/(x^2 - 2)
        assert_eq!(tam.value.root_order(), 2);
    }

    #[test]
    fn convergence_report_p1_is_flat() {
        let p1 = library_fan("p1").unwrap();
        let d_list: Vec<Vec<u32>> = (1..=3).map(|a| vec![a, a]).collect();
        let report = convergence_report(
            &p1,
            &p1_curve(),
            2,
            &[1, 1],
            &d_list,
            8,
            &CountOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert_eq!(row.normalised_value, row.limit_constant);
            assert!(row.observed_error_exponent().is_none());
            assert!(!row.budget_exhausted);
            assert_eq!(
                row.brute_count.map(|b| Rat::from_integer(BigInt::from(b))),
                Some(row.predicted_count.clone())
            );
        }
    }

    #[test]
    fn report_serialisations() {
        let p1 = library_fan("p1").unwrap();
        let report = convergence_report(
            &p1,
            &p1_curve(),
            2,
            &[1, 1],
            &[vec![1, 1]],
            6,
            &CountOptions::default(),
        )
        .unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CountReport::CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("p1,p1,2,"), "row: {}", row);
        assert!(row.contains("\"1,1\""));
        let text = report.to_text();
        assert!(text.contains("[meta]"));
        assert!(text.contains("[[row]]"));
        // structured text parses back as TOML
        let parsed: toml::Value = toml::from_str(&text).unwrap();
        assert!(parsed.get("row").is_some());
    }
}
