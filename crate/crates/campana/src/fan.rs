//! Complete regular fans of split toric varieties and the combinatorial
//! invariants derived from them: the Picard lattice with an explicit
//! splitting, primitive collections, and multidegree admissibility.
//!
//! Ray order is the canonical index set: series variables, multidegrees and
//! multiplicity tuples all use the order in which rays appear here.

use crate::error::{Error, Result};
use crate::Rat;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

const MAX_RAYS: usize = 24;
const MAX_DIM: usize = 8;
const MAX_CONES: usize = 4096;
// keeps determinant and lattice arithmetic comfortably inside i128
const MAX_RAY_ENTRY: i64 = 1 << 10;

/// A complete regular fan: primitive ray generators plus maximal cones given
/// as ray-index subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fan {
    dim: usize,
    rays: Vec<Vec<i64>>,
    max_cones: Vec<Vec<usize>>,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct FanDoc {
    dim: usize,
    rays: Vec<Vec<i64>>,
    max_cones: Vec<Vec<usize>>,
    label: Option<String>,
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Fan {
    /// Structural construction checks: primitive distinct nonzero rays,
    /// cones of the right size with in-range distinct indices.
    /// Smoothness and completeness are reported by [`Fan::validate`], not
    /// enforced here.
    pub fn new(
        dim: usize,
        rays: Vec<Vec<i64>>,
        max_cones: Vec<Vec<usize>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::FanDocument(format!(
                "dimension {} out of supported range 1..={}",
                dim, MAX_DIM
            )));
        }
        if rays.len() > MAX_RAYS {
            return Err(Error::FanDocument(format!(
                "{} rays exceed the supported maximum {}",
                rays.len(),
                MAX_RAYS
            )));
        }
        for (i, ray) in rays.iter().enumerate() {
            if ray.len() != dim {
                return Err(Error::FanDocument(format!(
                    "ray {} has {} coordinates, expected {}",
                    i,
                    ray.len(),
                    dim
                )));
            }
            if ray.iter().all(|&x| x == 0) {
                return Err(Error::ZeroRay { index: i });
            }
            if ray.iter().any(|&x| x.abs() > MAX_RAY_ENTRY) {
                return Err(Error::FanDocument(format!("ray {} entry too large", i)));
            }
            let g = ray.iter().fold(0i64, |g, &x| gcd_i64(g, x));
            if g != 1 {
                return Err(Error::NonPrimitiveRay {
                    index: i,
                    ray: ray.clone(),
                });
            }
        }
        for i in 0..rays.len() {
            for j in (i + 1)..rays.len() {
                if rays[i] == rays[j] {
                    return Err(Error::DuplicateRay {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        if max_cones.is_empty() {
            return Err(Error::NoCones);
        }
        if max_cones.len() > MAX_CONES {
            return Err(Error::FanDocument(format!(
                "{} maximal cones exceed the supported maximum {}",
                max_cones.len(),
                MAX_CONES
            )));
        }
        for (ci, cone) in max_cones.iter().enumerate() {
            if cone.len() != dim {
                return Err(Error::ConeWrongSize {
                    index: ci,
                    got: cone.len(),
                    expected: dim,
                });
            }
            let mut seen = BTreeSet::new();
            for &r in cone {
                if r >= rays.len() {
                    return Err(Error::RayIndexOutOfRange { cone: ci, ray: r });
                }
                if !seen.insert(r) {
                    return Err(Error::RepeatedRayInCone { index: ci });
                }
            }
        }
        Ok(Fan {
            dim,
            rays,
            max_cones,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rays(&self) -> usize {
        self.rays.len()
    }

    pub fn rays(&self) -> &[Vec<i64>] {
        &self.rays
    }

    pub fn max_cones(&self) -> &[Vec<usize>] {
        &self.max_cones
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Parse the fan file format (TOML with keys `dim`, `rays`, `max_cones`,
    /// `label`).
    pub fn parse(document: &str) -> Result<Self> {
        let doc: FanDoc =
            toml::from_str(document).map_err(|e| Error::FanDocument(e.to_string()))?;
        Fan::new(
            doc.dim,
            doc.rays,
            doc.max_cones,
            doc.label.unwrap_or_default(),
        )
    }

    /// Emit the fan file format; `Fan::parse` of the output reproduces the
    /// fan exactly.
    pub fn to_document(&self) -> String {
        let doc = FanDoc {
            dim: self.dim,
            rays: self.rays.clone(),
            max_cones: self.max_cones.clone(),
            label: Some(self.label.clone()),
        };
        toml::to_string(&doc).expect("fan serialisation cannot fail")
    }

    /// Smoothness (unimodularity of every maximal cone) and the completeness
    /// certificate: every ray used, every facet shared by exactly two
    /// maximal cones lying on opposite sides of it, connected
    /// facet-adjacency graph.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut smooth = true;
        for (ci, cone) in self.max_cones.iter().enumerate() {
            let det = self.cone_det(cone);
            if det.map(|d| d.abs()) != Some(1) {
                smooth = false;
                violations.push(format!(
                    "cone {} {:?} has determinant {:?}, expected ±1",
                    ci, cone, det
                ));
            }
        }
        let mut complete = true;

        let mut used = vec![false; self.rays.len()];
        for cone in &self.max_cones {
            for &r in cone {
                used[r] = true;
            }
        }
        for (i, u) in used.iter().enumerate() {
            if !u {
                complete = false;
                violations.push(format!("ray {} lies in no maximal cone", i));
            }
        }

        // facet -> list of (cone index, opposite ray)
        let mut facets: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for (ci, cone) in self.max_cones.iter().enumerate() {
            for &skip in cone {
                let facet: Vec<usize> = cone.iter().copied().filter(|&r| r != skip).collect();
                let mut key = facet;
                key.sort_unstable();
                facets.entry(key).or_default().push((ci, skip));
            }
        }
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); self.max_cones.len()];
        for (facet, owners) in &facets {
            if owners.len() != 2 {
                complete = false;
                violations.push(format!(
                    "facet {:?} borders {} maximal cones, expected 2",
                    facet,
                    owners.len()
                ));
                continue;
            }
            let (c1, opp1) = owners[0];
            let (c2, opp2) = owners[1];
            match self.facet_normal(facet) {
                None => {
                    complete = false;
                    violations.push(format!("facet {:?} is degenerate", facet));
                }
                Some(w) => {
                    let s1 = dot(&w, &self.rays[opp1]);
                    let s2 = dot(&w, &self.rays[opp2]);
                    if s1 == 0 || s2 == 0 || (s1 > 0) == (s2 > 0) {
                        complete = false;
                        violations.push(format!(
                            "cones {} and {} lie on the same side of facet {:?}",
                            c1, c2, facet
                        ));
                    }
                }
            }
            adjacency[c1].push(c2);
            adjacency[c2].push(c1);
        }

        let mut seen = vec![false; self.max_cones.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(c) = stack.pop() {
            for &n in &adjacency[c] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            complete = false;
            violations.push("facet-adjacency graph is disconnected".to_string());
        }

        ValidationReport {
            smooth,
            complete,
            violations,
        }
    }

    fn cone_det(&self, cone: &[usize]) -> Option<i64> {
        let n = self.dim;
        if cone.len() != n {
            return None;
        }
        let m: Vec<Vec<i128>> = cone
            .iter()
            .map(|&r| self.rays[r].iter().map(|&x| i128::from(x)).collect())
            .collect();
        det_bareiss(m).and_then(|d| i64::try_from(d).ok())
    }

    /// Integer normal of the hyperplane spanned by a facet, via cofactor
    /// expansion; `None` if the facet rays are dependent.
    fn facet_normal(&self, facet: &[usize]) -> Option<Vec<i64>> {
        let n = self.dim;
        debug_assert_eq!(facet.len(), n - 1);
        let mut w = Vec::with_capacity(n);
        for j in 0..n {
            let minor: Vec<Vec<i128>> = facet
                .iter()
                .map(|&r| {
                    self.rays[r]
                        .iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, &x)| i128::from(x))
                        .collect()
                })
                .collect();
            let det = det_bareiss(minor).unwrap_or(0);
            let c = if j % 2 == 0 { det } else { -det };
            w.push(i64::try_from(c).ok()?);
        }
        if w.iter().all(|&x| x == 0) {
            None
        } else {
            Some(w)
        }
    }

    /// True iff `s` is contained in the ray set of some maximal cone
    /// (equivalently, `s` contains no primitive collection).
    pub fn cone_supported(&self, s: &[usize]) -> bool {
        self.max_cones
            .iter()
            .any(|cone| s.iter().all(|r| cone.contains(r)))
    }

    fn cone_masks(&self) -> Vec<u32> {
        self.max_cones
            .iter()
            .map(|cone| cone.iter().fold(0u32, |m, &r| m | (1 << r)))
            .collect()
    }

    /// Minimal ray-index subsets contained in no cone.
    pub fn primitive_collections(&self) -> PrimitiveCollections {
        let m = self.rays.len();
        let cone_masks = self.cone_masks();
        let supported = |mask: u32| cone_masks.iter().any(|&c| mask & !c == 0);
        let mut minimal: Vec<u32> = Vec::new();
        let mut by_size: Vec<Vec<u32>> = vec![Vec::new(); m + 1];
        for mask in 1u32..(1u32 << m) {
            by_size[mask.count_ones() as usize].push(mask);
        }
        for size in 2..=m {
            'next: for &mask in &by_size[size] {
                if supported(mask) {
                    continue;
                }
                for &p in &minimal {
                    if p & !mask == 0 {
                        continue 'next;
                    }
                }
                minimal.push(mask);
            }
        }
        let minimal_collections = minimal
            .into_iter()
            .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
        PrimitiveCollections {
            minimal_collections,
        }
    }

    /// True iff `sum_i d_i rho_i = 0`, i.e. the multidegree kills every
    /// character relation and corresponds to an effective Picard-dual class.
    pub fn degree_admissible(&self, d: &[u32]) -> Result<bool> {
        if d.len() != self.rays.len() {
            return Err(Error::DegreeLength(d.len(), self.rays.len()));
        }
        for j in 0..self.dim {
            let mut acc: i128 = 0;
            for (i, di) in d.iter().enumerate() {
                acc += i128::from(self.rays[i][j]) * i128::from(*di);
            }
            if acc != 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The log-anticanonical degree `sum_i d_i / m_i`.
    pub fn log_anticanonical_degree(&self, m: &[u32], d: &[u32]) -> Result<Rat> {
        if d.len() != self.rays.len() {
            return Err(Error::DegreeLength(d.len(), self.rays.len()));
        }
        if m.len() != self.rays.len() {
            return Err(Error::DegreeLength(m.len(), self.rays.len()));
        }
        if m.iter().any(|&x| x == 0) {
            return Err(Error::InvalidMultiplicity);
        }
        let mut acc = crate::rat_int(0);
        for (di, mi) in d.iter().zip(m) {
            acc += crate::rat(i64::from(*di), i64::from(*mi));
        }
        Ok(acc)
    }

    /// The Picard lattice in concrete coordinates: the ray pairing matrix, a
    /// quotient (degree) matrix onto `Z^rank` and a section of it.
    pub fn picard_lattice(&self) -> Result<PicData> {
        let m = self.rays.len();
        let n = self.dim;
        if m < n {
            return Err(Error::RaysDoNotSpan);
        }
        let b: Vec<Vec<i64>> = self.rays.to_vec();
        let snf = smith_left_transform(b, m, n)?;
        let nonzero = snf.diag.iter().filter(|&&d| d != 0).count();
        if nonzero < n {
            return Err(Error::RaysDoNotSpan);
        }
        for &d in &snf.diag {
            if d != 0 && d.abs() != 1 {
                return Err(Error::TorsionPicard(d));
            }
        }
        let rank = m - n;
        let ray_pairing: Vec<Vec<i64>> = (0..n)
            .map(|j| (0..m).map(|i| self.rays[i][j]).collect())
            .collect();
        let degree_matrix: Vec<Vec<i64>> = (n..m).map(|i| snf.u[i].clone()).collect();
        let section_matrix: Vec<Vec<i64>> = (n..m)
            .map(|k| (0..m).map(|i| snf.u_inv[i][k]).collect())
            .collect();
        let pic = PicData {
            rank,
            ray_pairing,
            section_matrix,
            degree_matrix,
        };
        debug_assert!(pic.section_round_trip_is_identity());
        Ok(pic)
    }
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction-free determinant; `None` when the matrix is singular in a way
/// the elimination detects early (still returns Some(0) on plain rank loss).
fn det_bareiss(mut m: Vec<Vec<i128>>) -> Option<i128> {
    let n = m.len();
    if n == 0 {
        return Some(1);
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(s) => {
                    m.swap(k, s);
                    sign = -sign;
                }
                None => return Some(0),
            }
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                m[i][j] = (m[k][k] * m[i][j] - m[i][k] * m[k][j]) / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    Some(sign * m[n - 1][n - 1])
}

/// Validation outcome; violations are reported, never thrown.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub smooth: bool,
    pub complete: bool,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.smooth && self.complete
    }
}

/// Concrete Picard coordinates: `rank = |rays| - dim`, the `n x |rays|`
/// pairing matrix of the ray generators, a degree (quotient) matrix
/// `Z^{rays} -> Z^rank`, and a section of it whose rows span a complement of
/// the character image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PicData {
    pub rank: usize,
    pub ray_pairing: Vec<Vec<i64>>,
    pub section_matrix: Vec<Vec<i64>>,
    pub degree_matrix: Vec<Vec<i64>>,
}

impl PicData {
    /// Picard class of a multidegree in the chosen coordinates.
    pub fn degree_class(&self, d: &[u32]) -> Vec<i64> {
        self.degree_matrix
            .iter()
            .map(|row| row.iter().zip(d).map(|(c, x)| c * i64::from(*x)).sum())
            .collect()
    }

    /// `degree_matrix * section_matrix^T` must be the identity on `Z^rank`.
    pub fn section_round_trip_is_identity(&self) -> bool {
        for (a, qrow) in self.degree_matrix.iter().enumerate() {
            for (b, srow) in self.section_matrix.iter().enumerate() {
                let v: i64 = qrow.iter().zip(srow).map(|(x, y)| x * y).sum();
                if v != i64::from(a == b) {
                    return false;
                }
            }
        }
        true
    }
}

/// Minimal subsets of the ray set contained in no cone. Only the minimal
/// elements are stored; the full obstruction family is their upward closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimitiveCollections {
    pub minimal_collections: Vec<Vec<usize>>,
}

impl PrimitiveCollections {
    /// True iff no member is contained in `support`.
    pub fn admits_support(&self, support: &[usize]) -> bool {
        !self
            .minimal_collections
            .iter()
            .any(|c| c.iter().all(|r| support.contains(r)))
    }
}

struct Snf {
    diag: Vec<i64>,
    u: Vec<Vec<i64>>,
    u_inv: Vec<Vec<i64>>,
}

/// Diagonalise an `mrows x ncols` integer matrix by row and column
/// operations, tracking the left transform `u` and its inverse. All
/// arithmetic is checked; pathological coefficient growth surfaces as an
/// error instead of wrapping.
fn smith_left_transform(b: Vec<Vec<i64>>, mrows: usize, ncols: usize) -> Result<Snf> {
    let overflow = || Error::FanDocument("coefficient overflow in lattice reduction".into());
    let mut b: Vec<Vec<i128>> = b
        .into_iter()
        .map(|row| row.into_iter().map(i128::from).collect())
        .collect();
    let mut u: Vec<Vec<i128>> = (0..mrows)
        .map(|i| (0..mrows).map(|j| i128::from(i == j)).collect())
        .collect();
    let mut u_inv = u.clone();

    fn swap_rows(
        b: &mut [Vec<i128>],
        u: &mut [Vec<i128>],
        ui: &mut [Vec<i128>],
        i: usize,
        j: usize,
    ) {
        b.swap(i, j);
        u.swap(i, j);
        for row in ui.iter_mut() {
            row.swap(i, j);
        }
    }
    // row_i += c * row_j (and the inverse column operation on u_inv)
    fn add_row(
        b: &mut [Vec<i128>],
        u: &mut [Vec<i128>],
        ui: &mut [Vec<i128>],
        i: usize,
        j: usize,
        c: i128,
    ) -> Option<()> {
        for k in 0..b[0].len() {
            b[i][k] = b[i][k].checked_add(c.checked_mul(b[j][k])?)?;
        }
        for k in 0..u[0].len() {
            u[i][k] = u[i][k].checked_add(c.checked_mul(u[j][k])?)?;
        }
        for row in ui.iter_mut() {
            row[j] = row[j].checked_sub(c.checked_mul(row[i])?)?;
        }
        Some(())
    }
    fn neg_row(b: &mut [Vec<i128>], u: &mut [Vec<i128>], ui: &mut [Vec<i128>], i: usize) {
        for x in b[i].iter_mut() {
            *x = -*x;
        }
        for x in u[i].iter_mut() {
            *x = -*x;
        }
        for row in ui.iter_mut() {
            row[i] = -row[i];
        }
    }

    let mut diag = Vec::new();
    let mut t = 0usize;
    while t < mrows.min(ncols) {
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..mrows {
            for j in t..ncols {
                if b[i][j] != 0
                    && pivot
                        .map(|(pi, pj)| b[i][j].abs() < b[pi][pj].abs())
                        .unwrap_or(true)
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else {
            break;
        };
        if pi != t {
            swap_rows(&mut b, &mut u, &mut u_inv, t, pi);
        }
        if pj != t {
            for row in b.iter_mut() {
                row.swap(t, pj);
            }
        }
        loop {
            let mut clean = true;
            for i in (t + 1)..mrows {
                if b[i][t] != 0 {
                    let q = b[i][t].div_euclid(b[t][t]);
                    add_row(&mut b, &mut u, &mut u_inv, i, t, -q).ok_or_else(overflow)?;
                    if b[i][t] != 0 {
                        swap_rows(&mut b, &mut u, &mut u_inv, t, i);
                        clean = false;
                    }
                }
            }
            for j in (t + 1)..ncols {
                if b[t][j] != 0 {
                    let q = b[t][j].div_euclid(b[t][t]);
                    for row in b.iter_mut() {
                        let v = row[t].checked_mul(q).ok_or_else(overflow)?;
                        row[j] = row[j].checked_sub(v).ok_or_else(overflow)?;
                    }
                    if b[t][j] != 0 {
                        for row in b.iter_mut() {
                            row.swap(t, j);
                        }
                        clean = false;
                    }
                }
            }
            if clean {
                break;
            }
        }
        if b[t][t] < 0 {
            neg_row(&mut b, &mut u, &mut u_inv, t);
        }
        diag.push(i64::try_from(b[t][t]).map_err(|_| overflow())?);
        t += 1;
    }
    let back = |m: Vec<Vec<i128>>| -> Result<Vec<Vec<i64>>> {
        m.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|x| i64::try_from(x).map_err(|_| overflow()))
                    .collect()
            })
            .collect()
    };
    Ok(Snf {
        diag,
        u: back(u)?,
        u_inv: back(u_inv)?,
    })
}

/// Built-in fan library: `p1`, `p2`, `p1xp1`, `hirzebruch:a` for small `a`,
/// `dp6`.
pub fn library_fan(name: &str) -> Result<Fan> {
    match name {
        "p1" => Fan::new(1, vec![vec![1], vec![-1]], vec![vec![0], vec![1]], "p1"),
        "p2" => Fan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, -1]],
            vec![vec![0, 1], vec![1, 2], vec![0, 2]],
            "p2",
        ),
        "p1xp1" => Fan::new(
            2,
            vec![vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]],
            vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]],
            "p1xp1",
        ),
        "dp6" => Fan::new(
            2,
            vec![
                vec![1, 0],
                vec![1, 1],
                vec![0, 1],
                vec![-1, 0],
                vec![-1, -1],
                vec![0, -1],
            ],
            vec![
                vec![0, 1],
                vec![1, 2],
                vec![2, 3],
                vec![3, 4],
                vec![4, 5],
                vec![5, 0],
            ],
            "dp6",
        ),
        _ => {
            if let Some(a) = name.strip_prefix("hirzebruch:") {
                let a: i64 = a
                    .parse()
                    .map_err(|_| Error::Config(format!("bad Hirzebruch parameter '{}'", a)))?;
                if !(0..=12).contains(&a) {
                    return Err(Error::Config(format!(
                        "Hirzebruch parameter {} out of range 0..=12",
                        a
                    )));
                }
                Fan::new(
                    2,
                    vec![vec![1, 0], vec![0, 1], vec![-1, a], vec![0, -1]],
                    vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
                    format!("hirzebruch:{}", a),
                )
            } else {
                Err(Error::Config(format!("unknown fan '{}'", name)))
            }
        }
    }
}

/// Resolve a fan by library name or file path.
pub fn resolve_fan(name_or_path: &str) -> Result<Fan> {
    match library_fan(name_or_path) {
        Ok(fan) => Ok(fan),
        Err(_) => {
            let text = std::fs::read_to_string(name_or_path).map_err(|e| {
                Error::Config(format!("cannot read fan '{}': {}", name_or_path, e))
            })?;
            Fan::parse(&text)
        }
    }
}

pub const LIBRARY_FANS: [&str; 8] = [
    "p1",
    "p2",
    "p1xp1",
    "hirzebruch:0",
    "hirzebruch:1",
    "hirzebruch:2",
    "hirzebruch:3",
    "dp6",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn parse_examples() {
        let p2 = Fan::parse(
            r#"
dim = 2
rays = [[1,0],[0,1],[-1,-1]]
max_cones = [[0,1],[1,2],[0,2]]
label = "p2"
"#,
        )
        .unwrap();
        assert_eq!(p2, library_fan("p2").unwrap());
        let report = p2.validate();
        assert!(report.smooth && report.complete, "{:?}", report.violations);

        let p1 = Fan::parse("dim = 1\nrays = [[1],[-1]]\nmax_cones = [[0],[1]]\n").unwrap();
        assert!(p1.validate().is_valid());

        let err = Fan::parse("dim = 2\nrays = [[1,0],[0,2]]\nmax_cones = [[0,1]]\n");
        assert!(matches!(err, Err(Error::NonPrimitiveRay { index: 1, .. })));
    }

    #[test]
    fn document_round_trip() {
        for name in LIBRARY_FANS {
            let fan = library_fan(name).unwrap();
            let doc = fan.to_document();
            assert_eq!(Fan::parse(&doc).unwrap(), fan, "round trip for {}", name);
        }
    }

    #[test]
    fn validation_detects_missing_cone() {
        let fan = Fan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, -1]],
            vec![vec![0, 1], vec![1, 2]],
            "broken",
        )
        .unwrap();
        let report = fan.validate();
        assert!(report.smooth);
        assert!(!report.complete);
    }

    #[test]
    fn validation_detects_hidden_ray() {
        let fan = Fan::new(
            2,
            vec![vec![1, 0], vec![1, 1], vec![0, 1]],
            vec![vec![0, 2]],
            "hidden",
        )
        .unwrap();
        let report = fan.validate();
        assert!(report.smooth);
        assert!(!report.complete);
        assert!(report.violations.iter().any(|v| v.contains("ray 1")));
    }

    #[test]
    fn library_is_valid_and_mutations_are_rejected() {
        for name in LIBRARY_FANS {
            let fan = library_fan(name).unwrap();
            assert!(fan.validate().is_valid(), "{} should validate", name);

            for drop in 0..fan.max_cones().len() {
                let cones: Vec<Vec<usize>> = fan
                    .max_cones()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, c)| c.clone())
                    .collect();
                if cones.is_empty() {
                    continue;
                }
                let mutant = Fan::new(fan.dim(), fan.rays().to_vec(), cones, "mut");
                let rejected = match mutant {
                    Err(_) => true,
                    Ok(f) => !f.validate().is_valid(),
                };
                assert!(
                    rejected,
                    "{}: dropping cone {} must be rejected",
                    name, drop
                );
            }

            for flip in 0..fan.num_rays() {
                let mut rays = fan.rays().to_vec();
                for x in rays[flip].iter_mut() {
                    *x = -*x;
                }
                let mutant = Fan::new(fan.dim(), rays, fan.max_cones().to_vec(), "mut");
                let rejected = match mutant {
                    Err(_) => true,
                    Ok(f) => !f.validate().is_valid(),
                };
                assert!(
                    rejected,
                    "{}: negating ray {} must be rejected",
                    name, flip
                );
            }

            for dup in 0..fan.num_rays() {
                let mut rays = fan.rays().to_vec();
                rays.push(rays[dup].clone());
                let mutant = Fan::new(fan.dim(), rays, fan.max_cones().to_vec(), "mut");
                assert!(
                    mutant.is_err(),
                    "{}: duplicating ray {} must fail",
                    name,
                    dup
                );
            }
        }
    }

    #[test]
    fn picard_ranks() {
        assert_eq!(library_fan("p2").unwrap().picard_lattice().unwrap().rank, 1);
        assert_eq!(
            library_fan("p1xp1").unwrap().picard_lattice().unwrap().rank,
            2
        );
        assert_eq!(
            library_fan("hirzebruch:1")
                .unwrap()
                .picard_lattice()
                .unwrap()
                .rank,
            2
        );
        assert_eq!(library_fan("p1").unwrap().picard_lattice().unwrap().rank, 1);
        assert_eq!(
            library_fan("dp6").unwrap().picard_lattice().unwrap().rank,
            4
        );
    }

    #[test]
    fn section_round_trip_identity() {
        for name in LIBRARY_FANS {
            let fan = library_fan(name).unwrap();
            let pic = fan.picard_lattice().unwrap();
            assert!(
                pic.section_round_trip_is_identity(),
                "round trip fails for {}",
                name
            );
            assert_eq!(pic.rank, fan.num_rays() - fan.dim());
        }
    }

    #[test]
    fn degree_class_kills_character_rows() {
        let fan = library_fan("p2").unwrap();
        let pic = fan.picard_lattice().unwrap();
        assert_ne!(pic.degree_class(&[1, 1, 1]), vec![0]);
        for j in 0..fan.dim() {
            let row: Vec<i64> = (0..fan.num_rays()).map(|i| fan.rays()[i][j]).collect();
            let img: Vec<i64> = pic
                .degree_matrix
                .iter()
                .map(|q| q.iter().zip(&row).map(|(a, b)| a * b).sum())
                .collect();
            assert!(img.iter().all(|&x| x == 0), "character row {} survives", j);
        }
    }

    #[test]
    fn primitive_collections_examples() {
        let p2 = library_fan("p2").unwrap();
        assert_eq!(
            p2.primitive_collections().minimal_collections,
            vec![vec![0, 1, 2]]
        );

        let p1xp1 = library_fan("p1xp1").unwrap();
        let mut got = p1xp1.primitive_collections().minimal_collections;
        got.sort();
        assert_eq!(got, vec![vec![0, 1], vec![2, 3]]);

        let dp6 = library_fan("dp6").unwrap();
        let got = dp6.primitive_collections().minimal_collections;
        assert_eq!(got.len(), 9);
        assert!(got.iter().all(|c| c.len() == 2));

        let f1 = library_fan("hirzebruch:1").unwrap();
        let mut got = f1.primitive_collections().minimal_collections;
        got.sort();
        assert_eq!(got, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn cone_supported_examples() {
        let p2 = library_fan("p2").unwrap();
        assert!(p2.cone_supported(&[0, 1]));
        assert!(!p2.cone_supported(&[0, 1, 2]));
        assert!(p2.cone_supported(&[]));
    }

    #[test]
    fn cone_supported_agrees_with_collections() {
        for name in LIBRARY_FANS {
            let fan = library_fan(name).unwrap();
            let pc = fan.primitive_collections();
            let m = fan.num_rays();
            for mask in 0u32..(1u32 << m) {
                let s: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
                assert_eq!(
                    fan.cone_supported(&s),
                    pc.admits_support(&s),
                    "{}: disagreement at {:?}",
                    name,
                    s
                );
            }
        }
    }

    #[test]
    fn admissibility_examples() {
        let p2 = library_fan("p2").unwrap();
        assert!(p2.degree_admissible(&[1, 1, 1]).unwrap());
        assert!(!p2.degree_admissible(&[1, 2, 1]).unwrap());
        let p1 = library_fan("p1").unwrap();
        assert!(p1.degree_admissible(&[3, 3]).unwrap());
        assert!(!p1.degree_admissible(&[1, 2]).unwrap());
    }

    #[test]
    fn admissibility_is_a_monoid() {
        let fan = library_fan("hirzebruch:2").unwrap();
        let mut admissible = Vec::new();
        for a in 0..4u32 {
            for b in 0..4u32 {
                for c in 0..4u32 {
                    for d in 0..4u32 {
                        if fan.degree_admissible(&[a, b, c, d]).unwrap() {
                            admissible.push([a, b, c, d]);
                        }
                    }
                }
            }
        }
        assert!(admissible.len() > 1);
        for x in &admissible {
            for y in &admissible {
                let sum: Vec<u32> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                assert!(fan.degree_admissible(&sum).unwrap());
            }
        }
    }

    #[test]
    fn log_anticanonical_examples() {
        let p2 = library_fan("p2").unwrap();
        assert_eq!(
            p2.log_anticanonical_degree(&[1, 1, 1], &[1, 1, 1]).unwrap(),
            rat(3, 1)
        );
        let p1 = library_fan("p1").unwrap();
        assert_eq!(
            p1.log_anticanonical_degree(&[2, 2], &[2, 2]).unwrap(),
            rat(2, 1)
        );
        assert_eq!(
            p1.log_anticanonical_degree(&[2, 3], &[4, 3]).unwrap(),
            rat(3, 1)
        );
    }
}
