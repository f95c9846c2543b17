//! Homogeneous norms on step-two Carnot groups.
//!
//! Four families are supported:
//!
//! * Korányi, `((|x|² + |y|²)² + z²)^{1/4}` on `H^n`;
//! * Lee–Naor, `sqrt(‖q‖_K² + |(x, y)|²)` on `H^n`;
//! * `N_{p,a}(q) = max(‖(x, y)‖_p, a·sqrt|z|)` on `H^n`, `0 < a ≤ n^{-1/2}`;
//! * Hebisch–Sikora, the gauge of a Euclidean ball of radius `r`, on any
//!   step-two group. It is a norm for `r` below a threshold `r₀` estimated
//!   by [`hs_r0`].
//!
//! Each norm `N` induces the left-invariant distance `d(p, q) = N(p⁻¹·q)`.
//! The module also carries the diagnostics: sampled norm axioms, the
//! horizontal strict convexity scan, and the verifier for the inequality
//! chain that proves strict convexity of the Hebisch–Sikora norm.

use rand::Rng;

use crate::error::{invalid, precondition, Error, Result};
use crate::group::{GroupPoint, GroupSpec, DEFAULT_HORIZONTAL_TOL};
use crate::linalg;
use crate::report::{fmt_pair, fmt_point, CheckReport, CheckRow};
use crate::rng::{self, streams};

/// Samples used for the `r₀` estimate attached to every Hebisch–Sikora norm.
pub const R0_SAMPLES: usize = 20_000;
/// Seed used for the `r₀` estimate attached to every Hebisch–Sikora norm.
pub const R0_SEED: u64 = 0;
/// Inflation applied to the sampled supremum of the `P₁` ratio.
pub const C1_SAFETY: f64 = 1.05;
/// Absolute defect below which `N(q·q') = N(q) + N(q')` counts as equality.
pub const DEFAULT_EQUALITY_TOL: f64 = 1e-9;
/// Minimum misalignment for a pair to count as off every horizontal line.
pub const DEFAULT_SEPARATION: f64 = 0.05;

const HS_MAX_ITER: usize = 200;
const HS_REL_TOL: f64 = 1e-13;
/// Unit pairs closer than this are skipped in the `C₁` estimate.
const C1_MIN_SEPARATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Koranyi,
    LeeNaor,
    /// `p` may be `f64::INFINITY`.
    PMax { p: f64, a: f64 },
    HebischSikora { r: f64 },
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::Koranyi => "koranyi",
            NormKind::LeeNaor => "lee-naor",
            NormKind::PMax { .. } => "pmax",
            NormKind::HebischSikora { .. } => "hs",
        }
    }
}

/// A norm bound to the group it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec {
    kind: NormKind,
    group: GroupSpec,
    r0_estimate: Option<f64>,
}

impl NormSpec {
    pub fn new(kind: NormKind, group: GroupSpec) -> Result<Self> {
        let heis_n = match group.kind() {
            crate::group::GroupKind::Heisenberg { n } => Some(*n),
            _ => None,
        };
        let mut r0_estimate = None;
        match kind {
            NormKind::Koranyi | NormKind::LeeNaor => {
                if heis_n.is_none() {
                    return Err(Error::NormGroupMismatch {
                        norm: kind.name(),
                        reason: "the formula is specific to the Heisenberg group".into(),
                    });
                }
            }
            NormKind::PMax { p, a } => {
                let n = heis_n.ok_or_else(|| Error::NormGroupMismatch {
                    norm: kind.name(),
                    reason: "the formula is specific to the Heisenberg group".into(),
                })?;
                if !(p >= 1.0) {
                    return Err(invalid(format!("pmax exponent p must lie in [1, inf], got {p}")));
                }
                let amax = (n as f64).powf(-0.5);
                if !(a > 0.0 && a <= amax) {
                    return Err(invalid(format!(
                        "pmax requires 0 < a <= n^(-1/2) = {amax}, got a = {a}"
                    )));
                }
            }
            NormKind::HebischSikora { r } => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(invalid(format!("Hebisch-Sikora radius must be positive, got {r}")));
                }
                r0_estimate = Some(hs_r0(&group, R0_SAMPLES, R0_SEED)?);
            }
        }
        Ok(NormSpec {
            kind,
            group,
            r0_estimate,
        })
    }

    pub fn koranyi(group: GroupSpec) -> Result<Self> {
        Self::new(NormKind::Koranyi, group)
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// The `r₀` estimate, for Hebisch–Sikora norms.
    pub fn r0_estimate(&self) -> Option<f64> {
        self.r0_estimate
    }

    /// Set for Hebisch–Sikora norms with `r ≥ r₀`, where the norm axioms are
    /// not guaranteed.
    pub fn beyond_r0(&self) -> bool {
        match (self.kind, self.r0_estimate) {
            (NormKind::HebischSikora { r }, Some(r0)) => r >= r0,
            _ => false,
        }
    }

    /// Whether the norm is known to be horizontally strictly convex:
    /// Korányi, Lee–Naor, and Hebisch–Sikora below `r₀`.
    pub fn is_hsc(&self) -> bool {
        match self.kind {
            NormKind::Koranyi | NormKind::LeeNaor => true,
            NormKind::PMax { .. } => false,
            NormKind::HebischSikora { .. } => !self.beyond_r0(),
        }
    }

    pub fn eval(&self, p: &GroupPoint) -> Result<f64> {
        self.group.check(p)?;
        Ok(self.value(p))
    }

    pub(crate) fn value(&self, p: &GroupPoint) -> f64 {
        let (x, z) = self.group.split(p);
        match self.kind {
            NormKind::Koranyi => koranyi(x, z[0]),
            NormKind::LeeNaor => {
                let h2 = linalg::norm_sq(x);
                (h2.hypot(z[0]) + h2).sqrt()
            }
            NormKind::PMax { p, a } => lp_norm(x, p).max(a * z[0].abs().sqrt()),
            NormKind::HebischSikora { r } => hs_gauge(&self.group, r, p),
        }
    }

    /// `d(p, q) = N(p⁻¹·q)`.
    pub fn distance(&self, p: &GroupPoint, q: &GroupPoint) -> Result<f64> {
        self.group.check(p)?;
        self.group.check(q)?;
        Ok(self.dist(p, q))
    }

    pub(crate) fn dist(&self, p: &GroupPoint, q: &GroupPoint) -> f64 {
        self.value(&self.group.between(p, q))
    }

    /// `N(p) + N(q) − N(p·q)`; nonnegative for a norm, zero exactly on the
    /// equality cases of the triangle inequality.
    pub fn hsc_defect(&self, p: &GroupPoint, q: &GroupPoint) -> Result<f64> {
        self.group.check(p)?;
        self.group.check(q)?;
        if p.is_zero() || q.is_zero() {
            return Err(invalid("defect requires points different from the identity"));
        }
        Ok(self.defect(p, q))
    }

    pub(crate) fn defect(&self, p: &GroupPoint, q: &GroupPoint) -> f64 {
        self.value(p) + self.value(q) - self.value(&self.group.mul(p, q))
    }
}

fn koranyi(x: &[f64], z: f64) -> f64 {
    linalg::norm_sq(x).hypot(z).sqrt()
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|c| c.abs()).sum()
    } else if p == 2.0 {
        linalg::norm(x)
    } else if p.is_infinite() {
        x.iter().fold(0.0, |m, c| m.max(c.abs()))
    } else {
        let m = x.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * x.iter().map(|c| (c.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// The Hebisch–Sikora gauge `inf { t > 0 : δ_{1/t}(p) ∈ B(0, r) }`.
pub fn hs_norm(group: &GroupSpec, r: f64, p: &GroupPoint) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("Hebisch-Sikora radius must be positive, got {r}")));
    }
    group.check(p)?;
    Ok(hs_gauge(group, r, p))
}

/// Squared Euclidean norm of `δ_{1/t}(p)`. Each coordinate scales as
/// `t^{-σ_i}`, so this is continuous and strictly decreasing in `t` for
/// `p ≠ e`, which makes the gauge the unique root of `F(t) = r²`.
fn dilated_norm_sq(weights: &[u8], c: &[f64], t: f64) -> f64 {
    let inv = 1.0 / t;
    let inv2 = inv * inv;
    c.iter()
        .zip(weights)
        .map(|(v, &w)| {
            let s = if w == 1 { v * inv } else { v * inv2 };
            s * s
        })
        .sum()
}

fn hs_gauge(group: &GroupSpec, r: f64, p: &GroupPoint) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    let c = p.coords();
    let w = group.weights();
    let r2 = r * r;
    let e = linalg::norm(c);
    let t0 = e / (r * e.max(1.0));
    // Bracket: F(lo) ≥ r², F(hi) ≤ r².
    let (mut lo, mut hi) = (t0, t0);
    while dilated_norm_sq(w, c, lo) < r2 {
        lo *= 0.5;
    }
    while dilated_norm_sq(w, c, hi) > r2 {
        hi *= 2.0;
    }
    for _ in 0..HS_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dilated_norm_sq(w, c, mid) > r2 {
            lo = mid;
        } else {
            hi = mid;
        }
        // Bisect to machine precision; the stopping tolerance only guards
        // against pathological inputs.
        if hi - lo <= HS_REL_TOL * hi * 1e-3 {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Sampling helpers

/// A random point `δ_λ(u)` with `u` uniform in the cube and log-uniform `λ`.
fn sample_point<R: Rng>(rng: &mut R, g: &GroupSpec) -> GroupPoint {
    loop {
        let u = GroupPoint::new(rng::uniform_vec(rng, g.dim(), -1.0, 1.0));
        if u.is_zero() {
            continue;
        }
        let lam = rng::log_uniform(rng, 0.1, 10.0);
        return g.dil(lam, &u);
    }
}

fn horizontal_point(g: &GroupSpec, x: &[f64], z: &[f64]) -> GroupPoint {
    let mut c = x.to_vec();
    c.extend_from_slice(z);
    debug_assert_eq!(c.len(), g.dim());
    GroupPoint::new(c)
}

// ---------------------------------------------------------------------------
// Norm axioms

/// Sampled check of definiteness, symmetry, the triangle inequality and
/// homogeneity. Symmetry and homogeneity slacks are relative to
/// `max(1, N)`; triangle slack is the absolute defect.
pub fn check_norm_axioms(norm: &NormSpec, sample_count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let g = norm.group();
    let mut rng = rng::stream(seed, streams::NORM_AXIOMS);
    let mut report = CheckReport::new(format!("norm axioms: {}", norm.name()));
    if let Some(r0) = norm.r0_estimate() {
        report.notes.push(format!("r0 estimate {r0:.6}"));
        if norm.beyond_r0() {
            report.notes.push("WARNING: r >= r0, norm axioms are not guaranteed".into());
        }
    }

    let mut definite = CheckRow::new("definiteness");
    let ne = norm.value(&g.identity());
    definite.observe(-ne, ne == 0.0, || fmt_point(&g.identity()));
    let mut symmetry = CheckRow::new("symmetry");
    let mut triangle = CheckRow::new("triangle");
    let mut homogeneity = CheckRow::new("homogeneity");
    let mut unit_dilation = CheckRow::new("homogeneity_unit");

    for i in 0..sample_count {
        let p = sample_point(&mut rng, g);
        let q = if i % 8 == 7 {
            // Equality configurations of the triangle inequality.
            let s = rng::log_uniform(&mut rng, 0.1, 10.0);
            let mut c: Vec<f64> = g.split(&p).0.iter().map(|v| v * s).collect();
            c.resize(g.dim(), 0.0);
            let mut pc: Vec<f64> = g.split(&p).0.to_vec();
            pc.resize(g.dim(), 0.0);
            let ph = GroupPoint::new(pc);
            let qh = GroupPoint::new(c);
            let d = norm.defect(&ph, &qh);
            triangle.observe(d, d >= -tol, || fmt_pair(&ph, &qh));
            sample_point(&mut rng, g)
        } else {
            sample_point(&mut rng, g)
        };
        let np = norm.value(&p);
        definite.observe(np, np > 0.0, || fmt_point(&p));

        let ni = norm.value(&g.inv(&p));
        let s = -(ni - np).abs() / np.max(1.0);
        symmetry.observe(s, s >= -tol, || fmt_point(&p));

        let d = norm.defect(&p, &q);
        triangle.observe(d, d >= -tol, || fmt_pair(&p, &q));

        let lam = rng::log_uniform(&mut rng, 1e-2, 1e2);
        let nl = norm.value(&g.dil(lam, &p));
        let h = -(nl - lam * np).abs() / (lam * np).max(1.0);
        homogeneity.observe(h, h >= -tol, || format!("{} lambda={lam:e}", fmt_point(&p)));

        let n1 = norm.value(&g.dil(1.0, &p));
        let u = -(n1 - np).abs();
        unit_dilation.observe(u, n1 == np, || fmt_point(&p));
    }
    report.rows = vec![definite, symmetry, triangle, homogeneity, unit_dilation];
    Ok(report)
}

// ---------------------------------------------------------------------------
// Structure constants and r0

/// Constants bounding the second-layer part of the group law:
/// `‖P₁(x₁, x₂)‖ ≤ C₁ ‖x₁‖ ‖x₂‖ ‖x₁/‖x₁‖ − x₂/‖x₂‖‖`, and `C₂` for the
/// higher-order part, which vanishes identically in step two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstants {
    /// Sampled supremum of `‖P₁(u₁, u₂)‖ / ‖u₁ − u₂‖` over unit pairs.
    pub c1_sampled: f64,
    /// `c1_sampled` inflated by [`C1_SAFETY`].
    pub c1: f64,
    pub c2: f64,
}

fn p1_ratio(g: &GroupSpec, u1: &[f64], u2: &[f64]) -> Option<f64> {
    let sep = linalg::norm(&linalg::sub(u1, u2));
    if !(sep >= C1_MIN_SEPARATION) {
        return None;
    }
    Some(linalg::norm(&g.bracket_term(u1, u2)) / sep)
}

fn normalize(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = linalg::norm(&v);
    (n > 0.0).then(|| linalg::scale(&v, 1.0 / n))
}

/// Estimates `C₁` by sampling unit pairs (uniform pairs and near-coincident
/// pairs, where the supremum is approached) followed by a local hill climb.
/// `C₂ = 0` because the groups handled here have step two.
pub fn estimate_c1_c2(group: &GroupSpec, sample_count: usize, seed: u64) -> Result<StructureConstants> {
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let n1 = group.horizontal_dim();
    let mut rng = rng::stream(seed, streams::C1_ESTIMATE);
    let mut best = 0.0f64;
    let mut best_pair: Option<(Vec<f64>, Vec<f64>)> = None;
    for i in 0..sample_count {
        let u1 = rng::unit_vec(&mut rng, n1);
        let u2 = if i % 2 == 0 {
            rng::unit_vec(&mut rng, n1)
        } else {
            let eps = rng::log_uniform(&mut rng, 1e-2, 1.0);
            let w = rng::unit_vec(&mut rng, n1);
            match normalize(u1.iter().zip(&w).map(|(a, b)| a + eps * b).collect()) {
                Some(v) => v,
                None => continue,
            }
        };
        if let Some(ratio) = p1_ratio(group, &u1, &u2) {
            if ratio > best {
                best = ratio;
                best_pair = Some((u1, u2));
            }
        }
    }
    if let Some((mut u1, mut u2)) = best_pair {
        let mut step = 0.1;
        for _ in 0..2000 {
            let d1 = rng::unit_vec(&mut rng, n1);
            let d2 = rng::unit_vec(&mut rng, n1);
            let c1 = normalize(u1.iter().zip(&d1).map(|(a, b)| a + step * b).collect());
            let c2 = normalize(u2.iter().zip(&d2).map(|(a, b)| a + step * b).collect());
            if let (Some(c1), Some(c2)) = (c1, c2) {
                match p1_ratio(group, &c1, &c2) {
                    Some(ratio) if ratio > best => {
                        best = ratio;
                        u1 = c1;
                        u2 = c2;
                        continue;
                    }
                    _ => {}
                }
            }
            step = (step * 0.97).max(1e-6);
        }
    }
    Ok(StructureConstants {
        c1_sampled: best,
        c1: best * C1_SAFETY,
        c2: 0.0,
    })
}

/// `r₀ = min{1, 2/(√5 C₁), 1/(6 C₂)}`, a `C` term counting as `+∞` when
/// its constant is zero.
pub fn r0_from_constants(c: &StructureConstants) -> f64 {
    let mut r0 = 1.0f64;
    if c.c1 > 0.0 {
        r0 = r0.min(2.0 / (5f64.sqrt() * c.c1));
    }
    if c.c2 > 0.0 {
        r0 = r0.min(1.0 / (6.0 * c.c2));
    }
    r0
}

/// Radius below which the Hebisch–Sikora gauge is a horizontally strictly
/// convex norm, computed from the estimated structure constants.
pub fn hs_r0(group: &GroupSpec, sample_count: usize, seed: u64) -> Result<f64> {
    Ok(r0_from_constants(&estimate_c1_c2(group, sample_count, seed)?))
}

// ---------------------------------------------------------------------------
// Inequality chain for the Hebisch–Sikora triangle inequality

/// Slacks (right side minus left side) of each inequality in the chain for
/// one sample `(p₁, p₂, t)` with `‖p₁‖ = ‖p₂‖ = r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofSlacks {
    /// `‖tx₁+(1−t)x₂‖² + t(1−t)(1+t(1−t))‖P₁(x₁,x₂)‖² ≤ (t‖x₁‖+(1−t)‖x₂‖)²`
    pub split1_first: f64,
    /// `(t‖x₁‖+(1−t)‖x₂‖)² ≤ t‖x₁‖² + (1−t)‖x₂‖²`
    pub split1_second: f64,
    /// `(1+t(1−t))‖w‖² ≤ (t‖y₁‖+(1−t)‖y₂‖)²`
    pub split2_first: f64,
    /// `(t‖y₁‖+(1−t)‖y₂‖)² ≤ t‖y₁‖² + (1−t)‖y₂‖²`
    pub split2_second: f64,
    /// Sum of the split left sides `≤ r²`.
    pub readytosplit: f64,
    /// `‖δ_t(p₁)·δ_{1−t}(p₂)‖² ≤ r²`
    pub new_euclidean: f64,
}

impl ProofSlacks {
    pub const NAMES: [&'static str; 6] = [
        "split1_first",
        "split1_second",
        "split2_first",
        "split2_second",
        "readytosplit",
        "new_euclidean",
    ];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.split1_first,
            self.split1_second,
            self.split2_first,
            self.split2_second,
            self.readytosplit,
            self.new_euclidean,
        ]
    }
}

/// Evaluates every inequality of the chain at `(p₁, p₂, t)`.
pub fn hs_proof_slacks(group: &GroupSpec, r: f64, p1: &GroupPoint, p2: &GroupPoint, t: f64) -> Result<ProofSlacks> {
    group.check(p1)?;
    group.check(p2)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid(format!("t must lie in (0, 1), got {t}")));
    }
    let (x1, y1) = group.split(p1);
    let (x2, y2) = group.split(p2);
    let s = 1.0 - t;
    let ts = t * s;
    let p1x = group.bracket_term(x1, x2);
    let p1sq = linalg::norm_sq(&p1x);
    // P₂ vanishes in step two, so w = δ_t(y₁) + δ_{1−t}(y₂).
    let w: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| t * t * a + s * s * b).collect();
    let wsq = linalg::norm_sq(&w);
    let mix: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| t * a + s * b).collect();
    let mixsq = linalg::norm_sq(&mix);
    let (nx1, nx2) = (linalg::norm(x1), linalg::norm(x2));
    let (ny1, ny2) = (linalg::norm(y1), linalg::norm(y2));

    let lhs1 = mixsq + ts * (1.0 + ts) * p1sq;
    let mid1 = (t * nx1 + s * nx2).powi(2);
    let rhs1 = t * nx1 * nx1 + s * nx2 * nx2;
    let lhs2 = (1.0 + ts) * wsq;
    let mid2 = (t * ny1 + s * ny2).powi(2);
    let rhs2 = t * ny1 * ny1 + s * ny2 * ny2;

    let prod = group.mul(&group.dil(t, p1), &group.dil(s, p2));
    Ok(ProofSlacks {
        split1_first: mid1 - lhs1,
        split1_second: rhs1 - mid1,
        split2_first: mid2 - lhs2,
        split2_second: rhs2 - mid2,
        readytosplit: r * r - (lhs1 + lhs2),
        new_euclidean: r * r - linalg::norm_sq(prod.coords()),
    })
}

/// Samples `(p₁, p₂)` uniformly on the Euclidean sphere of radius `r` and
/// `t` uniformly in `(0, 1)`, and reports the worst slack of each
/// inequality in the chain. Refuses `r ≥ r₀`.
pub fn verify_hs_proof_inequalities(
    group: &GroupSpec,
    r: f64,
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    if !(r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let r0 = hs_r0(group, R0_SAMPLES, R0_SEED)?;
    if r >= r0 {
        return Err(precondition(format!(
            "radius r = {r} is not below the estimated threshold r0 = {r0}"
        )));
    }
    let n = group.dim();
    let mut rng = rng::stream(seed, streams::HS_PROOF);
    let mut rows: Vec<CheckRow> = ProofSlacks::NAMES.iter().map(|s| CheckRow::new(*s)).collect();
    // Smallest new_euclidean slacks seen, for the near-equality listing.
    let mut near: Vec<(f64, String)> = Vec::new();
    for _ in 0..sample_count {
        let p1 = GroupPoint::new(linalg::scale(&rng::unit_vec(&mut rng, n), r));
        let p2 = GroupPoint::new(linalg::scale(&rng::unit_vec(&mut rng, n), r));
        let t = loop {
            let t: f64 = rng.random();
            if t > 0.0 {
                break t;
            }
        };
        let sl = hs_proof_slacks(group, r, &p1, &p2, t)?;
        for (row, v) in rows.iter_mut().zip(sl.as_array()) {
            row.observe(v, v >= -tol, || format!("{} t={t:.6}", fmt_pair(&p1, &p2)));
        }
        near.push((sl.new_euclidean, format!("{} t={t:.6}", fmt_pair(&p1, &p2))));
        if near.len() > 64 {
            near.sort_by(|a, b| a.0.total_cmp(&b.0));
            near.truncate(5);
        }
    }
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    near.truncate(5);
    let mut report = CheckReport::new(format!("hebisch-sikora inequality chain, r = {r}"));
    report.notes.push(format!("r0 estimate {r0:.6}"));
    for (v, w) in near {
        report.notes.push(format!("near equality: new_euclidean slack {v:e} at {w}"));
    }
    report.rows = rows;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Horizontal strict convexity scan

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HscScanOptions {
    /// Triangle defects below `-tol` are violations.
    pub tol: f64,
    /// Defects at most this count as equality.
    pub equality_tol: f64,
    /// Pairs with misalignment at least this are off every horizontal line.
    pub separation: f64,
}

impl Default for HscScanOptions {
    fn default() -> Self {
        HscScanOptions {
            tol: 1e-12,
            equality_tol: DEFAULT_EQUALITY_TOL,
            separation: DEFAULT_SEPARATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HscReport {
    pub norm: String,
    pub sample_count: usize,
    pub options: HscScanOptions,
    /// Smallest defect over pairs off every horizontal line (by at least
    /// the separation threshold).
    pub min_defect_nonhorizontal: f64,
    pub min_nonhorizontal_pair: Option<(GroupPoint, GroupPoint)>,
    /// Largest defect over pairs on a common horizontal ray.
    pub max_defect_horizontal_collinear: f64,
    pub max_collinear_pair: Option<(GroupPoint, GroupPoint)>,
    /// Pairs with defect below `-tol`, sorted by defect then coordinates.
    pub violations: Vec<(GroupPoint, GroupPoint, f64)>,
}

impl HscReport {
    /// Equality attained by a separated pair, if any: a witness that the
    /// norm is not horizontally strictly convex.
    pub fn counterexample(&self) -> Option<(&GroupPoint, &GroupPoint, f64)> {
        match &self.min_nonhorizontal_pair {
            Some((p, q)) if self.min_defect_nonhorizontal <= self.options.equality_tol => {
                Some((p, q, self.min_defect_nonhorizontal))
            }
            _ => None,
        }
    }

    /// No violations, equality on horizontal rays, strict inequality off them.
    pub fn hsc_consistent(&self) -> bool {
        self.violations.is_empty()
            && self.max_defect_horizontal_collinear <= self.options.equality_tol
            && self.min_defect_nonhorizontal > self.options.equality_tol
    }

    pub fn to_check_report(&self) -> CheckReport {
        let mut rep = CheckReport::new(format!("horizontal strict convexity: {}", self.norm));
        rep.notes.push(format!(
            "verdict: {}",
            if self.hsc_consistent() { "HSC-consistent" } else { "NOT horizontally strictly convex" }
        ));
        let pair = |p: &Option<(GroupPoint, GroupPoint)>| {
            p.as_ref().map(|(a, b)| fmt_pair(a, b)).unwrap_or_default()
        };
        let mut tri = CheckRow::new("triangle");
        tri.worst_slack = self.violations.first().map(|v| v.2).unwrap_or(0.0);
        tri.violations = self.violations.len();
        tri.passed = self.violations.is_empty();
        if let Some((p, q, _)) = self.violations.first() {
            tri.argmax_pair = fmt_pair(p, q);
        }
        let mut col = CheckRow::new("collinear_equality");
        col.worst_slack = self.options.equality_tol - self.max_defect_horizontal_collinear;
        col.argmax_pair = pair(&self.max_collinear_pair);
        col.passed = col.worst_slack >= 0.0;
        let mut sep = CheckRow::new("strict_off_line");
        sep.worst_slack = self.min_defect_nonhorizontal - self.options.equality_tol;
        sep.argmax_pair = pair(&self.min_nonhorizontal_pair);
        sep.passed = sep.worst_slack > 0.0;
        rep.rows = vec![tri, col, sep];
        rep
    }
}

/// Scale-free misalignment of a pair: the larger of each point's vertical
/// share `sqrt‖y‖ / (‖x‖ + sqrt‖y‖)` and the half-cosine gap
/// `(1 − cos∠(x, x'))/2` between the horizontal parts. Zero exactly on
/// common horizontal rays.
pub fn misalignment(g: &GroupSpec, p: &GroupPoint, q: &GroupPoint) -> f64 {
    let share = |pt: &GroupPoint| {
        let (x, y) = g.split(pt);
        let v = linalg::norm(y).sqrt();
        let h = linalg::norm(x);
        if v == 0.0 { 0.0 } else { v / (h + v) }
    };
    let (xp, _) = g.split(p);
    let (xq, _) = g.split(q);
    let (np, nq) = (linalg::norm(xp), linalg::norm(xq));
    let angle = if np == 0.0 || nq == 0.0 {
        0.5
    } else {
        (1.0 - (linalg::dot(xp, xq) / (np * nq)).clamp(-1.0, 1.0)) / 2.0
    };
    share(p).max(share(q)).max(angle)
}

pub fn hsc_scan(norm: &NormSpec, sample_count: usize, seed: u64, tol: f64) -> Result<HscReport> {
    hsc_scan_with(
        norm,
        sample_count,
        seed,
        HscScanOptions {
            tol,
            ..HscScanOptions::default()
        },
    )
}

/// Samples pairs from four families (generic, common horizontal ray,
/// common ray with opposite vertical offsets, horizontal with independent
/// directions), records `N(q) + N(q') − N(q·q')` and classifies each pair by
/// its misalignment.
pub fn hsc_scan_with(norm: &NormSpec, sample_count: usize, seed: u64, opts: HscScanOptions) -> Result<HscReport> {
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let g = norm.group();
    let (n1, n2) = (g.horizontal_dim(), g.vertical_dim());
    let mut rng = rng::stream(seed, streams::HSC_SCAN);
    let mut rep = HscReport {
        norm: norm.name().to_string(),
        sample_count,
        options: opts,
        min_defect_nonhorizontal: f64::INFINITY,
        min_nonhorizontal_pair: None,
        max_defect_horizontal_collinear: f64::NEG_INFINITY,
        max_collinear_pair: None,
        violations: Vec::new(),
    };
    for i in 0..sample_count {
        let (p, q) = match i % 4 {
            0 => (sample_point(&mut rng, g), sample_point(&mut rng, g)),
            1 => {
                let u = rng::unit_vec(&mut rng, n1);
                let s = rng::log_uniform(&mut rng, 0.1, 10.0);
                let sp = rng::log_uniform(&mut rng, 0.1, 10.0);
                let zero = vec![0.0; n2];
                (
                    horizontal_point(g, &linalg::scale(&u, s), &zero),
                    horizontal_point(g, &linalg::scale(&u, sp), &zero),
                )
            }
            2 => {
                let u = rng::unit_vec(&mut rng, n1);
                let (s, sp) = if i == 2 {
                    (1.0, 1.0)
                } else {
                    (rng::log_uniform(&mut rng, 0.1, 10.0), rng::log_uniform(&mut rng, 0.1, 10.0))
                };
                let u = if i == 2 {
                    let mut e = vec![0.0; n1];
                    e[0] = 1.0;
                    e
                } else {
                    u
                };
                let m: f64 = rng.random_range(0.0..1.0);
                let v = rng::unit_vec(&mut rng, n2);
                let z = linalg::scale(&v, m * s.min(sp).powi(2));
                let zn = linalg::scale(&z, -1.0);
                (
                    horizontal_point(g, &linalg::scale(&u, s), &z),
                    horizontal_point(g, &linalg::scale(&u, sp), &zn),
                )
            }
            _ => {
                let s = rng::log_uniform(&mut rng, 0.1, 10.0);
                let sp = rng::log_uniform(&mut rng, 0.1, 10.0);
                let zero = vec![0.0; n2];
                (
                    horizontal_point(g, &linalg::scale(&rng::unit_vec(&mut rng, n1), s), &zero),
                    horizontal_point(g, &linalg::scale(&rng::unit_vec(&mut rng, n1), sp), &zero),
                )
            }
        };
        if p.is_zero() || q.is_zero() {
            continue;
        }
        let d = norm.defect(&p, &q);
        if d < -opts.tol {
            rep.violations.push((p.clone(), q.clone(), d));
        }
        if g.aligned(&p, &q, DEFAULT_HORIZONTAL_TOL, true) {
            if d > rep.max_defect_horizontal_collinear {
                rep.max_defect_horizontal_collinear = d;
                rep.max_collinear_pair = Some((p, q));
            }
        } else if misalignment(g, &p, &q) >= opts.separation && d < rep.min_defect_nonhorizontal {
            rep.min_defect_nonhorizontal = d;
            rep.min_nonhorizontal_pair = Some((p, q));
        }
    }
    rep.violations.sort_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then_with(|| cmp_coords(a.0.coords(), b.0.coords()))
            .then_with(|| cmp_coords(a.1.coords(), b.1.coords()))
    });
    Ok(rep)
}

pub(crate) fn cmp_coords(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h1() -> GroupSpec {
        GroupSpec::heisenberg(1).unwrap()
    }

    fn p(v: &[f64]) -> GroupPoint {
        GroupPoint::new(v.to_vec())
    }

    fn norm(kind: NormKind) -> NormSpec {
        NormSpec::new(kind, h1()).unwrap()
    }

    /// Closed-form gauge on H^1: with s = 1/t², |x|² s + z² s² = r².
    fn hs_quadratic_oracle(r: f64, q: &[f64]) -> f64 {
        let h2 = q[0] * q[0] + q[1] * q[1];
        let z = q[2];
        if z == 0.0 {
            return h2.sqrt() / r;
        }
        // Positive root of z² s² + h² s − r² = 0, written without cancellation.
        let disc = (h2 * h2 + 4.0 * z * z * r * r).sqrt();
        let s = 2.0 * r * r / (h2 + disc);
        1.0 / s.sqrt()
    }

    #[test]
    fn koranyi_values() {
        let k = norm(NormKind::Koranyi);
        assert_relative_eq!(k.eval(&p(&[0.0, 0.0, 1.0])).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(k.eval(&p(&[1.0, 1.0, 2.0])).unwrap(), 8f64.powf(0.25), epsilon = 1e-15);
        assert_eq!(k.eval(&p(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn lee_naor_and_pmax_values() {
        let ln = norm(NormKind::LeeNaor);
        assert_relative_eq!(ln.eval(&p(&[1.0, 0.0, 0.0])).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        let pm = norm(NormKind::PMax { p: 2.0, a: 1.0 });
        assert_relative_eq!(pm.eval(&p(&[1.0, 0.0, 0.5])).unwrap(), 1.0, epsilon = 1e-15);
        let pinf = norm(NormKind::PMax { p: f64::INFINITY, a: 1.0 });
        assert_eq!(pinf.eval(&p(&[0.5, -2.0, 0.0])).unwrap(), 2.0);
        let p1 = norm(NormKind::PMax { p: 1.0, a: 1.0 });
        assert_eq!(p1.eval(&p(&[0.5, -2.0, 0.0])).unwrap(), 2.5);
        let p3 = norm(NormKind::PMax { p: 3.0, a: 1.0 });
        assert_relative_eq!(p3.eval(&p(&[1.0, 1.0, 0.0])).unwrap(), 2f64.powf(1.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn norm_group_validation() {
        let s2 = GroupSpec::step2(2, 1, &[vec![vec![0.0], vec![1.0]], vec![vec![-1.0], vec![0.0]]]).unwrap();
        assert!(matches!(NormSpec::new(NormKind::Koranyi, s2.clone()), Err(Error::NormGroupMismatch { .. })));
        assert!(NormSpec::new(NormKind::PMax { p: 2.0, a: 1.0 }, s2.clone()).is_err());
        assert!(NormSpec::new(NormKind::HebischSikora { r: 0.1 }, s2).is_ok());
        let h2 = GroupSpec::heisenberg(2).unwrap();
        assert!(NormSpec::new(NormKind::PMax { p: 2.0, a: 1.0 }, h2.clone()).is_err());
        assert!(NormSpec::new(NormKind::PMax { p: 2.0, a: 0.5f64.sqrt() }, h2).is_ok());
        assert!(NormSpec::new(NormKind::PMax { p: 0.5, a: 1.0 }, h1()).is_err());
        assert!(NormSpec::new(NormKind::HebischSikora { r: 0.0 }, h1()).is_err());
    }

    #[test]
    fn hs_closed_forms() {
        let g = h1();
        assert_relative_eq!(hs_norm(&g, 0.1, &p(&[0.05, 0.0, 0.0])).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(
            hs_norm(&g, 0.1, &p(&[0.0, 0.0, 0.02])).unwrap(),
            (0.02f64 / 0.1).sqrt(),
            max_relative = 1e-14
        );
        assert_eq!(hs_norm(&g, 0.1, &g.identity()).unwrap(), 0.0);
        assert!(hs_norm(&g, -1.0, &g.identity()).is_err());
    }

    #[test]
    fn hs_bisection_matches_quadratic_oracle() {
        let g = h1();
        let mut rng = rng::stream(5, 0);
        for _ in 0..10_000 {
            let q = rng::uniform_vec(&mut rng, 3, -10.0, 10.0);
            let r = rng::log_uniform(&mut rng, 0.01, 2.0);
            let got = hs_norm(&g, r, &p(&q)).unwrap();
            let want = hs_quadratic_oracle(r, &q);
            assert!((got - want).abs() <= 1e-11 * want, "{q:?} r={r}: {got} vs {want}");
        }
    }

    #[test]
    fn homogeneity_and_symmetry_all_norms() {
        let g = h1();
        let norms = [
            norm(NormKind::Koranyi),
            norm(NormKind::LeeNaor),
            norm(NormKind::PMax { p: 2.0, a: 1.0 }),
            norm(NormKind::PMax { p: f64::INFINITY, a: 0.7 }),
            norm(NormKind::HebischSikora { r: 0.2 }),
        ];
        let mut rng = rng::stream(6, 0);
        for n in &norms {
            for _ in 0..2000 {
                let q = sample_point(&mut rng, &g);
                let lam = rng::log_uniform(&mut rng, 1e-2, 1e2);
                let a = n.value(&g.dil(lam, &q));
                let b = lam * n.value(&q);
                assert!((a - b).abs() <= 1e-11 * b, "{}: {a} vs {b}", n.name());
                let s = n.value(&g.inv(&q));
                assert!((s - n.value(&q)).abs() <= 1e-12 * s.max(1.0));
            }
        }
    }

    #[test]
    fn distance_properties() {
        let k = norm(NormKind::Koranyi);
        let g = h1();
        let o = g.identity();
        assert_relative_eq!(k.distance(&o, &p(&[1.0, 0.0, 0.0])).unwrap(), 1.0, epsilon = 1e-15);
        let mut rng = rng::stream(7, 0);
        for _ in 0..1000 {
            let a = sample_point(&mut rng, &g);
            let b = sample_point(&mut rng, &g);
            let c = sample_point(&mut rng, &g);
            assert_eq!(k.dist(&a, &a), 0.0);
            let dab = k.dist(&a, &b);
            assert!((dab - k.dist(&b, &a)).abs() <= 1e-12 * dab.max(1.0));
            assert!(dab > 0.0);
            assert!(k.dist(&a, &c) <= dab + k.dist(&b, &c) + 1e-12);
            let moved = k.dist(&g.mul(&c, &a), &g.mul(&c, &b));
            assert!((moved - dab).abs() <= 1e-12 * dab.max(1.0) * 10.0);
        }
    }

    #[test]
    fn defect_examples() {
        let k = norm(NormKind::Koranyi);
        assert!(k.hsc_defect(&p(&[1.0, 0.0, 0.0]), &p(&[2.0, 0.0, 0.0])).unwrap().abs() <= 1e-15);
        let d = k.hsc_defect(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0])).unwrap();
        assert_relative_eq!(d, 2.0 - 8f64.powf(0.25), epsilon = 1e-15);
        assert!(k.hsc_defect(&h1().identity(), &p(&[1.0, 0.0, 0.0])).is_err());
        let pm = norm(NormKind::PMax { p: 2.0, a: 1.0 });
        for z in [0.1, 0.5, 0.99] {
            let (q, qp) = (p(&[1.0, 0.0, z]), p(&[1.0, 0.0, -z]));
            assert_eq!(pm.hsc_defect(&q, &qp).unwrap(), 0.0);
            assert!(!h1().same_horizontal_line_through_origin(&q, &qp, 1e-12).unwrap());
        }
    }

    #[test]
    fn axioms_hold_for_koranyi() {
        let rep = check_norm_axioms(&norm(NormKind::Koranyi), 10_000, 1, 1e-10).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.row("homogeneity_unit").unwrap().worst_slack, 0.0);
    }

    #[test]
    fn hs_beyond_r0_is_flagged() {
        let hs = norm(NormKind::HebischSikora { r: 10.0 });
        assert!(hs.beyond_r0());
        assert!(!hs.is_hsc());
        let rep = check_norm_axioms(&hs, 5000, 2, 1e-10).unwrap();
        assert!(rep.notes.iter().any(|n| n.contains("WARNING")));
    }

    #[test]
    fn c1_heisenberg_is_two() {
        let c = estimate_c1_c2(&h1(), 20_000, 0).unwrap();
        assert!(c.c1_sampled >= 1.96 && c.c1_sampled <= 2.0, "{c:?}");
        assert_eq!(c.c2, 0.0);
        assert_relative_eq!(c.c1, c.c1_sampled * 1.05);
        let r0 = r0_from_constants(&c);
        assert!((0.40..=0.45).contains(&r0));
    }

    #[test]
    fn c1_scales_with_the_bracket() {
        let base = crate::group::tests::sample_step2();
        let crate::group::GroupKind::Step2 { n1, n2, bracket } = base.kind().clone() else { unreachable!() };
        let scaled = GroupSpec::step2_flat(n1, n2, bracket.iter().map(|b| b * 10.0).collect()).unwrap();
        let c = estimate_c1_c2(&base, 20_000, 3).unwrap();
        let cs = estimate_c1_c2(&scaled, 20_000, 3).unwrap();
        assert_relative_eq!(cs.c1_sampled / c.c1_sampled, 10.0, max_relative = 1e-9);

        let tiny = GroupSpec::step2_flat(n1, n2, bracket.iter().map(|b| b * 1e-6).collect()).unwrap();
        assert_eq!(hs_r0(&tiny, 1000, 0).unwrap(), 1.0);
    }

    #[test]
    fn proof_chain_equality_case() {
        let g = h1();
        let r = 0.2;
        let x = p(&[0.6 * r, 0.8 * r, 0.0]);
        for t in [0.1, 0.5, 0.77] {
            let sl = hs_proof_slacks(&g, r, &x, &x, t).unwrap();
            assert!(sl.new_euclidean.abs() <= 1e-12);
            assert!(sl.as_array().iter().all(|v| *v >= -1e-15));
        }
        // Opposite horizontal directions with a small vertical part: strict.
        let y = p(&[-0.6 * r, -0.8 * r * 0.999, 0.0]);
        let mut yc = y.coords().to_vec();
        yc[2] = (r * r - linalg::norm_sq(&yc[..2])).sqrt();
        let sl = hs_proof_slacks(&g, r, &x, &p(&yc), 0.5).unwrap();
        assert!(sl.new_euclidean > 1e-6);
    }

    #[test]
    fn proof_chain_refuses_large_radius() {
        assert!(matches!(
            verify_hs_proof_inequalities(&h1(), 0.9, 10, 0, 1e-10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn proof_chain_holds_below_r0() {
        let g = h1();
        let r0 = hs_r0(&g, R0_SAMPLES, R0_SEED).unwrap();
        let rep = verify_hs_proof_inequalities(&g, r0 / 2.0, 10_000, 4, 1e-10).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn scan_classifies_pmax_as_not_hsc() {
        let rep = hsc_scan(&norm(NormKind::PMax { p: 2.0, a: 1.0 }), 4000, 7, 1e-12).unwrap();
        assert!(!rep.hsc_consistent());
        let (q, qp, d) = rep.counterexample().unwrap();
        assert!(d.abs() <= 1e-9);
        assert!(!h1().same_horizontal_line_through_origin(q, qp, 1e-12).unwrap());
    }

    #[test]
    fn scan_classifies_koranyi_as_hsc() {
        let rep = hsc_scan(&norm(NormKind::Koranyi), 4000, 7, 1e-12).unwrap();
        assert!(rep.hsc_consistent(), "{rep:?}");
        assert!(rep.max_defect_horizontal_collinear <= 1e-12);
    }

    #[test]
    fn misalignment_vanishes_on_rays() {
        let g = h1();
        assert!(misalignment(&g, &p(&[1.0, 1.0, 0.0]), &p(&[2.0, 2.0, 0.0])) <= 1e-15);
        assert_relative_eq!(misalignment(&g, &p(&[1.0, 0.0, 0.0]), &p(&[-1.0, 0.0, 0.0])), 1.0);
        assert!(misalignment(&g, &p(&[1.0, 0.0, 0.01]), &p(&[1.0, 0.0, 0.0])) > 0.05);
    }
}
