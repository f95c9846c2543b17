//! Geodesics in the 1-Wasserstein space over a Carnot group.
//!
//! All curves here are piecewise mass-linear: a list of knots `(t_k, μ_k)`
//! with `γ(t) = (1 − s) μ_k + s μ_{k+1}` on `[t_k, t_{k+1}]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::group::GroupPoint;
use crate::linalg;
use crate::norms::NormSpec;
use crate::report::{fmt_f64, fmt_point};
use crate::rng::{self, streams};
use crate::wasserstein::{self, decompose, same_point, sum_opt, w1, DiscreteMeasure, DiracPairForm};

/// Default absolute tolerance for geodesic checks.
pub const DEFAULT_GEODESIC_TOL: f64 = 1e-9;
/// Number of evenly spaced values in the ratio-set sweep.
pub const ALPHA_GRID: usize = 1000;
/// Interior candidates must be at least this fraction of `d(q, q′)` away
/// from both endpoints.
pub const INTERIOR_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub measure: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicCurve {
    knots: Vec<Knot>,
}

#[derive(Deserialize)]
struct RawCurve {
    knots: Vec<Knot>,
}

impl<'de> Deserialize<'de> for GeodesicCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCurve::deserialize(d)?;
        GeodesicCurve::new(raw.knots.into_iter().map(|k| (k.t, k.measure)).collect()).map_err(serde::de::Error::custom)
    }
}

impl GeodesicCurve {
    pub fn new(knots: Vec<(f64, DiscreteMeasure)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("curve needs at least one knot"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid("knot times must be strictly increasing"));
            }
            let (a, b) = (w[0].1.total(), w[1].1.total());
            if (a - b).abs() > wasserstein::MASS_TOL {
                return Err(Error::MassMismatch { left: a, right: b, tol: wasserstein::MASS_TOL });
            }
            if w[0].1.dim() != w[1].1.dim() {
                return Err(Error::DimensionMismatch { expected: w[0].1.dim(), found: w[1].1.dim() });
            }
        }
        if knots.iter().any(|k| !k.0.is_finite()) {
            return Err(invalid("knot times must be finite"));
        }
        Ok(GeodesicCurve {
            knots: knots.into_iter().map(|(t, measure)| Knot { t, measure }).collect(),
        })
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].t, self.knots[self.knots.len() - 1].t)
    }

    pub fn eval(&self, t: f64) -> Result<DiscreteMeasure> {
        let (a, b) = self.domain();
        if !(t >= a && t <= b) {
            return Err(invalid(format!("t = {t} outside the domain [{a}, {b}]")));
        }
        let k = self.knots.partition_point(|kn| kn.t <= t);
        if k == 0 {
            return Ok(self.knots[0].measure.clone());
        }
        let lo = &self.knots[k - 1];
        if k == self.knots.len() || lo.t == t {
            return Ok(lo.measure.clone());
        }
        let hi = &self.knots[k];
        mix(&lo.measure, &hi.measure, (t - lo.t) / (hi.t - lo.t))
    }
}

/// `(1 − s) a + s b`, returning the endpoints exactly at `s ∈ {0, 1}`.
fn mix(a: &DiscreteMeasure, b: &DiscreteMeasure, s: f64) -> Result<DiscreteMeasure> {
    if s <= 0.0 {
        Ok(a.clone())
    } else if s >= 1.0 {
        Ok(b.clone())
    } else {
        a.scaled(1.0 - s)?.plus(&b.scaled(s)?)
    }
}

/// `q ∼ q′` under a horizontally strictly convex norm: `q⁻¹·q′` is not
/// horizontal. Refuses norms not known to be HSC.
pub fn tilde_related(norm: &NormSpec, q: &GroupPoint, qp: &GroupPoint, tol: f64) -> Result<bool> {
    let g = norm.group();
    g.check(q)?;
    g.check(qp)?;
    if !norm.is_hsc() {
        return Err(precondition(format!(
            "the non-horizontality test characterises the relation only for horizontally strictly convex norms; {} is not known to be one (use sampled_segment_search)",
            norm.name()
        )));
    }
    if same_point(q, qp) {
        return Err(invalid("points must be distinct"));
    }
    Ok(!g.horizontal(&g.between(q, qp), tol))
}

/// Looks for `r ∉ {q, q′}` with `d(q, r) + d(r, q′) − d(q, q′) ≤ tol`.
///
/// Candidates: the horizontal interpolants `q·δ_α(q⁻¹·q′)` (first the
/// midpoint), small perturbations of them, and perturbed points of the
/// Euclidean segment. A candidate must lie at distance at least
/// `INTERIOR_FRACTION · d(q, q′)` from both endpoints.
pub fn sampled_segment_search(
    norm: &NormSpec,
    q: &GroupPoint,
    qp: &GroupPoint,
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> Result<Option<GroupPoint>> {
    let g = norm.group();
    g.check(q)?;
    g.check(qp)?;
    if same_point(q, qp) {
        return Err(invalid("points must be distinct"));
    }
    let d = norm.dist(q, qp);
    let diff = g.between(q, qp);
    let mut rng = rng::stream(seed, streams::SEGMENT_SEARCH);
    let dim = g.dim();
    for i in 0..sample_count {
        let alpha = if i == 0 { 0.5 } else { rng::log_uniform(&mut rng, 1e-3, 1.0).min(1.0 - 1e-3) };
        let interp = g.mul(q, &g.dil(alpha, &diff));
        let r = match i % 3 {
            0 => interp,
            1 => {
                let scale = rng::log_uniform(&mut rng, 1e-6, 1e-1) * d.max(1e-300);
                let noise = linalg::scale(&rng::unit_vec(&mut rng, dim), scale);
                GroupPoint::new(interp.coords().iter().zip(&noise).map(|(a, b)| a + b).collect())
            }
            _ => {
                let base: Vec<f64> = q.coords().iter().zip(qp.coords()).map(|(a, b)| (1.0 - alpha) * a + alpha * b).collect();
                let scale = rng::log_uniform(&mut rng, 1e-6, 1e-1) * d.max(1e-300);
                let noise = linalg::scale(&rng::unit_vec(&mut rng, dim), scale);
                GroupPoint::new(base.iter().zip(&noise).map(|(a, b)| a + b).collect())
            }
        };
        let (d1, d2) = (norm.dist(q, &r), norm.dist(&r, qp));
        if d1.min(d2) < INTERIOR_FRACTION * d {
            continue;
        }
        if d1 + d2 - d <= tol {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// `(1 − t/T) μ + (t/T) ν`.
pub fn linear_interpolation(mu: &DiscreteMeasure, nu: &DiscreteMeasure, t: f64, t_total: f64) -> Result<DiscreteMeasure> {
    if !(t_total > 0.0) {
        return Err(invalid(format!("T must be positive, got {t_total}")));
    }
    if !(0.0..=t_total).contains(&t) {
        return Err(invalid(format!("t = {t} outside [0, {t_total}]")));
    }
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > wasserstein::MASS_TOL {
        return Err(Error::MassMismatch { left: a, right: b, tol: wasserstein::MASS_TOL });
    }
    mix(mu, nu, t / t_total)
}

/// `ξ ∈ M_λ(μ, ν)`: `d₁(μ, ξ) = λ d₁(μ, ν)` and `d₁(ξ, ν) = (1 − λ) d₁(μ, ν)`,
/// each within `tol`.
pub fn lambda_ratio_membership(
    norm: &NormSpec,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    xi: &DiscreteMeasure,
    lambda: f64,
    tol: f64,
) -> Result<bool> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let total = w1(norm, mu, nu)?;
    let a = w1(norm, mu, xi)?;
    let b = w1(norm, xi, nu)?;
    Ok((a - lambda * total).abs() <= tol && (b - (1.0 - lambda) * total).abs() <= tol)
}

/// `ξ_α = η + (c − α) δ_q + α δ_{q′}` for `0 ≤ α ≤ c`: mass `α` moved from
/// `q` to `q′`.
pub fn ratio_family_member(form: &DiracPairForm, alpha: f64) -> Result<DiscreteMeasure> {
    if !(0.0..=form.c).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, {}], got {alpha}", form.c)));
    }
    let mut pts = Vec::new();
    let mut w = Vec::new();
    if form.c - alpha > 0.0 {
        pts.push(form.q.clone());
        w.push(form.c - alpha);
    }
    if alpha > 0.0 {
        pts.push(form.q_prime.clone());
        w.push(alpha);
    }
    let moved = DiscreteMeasure::new(pts, w)?;
    Ok(sum_opt(&[form.eta.as_ref(), Some(&moved)])?.expect("nonempty"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweep {
    /// The analytic candidate `λ c`.
    pub candidate: f64,
    /// Swept values, ascending.
    pub alphas: Vec<f64>,
    /// Values whose family member lies in `M_λ(μ, ν)`.
    pub members: Vec<f64>,
}

impl AlphaSweep {
    /// Exactly one member, equal to `λ c`.
    pub fn unique_at_candidate(&self) -> bool {
        self.members.len() == 1 && self.members[0] == self.candidate
    }
}

/// Sweeps `α` over `(k + ½) c / ALPHA_GRID` plus `λ c` and tests membership
/// of `ξ_α` in `M_λ(μ, ν)` for `μ = η + c δ_q`, `ν = η + c δ_{q′}`.
pub fn alpha_sweep(norm: &NormSpec, form: &DiracPairForm, lambda: f64, tol: f64) -> Result<AlphaSweep> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let mu = ratio_family_member(form, 0.0)?;
    let nu = ratio_family_member(form, form.c)?;
    let total = w1(norm, &mu, &nu)?;
    let candidate = lambda * form.c;
    let mut alphas: Vec<f64> = (0..ALPHA_GRID)
        .map(|k| (k as f64 + 0.5) * form.c / ALPHA_GRID as f64)
        .filter(|a| (a - candidate).abs() > 1e-15 * form.c)
        .collect();
    alphas.push(candidate);
    alphas.sort_by(f64::total_cmp);
    let mut members = Vec::new();
    for &a in &alphas {
        let xi = ratio_family_member(form, a)?;
        let da = w1(norm, &mu, &xi)?;
        if (da - lambda * total).abs() > tol {
            continue;
        }
        let db = w1(norm, &xi, &nu)?;
        if (db - (1.0 - lambda) * total).abs() <= tol {
            members.push(a);
        }
    }
    Ok(AlphaSweep { candidate, alphas, members })
}

fn pair_form_measures(eta: Option<&DiscreteMeasure>, c: f64, q: &GroupPoint, qp: &GroupPoint) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if !(c > 0.0) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    let mq = DiscreteMeasure::weighted_dirac(q.clone(), c)?;
    let mqp = DiscreteMeasure::weighted_dirac(qp.clone(), c)?;
    let mu = sum_opt(&[eta, Some(&mq)])?.expect("nonempty");
    let nu = sum_opt(&[eta, Some(&mqp)])?.expect("nonempty");
    Ok((mu, nu))
}

/// The two-piece geodesic from `η + c δ_q` to `η + c δ_{q′}` through
/// `η + c δ_z`, for `z` an interior point of the metric segment `[q, q′]`.
pub fn build_detour_geodesic(
    eta: Option<&DiscreteMeasure>,
    c: f64,
    q: &GroupPoint,
    qp: &GroupPoint,
    z: &GroupPoint,
    norm: &NormSpec,
) -> Result<GeodesicCurve> {
    let g = norm.group();
    for p in [q, qp, z] {
        g.check(p)?;
    }
    if same_point(z, q) || same_point(z, qp) {
        return Err(invalid("z must differ from both endpoints"));
    }
    let defect = norm.dist(q, z) + norm.dist(z, qp) - norm.dist(q, qp);
    if defect.abs() > DEFAULT_GEODESIC_TOL {
        return Err(precondition(format!(
            "z is not on the metric segment: triangle defect {defect:e}"
        )));
    }
    let (mu, nu) = pair_form_measures(eta, c, q, qp)?;
    let (_, xi) = pair_form_measures(eta, c, q, z)?;
    let t_mid = w1(norm, &mu, &xi)?;
    let t_end = w1(norm, &mu, &nu)?;
    GeodesicCurve::new(vec![(0.0, mu), (t_mid, xi), (t_end, nu)])
}

/// Restriction of `m` to the atoms in `set` and to the rest.
fn split_by(m: &DiscreteMeasure, set: &[GroupPoint]) -> (Vec<usize>, Vec<usize>) {
    (0..m.len()).partition(|&k| set.iter().any(|s| same_point(s, &m.points()[k])))
}

fn sub_measure(m: &DiscreteMeasure, idx: &[usize]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(
        idx.iter().map(|&k| m.points()[k].clone()).collect(),
        idx.iter().map(|&k| m.weights()[k]).collect(),
    )
}

/// Two distinct unit-speed geodesics between `μ` and `ν` when `μ − ν` is not
/// of the form `c δ_q − c δ_{q′}` and `μ′ = (μ − ν)₊` has at least two atoms.
///
/// `selector` picks the atoms of `μ′` forming `μ′₁`. The first curve moves
/// `μ′₁` to `ν′₁` first and then `μ′₂` to `ν′₂`; the second does it the other
/// way round. `ν′₁` is the image of `μ′₁` under an optimal plan.
pub fn build_branching_geodesics(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    selector: &[GroupPoint],
    norm: &NormSpec,
) -> Result<(GeodesicCurve, GeodesicCurve)> {
    let d = decompose(mu, nu)?;
    let (mu_p, nu_p) = match (d.mu_pos, d.nu_neg) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(precondition("measures coincide")),
    };
    if mu_p.is_dirac() {
        return Err(precondition(
            "the positive part of mu - nu is a single atom; the branching construction needs at least two",
        ));
    }
    let (s_idx, rest_idx) = split_by(&mu_p, selector);
    if s_idx.is_empty() || rest_idx.is_empty() {
        return Err(invalid("selector must pick some but not all atoms of the positive part"));
    }
    let sol = wasserstein::w1_distance(norm, &mu_p, &nu_p)?;
    let col_mass = |rows: &[usize]| -> Vec<f64> {
        (0..nu_p.len()).map(|j| rows.iter().map(|&i| sol.plan.flow[i][j]).sum()).collect()
    };
    let to_measure = |w: Vec<f64>| -> Result<DiscreteMeasure> {
        let idx: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
        DiscreteMeasure::new(idx.iter().map(|&j| nu_p.points()[j].clone()).collect(), idx.iter().map(|&j| w[j]).collect())
    };
    let mu1 = sub_measure(&mu_p, &s_idx)?;
    let mu2 = sub_measure(&mu_p, &rest_idx)?;
    let nu1 = to_measure(col_mass(&s_idx))?;
    let nu2 = to_measure(col_mass(&rest_idx))?;
    let t1 = w1(norm, &mu1, &nu1)?;
    let t_end = sol.value;
    let eta = d.eta.as_ref();
    let mid1 = sum_opt(&[eta, Some(&mu2), Some(&nu1)])?.expect("nonempty");
    let mid2 = sum_opt(&[eta, Some(&mu1), Some(&nu2)])?.expect("nonempty");
    let g1 = GeodesicCurve::new(vec![(0.0, mu.clone()), (t1, mid1), (t_end, nu.clone())])?;
    let g2 = GeodesicCurve::new(vec![(0.0, mu.clone()), (t_end - t1, mid2), (t_end, nu.clone())])?;
    Ok((g1, g2))
}

/// Continues the geodesic from `μ = η + c δ_q` to `ν = η + c δ_{q′}` on to
/// `δ_{q′}`, for probability measures with `η ≠ 0` and `q ∼ q′`.
pub fn build_extension(
    eta: Option<&DiscreteMeasure>,
    c: f64,
    q: &GroupPoint,
    qp: &GroupPoint,
    norm: &NormSpec,
) -> Result<GeodesicCurve> {
    let Some(eta) = eta else {
        return Err(precondition("eta is zero: the geodesic between two Dirac masses cannot be extended"));
    };
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("c must lie in (0, 1), got {c}")));
    }
    if (eta.total() + c - 1.0).abs() > wasserstein::MASS_TOL {
        return Err(invalid(format!(
            "total mass eta + c must be 1, got {}",
            eta.total() + c
        )));
    }
    if !tilde_related(norm, q, qp, crate::group::DEFAULT_HORIZONTAL_TOL)? {
        return Err(precondition("q and q' are not related (their difference is horizontal)"));
    }
    let (mu, nu) = pair_form_measures(Some(eta), c, q, qp)?;
    let end = DiscreteMeasure::dirac(qp.clone());
    let t_mid = w1(norm, &mu, &nu)?;
    let t_end = w1(norm, &mu, &end)?;
    GeodesicCurve::new(vec![(0.0, mu), (t_mid, nu), (t_end, end)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitSpeedRow {
    pub t_i: f64,
    pub t_j: f64,
    pub d1: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitSpeedReport {
    pub rows: Vec<UnitSpeedRow>,
    pub max_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

impl UnitSpeedReport {
    /// CSV with columns `t_i,t_j,d1,deviation`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_i,t_j,d1,deviation\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", fmt_f64(r.t_i), fmt_f64(r.t_j), fmt_f64(r.d1), fmt_f64(r.deviation)));
        }
        s
    }
}

/// Checks `d₁(γ(t_i), γ(t_j)) = |t_i − t_j|` on all pairs of an evenly
/// spaced grid over the domain.
pub fn validate_unit_speed(norm: &NormSpec, curve: &GeodesicCurve, grid_count: usize, tol: f64) -> Result<UnitSpeedReport> {
    if grid_count < 2 {
        return Err(invalid("grid_count must be at least 2"));
    }
    let (a, b) = curve.domain();
    let times: Vec<f64> = (0..grid_count)
        .map(|i| if i + 1 == grid_count { b } else { a + (b - a) * i as f64 / (grid_count - 1) as f64 })
        .collect();
    let measures = times.iter().map(|&t| curve.eval(t)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..grid_count {
        for j in (i + 1)..grid_count {
            let d = w1(norm, &measures[i], &measures[j])?;
            let dev = (d - (times[j] - times[i]).abs()).abs();
            worst = worst.max(dev);
            rows.push(UnitSpeedRow { t_i: times[i], t_j: times[j], d1: d, deviation: dev });
        }
    }
    Ok(UnitSpeedReport { rows, max_deviation: worst, tol, passed: worst <= tol })
}

/// Largest `d₁(γ₁(t), γ₂(t))` over an evenly spaced grid on the common domain.
pub fn max_separation(norm: &NormSpec, a: &GeodesicCurve, b: &GeodesicCurve, grid_count: usize) -> Result<f64> {
    let (s, e) = a.domain();
    if grid_count < 2 {
        return Err(invalid("grid_count must be at least 2"));
    }
    let mut worst = 0.0f64;
    for i in 0..grid_count {
        let t = if i + 1 == grid_count { e } else { s + (e - s) * i as f64 / (grid_count - 1) as f64 };
        worst = worst.max(w1(norm, &a.eval(t)?, &b.eval(t)?)?);
    }
    Ok(worst)
}

/// Short human-readable description of a curve, one knot per line.
pub fn describe(curve: &GeodesicCurve) -> String {
    let mut s = String::new();
    for k in curve.knots() {
        let atoms: Vec<String> = k.measure.atoms().map(|(p, w)| format!("{}*{}", fmt_f64(w), fmt_point(p))).collect();
        s.push_str(&format!("t={} {}\n", fmt_f64(k.t), atoms.join(" + ")));
    }
    s
}
