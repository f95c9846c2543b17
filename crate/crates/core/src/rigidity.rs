//! Trivial isometries of the Wasserstein space and the rigidity
//! demonstration.
//!
//! An isometry of the group is represented as `ψ(q) = g₀·(A q)` with `A` a
//! layer-preserving linear map that is a group automorphism preserving the
//! norm. Its push-forward `ψ_#` is an isometry of `(F(G), d₁)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::geodesics::{alpha_sweep, ratio_family_member, tilde_related};
use crate::group::{GroupPoint, GroupSpec, DEFAULT_HORIZONTAL_TOL};
use crate::linalg;
use crate::norms::NormSpec;
use crate::report::{fmt_f64, fmt_pair, CheckReport, CheckRow};
use crate::rng::{self, streams};
use crate::wasserstein::{match_dirac_pair_form, w1, DiscreteMeasure};

/// Samples used when validating a linear map.
pub const VALIDATION_SAMPLES: usize = 1000;
/// Tolerance for the homomorphism and norm-preservation checks.
pub const VALIDATION_TOL: f64 = 1e-10;
const PERTURB_ROUNDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct IsometrySpec {
    group: GroupSpec,
    translation: GroupPoint,
    linear: Vec<Vec<f64>>,
    validated: bool,
}

/// JSON form: `{"translate": [...], "linear": [[...], ...]}`, both optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IsometryInput {
    #[serde(default)]
    pub translate: Option<Vec<f64>>,
    #[serde(default)]
    pub linear: Option<Vec<Vec<f64>>>,
}

fn identity_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| linalg::dot(row, x)).collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b[0].len();
    a.iter()
        .map(|row| (0..n).map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum()).collect())
        .collect()
}

impl IsometrySpec {
    pub fn identity(group: &GroupSpec) -> Self {
        IsometrySpec {
            group: group.clone(),
            translation: group.identity(),
            linear: identity_matrix(group.dim()),
            validated: true,
        }
    }

    /// An unchecked map; push-forward refuses it.
    pub fn unvalidated(group: &GroupSpec, translation: GroupPoint, linear: Vec<Vec<f64>>) -> Result<Self> {
        group.check(&translation)?;
        check_shape(group, &linear)?;
        Ok(IsometrySpec { group: group.clone(), translation, linear, validated: false })
    }

    /// Builds from JSON input: translation, then a validated linear part.
    pub fn from_input(norm: &NormSpec, input: &IsometryInput) -> Result<Self> {
        let g = norm.group();
        let lin = match &input.linear {
            Some(m) => make_linear_isometry(norm, m.clone())?,
            None => IsometrySpec::identity(g),
        };
        let tr = match &input.translate {
            Some(t) => make_left_translation(g, GroupPoint::new(t.clone()))?,
            None => IsometrySpec::identity(g),
        };
        Ok(tr.compose(&lin))
    }

    pub fn to_input(&self) -> IsometryInput {
        IsometryInput {
            translate: Some(self.translation.coords().to_vec()),
            linear: Some(self.linear.clone()),
        }
    }

    pub fn translation(&self) -> &GroupPoint {
        &self.translation
    }

    pub fn linear(&self) -> &[Vec<f64>] {
        &self.linear
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    /// `ψ(q) = g₀·(A q)`.
    pub fn apply(&self, q: &GroupPoint) -> Result<GroupPoint> {
        self.group.check(q)?;
        Ok(self.map(q))
    }

    pub(crate) fn map(&self, q: &GroupPoint) -> GroupPoint {
        let aq = GroupPoint::new(mat_vec(&self.linear, q.coords()));
        self.group.mul(&self.translation, &aq)
    }

    /// `self ∘ other`: translation `g₁·(A₁ g₂)`, linear part `A₁ A₂`.
    pub fn compose(&self, other: &IsometrySpec) -> IsometrySpec {
        let moved = GroupPoint::new(mat_vec(&self.linear, other.translation.coords()));
        IsometrySpec {
            group: self.group.clone(),
            translation: self.group.mul(&self.translation, &moved),
            linear: mat_mul(&self.linear, &other.linear),
            validated: self.validated && other.validated,
        }
    }
}

fn check_shape(group: &GroupSpec, m: &[Vec<f64>]) -> Result<()> {
    let n = group.dim();
    if m.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.len() });
    }
    for row in m {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
    }
    Ok(())
}

/// `L_{g₀}`; left translations are isometries of every left-invariant
/// distance, so no sampling is needed.
pub fn make_left_translation(group: &GroupSpec, g0: GroupPoint) -> Result<IsometrySpec> {
    group.check(&g0)?;
    Ok(IsometrySpec {
        group: group.clone(),
        translation: g0,
        linear: identity_matrix(group.dim()),
        validated: true,
    })
}

/// Validates `A` structurally (block-diagonal by layer), then on samples as
/// a group homomorphism preserving the norm.
pub fn make_linear_isometry(norm: &NormSpec, matrix: Vec<Vec<f64>>) -> Result<IsometrySpec> {
    let g = norm.group();
    check_shape(g, &matrix)?;
    let w = g.weights();
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if w[i] != w[j] && *v != 0.0 {
                return Err(invalid(format!(
                    "linear map must preserve layers: entry ({i}, {j}) = {v} mixes layers"
                )));
            }
        }
    }
    let iso = IsometrySpec { group: g.clone(), translation: g.identity(), linear: matrix, validated: false };
    let mut rng = rng::stream(0, streams::ISOMETRY_VALIDATION);
    let (mut worst_hom, mut hom_pair) = (0.0f64, None);
    let (mut worst_norm, mut norm_pt) = (0.0f64, None);
    for _ in 0..VALIDATION_SAMPLES {
        let p = GroupPoint::new(rng::uniform_vec(&mut rng, g.dim(), -2.0, 2.0));
        let q = GroupPoint::new(rng::uniform_vec(&mut rng, g.dim(), -2.0, 2.0));
        let lhs = iso.map(&g.mul(&p, &q));
        let rhs = g.mul(&iso.map(&p), &iso.map(&q));
        let scale = linalg::norm(lhs.coords()).max(1.0);
        let dev = linalg::max_abs_diff(lhs.coords(), rhs.coords()) / scale;
        if dev > worst_hom {
            worst_hom = dev;
            hom_pair = Some((p.clone(), q.clone()));
        }
        let np = norm.value(&p);
        let dev = (norm.value(&iso.map(&p)) - np).abs() / np.max(1.0);
        if dev > worst_norm {
            worst_norm = dev;
            norm_pt = Some(p);
        }
    }
    if worst_hom > VALIDATION_TOL {
        let (p, q) = hom_pair.expect("recorded");
        return Err(precondition(format!(
            "linear map is not a group homomorphism: deviation {worst_hom:e} at {}",
            fmt_pair(&p, &q)
        )));
    }
    if worst_norm > VALIDATION_TOL {
        let p = norm_pt.expect("recorded");
        return Err(precondition(format!(
            "linear map does not preserve the norm: deviation {worst_norm:e} at {}",
            fmt_pair(&p, &iso.map(&p))
        )));
    }
    Ok(IsometrySpec { validated: true, ..iso })
}

/// `ψ_# μ`: support mapped by `ψ`, weights unchanged.
pub fn push_forward(iso: &IsometrySpec, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    if !iso.validated {
        return Err(precondition("isometry has not been validated"));
    }
    if mu.dim() != iso.group.dim() {
        return Err(Error::DimensionMismatch { expected: iso.group.dim(), found: mu.dim() });
    }
    mu.map_points(|p| iso.map(p))
}

fn random_measure<R: Rng>(rng: &mut R, g: &GroupSpec, atoms: usize) -> DiscreteMeasure {
    let pts = (0..atoms).map(|_| GroupPoint::new(rng::uniform_vec(rng, g.dim(), -2.0, 2.0))).collect();
    let mut w: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    DiscreteMeasure::new(pts, w).expect("positive weights")
}

/// Checks `d₁(ψ_# μ, ψ_# ν) = d₁(μ, ν)` on random probability measures with
/// up to ten atoms. The row's slack is minus the worst deviation.
pub fn verify_pushforward_isometry(
    iso: &IsometrySpec,
    norm: &NormSpec,
    pair_count: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    if !iso.validated {
        return Err(precondition("isometry has not been validated"));
    }
    let g = norm.group();
    let mut rng = rng::stream(seed, streams::PUSHFORWARD_PAIRS);
    let mut row = CheckRow::new("w1_preservation");
    for _ in 0..pair_count {
        let m = rng.random_range(1..=10);
        let n = rng.random_range(1..=10);
        let mu = random_measure(&mut rng, g, m);
        let nu = random_measure(&mut rng, g, n);
        let a = w1(norm, &mu, &nu)?;
        let b = w1(norm, &push_forward(iso, &mu)?, &push_forward(iso, &nu)?)?;
        let dev = (a - b).abs();
        row.observe(-dev, dev <= tol, || format!("atoms {m}x{n} d1={}", fmt_f64(a)));
    }
    let mut rep = CheckReport::new("push-forward isometry");
    rep.rows.push(row);
    Ok(rep)
}

/// Moves each point by a distinct small vertical offset so that the result
/// is pairwise related and every point moves by less than `epsilon`.
///
/// The `k`-th of `K` points gets `±(ε²/4)(k/K) / N(e_v)²` added to its first
/// vertical coordinate, `e_v` the corresponding unit vector; since vertical
/// offsets are central this moves it by `(ε/2) sqrt(k/K)`. An offset that
/// breaks relatedness with an earlier point is halved, up to twenty times.
pub fn perturb_to_tilde_position(
    norm: &NormSpec,
    points: &[GroupPoint],
    epsilon: f64,
    seed: u64,
) -> Result<Vec<GroupPoint>> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !norm.is_hsc() {
        return Err(precondition(format!("{} is not known to be horizontally strictly convex", norm.name())));
    }
    let g = norm.group();
    for p in points {
        g.check(p)?;
    }
    if points.len() <= 1 {
        return Ok(points.to_vec());
    }
    let vi = g.horizontal_dim();
    let mut ev = vec![0.0; g.dim()];
    ev[vi] = 1.0;
    let nv = norm.value(&GroupPoint::new(ev));
    let big_k = points.len() as f64;
    let mut rng = rng::stream(seed, streams::PERTURB);
    let mut out: Vec<GroupPoint> = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut delta = sign * epsilon * epsilon / 4.0 * (k as f64 / big_k) / (nv * nv);
        let mut placed = None;
        for _ in 0..=PERTURB_ROUNDS {
            let mut c = p.coords().to_vec();
            c[vi] += delta;
            let cand = GroupPoint::new(c);
            let ok = out.iter().all(|o| {
                !crate::wasserstein::same_point(o, &cand)
                    && tilde_related(norm, o, &cand, DEFAULT_HORIZONTAL_TOL).unwrap_or(false)
            });
            if ok && norm.dist(p, &cand) < epsilon {
                placed = Some(cand);
                break;
            }
            delta = if delta == 0.0 { sign * epsilon * epsilon / (8.0 * big_k * nv * nv) } else { delta / 2.0 };
        }
        match placed {
            Some(c) => out.push(c),
            None => {
                return Err(Error::Solver(format!(
                    "could not place point {k} in related position within {PERTURB_ROUNDS} halvings"
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoRow {
    pub check_name: String,
    pub passed: bool,
    pub worst_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub rows: Vec<DemoRow>,
}

impl DemoReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, name: &str) -> Option<&DemoRow> {
        self.rows.iter().find(|r| r.check_name == name)
    }

    /// CSV with columns `check_name,status,worst_deviation`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check_name,status,worst_deviation\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{}\n",
                r.check_name,
                if r.passed { "pass" } else { "fail" },
                fmt_f64(r.worst_deviation)
            ));
        }
        s
    }
}

/// Tolerances used by [`rigidity_demo`].
pub const DEMO_W1_TOL: f64 = 1e-9;
pub const DEMO_POINT_TOL: f64 = 1e-12;
pub const DEMO_EPSILONS: [f64; 2] = [0.1, 0.01];

/// Runs the rigidity checks for `Φ = ψ_#`:
///
/// * `w1_preservation`: `Φ` preserves `d₁` on `measure_count` pairs;
/// * `dirac_to_dirac`: `Φ(δ_q)` is a Dirac mass, and images of related
///   Dirac pairs are again in pair form with `η = 0`;
/// * `induced_point_map`: the atom of `Φ(δ_q)` is `ψ(q)`;
/// * `f_tilde_density_<ε>`: perturbed measures are pairwise related and
///   within `ε` of the original in `d₁`;
/// * `reconstruction`: `Φ(ξ)` for a `(k+1)`-atom `ξ` is the unique member
///   of `M_λ(Φ(ξ₁), Φ(ξ₂))` in the two-atom family, where `ξ₁`, `ξ₂` merge
///   the last two atoms onto one of them and `λ = λ_{k+1}/(λ_k + λ_{k+1})`.
pub fn rigidity_demo(norm: &NormSpec, iso: &IsometrySpec, measure_count: usize, seed: u64) -> Result<DemoReport> {
    if !iso.validated {
        return Err(precondition("isometry has not been validated"));
    }
    if !norm.is_hsc() {
        return Err(precondition(format!("{} is not known to be horizontally strictly convex", norm.name())));
    }
    let g = norm.group();
    let mut rng = rng::stream(seed, streams::RIGIDITY_DEMO);
    let mut rows = Vec::new();

    let pf = verify_pushforward_isometry(iso, norm, measure_count, seed, DEMO_W1_TOL)?;
    let r = &pf.rows[0];
    rows.push(DemoRow {
        check_name: "w1_preservation".into(),
        passed: r.passed,
        worst_deviation: if r.worst_slack.is_finite() { -r.worst_slack } else { 0.0 },
    });

    let small = measure_count.clamp(1, 20);
    let (mut dirac_ok, mut dirac_dev) = (true, 0.0f64);
    let (mut map_ok, mut map_dev) = (true, 0.0f64);
    for _ in 0..measure_count.max(1) {
        let q = GroupPoint::new(rng::uniform_vec(&mut rng, g.dim(), -2.0, 2.0));
        let img = push_forward(iso, &DiscreteMeasure::dirac(q.clone()))?;
        if !img.is_dirac() {
            dirac_ok = false;
            dirac_dev = dirac_dev.max((img.len() - 1) as f64);
            continue;
        }
        let dev = linalg::max_abs_diff(img.points()[0].coords(), iso.map(&q).coords());
        map_dev = map_dev.max(dev);
        map_ok &= dev <= DEMO_POINT_TOL * linalg::norm(q.coords()).max(1.0);

        let mut qp = GroupPoint::new(rng::uniform_vec(&mut rng, g.dim(), -2.0, 2.0)).into_vec();
        qp[g.horizontal_dim()] += 0.5;
        let qp = GroupPoint::new(qp);
        if !tilde_related(norm, &q, &qp, DEFAULT_HORIZONTAL_TOL)? {
            continue;
        }
        let a = push_forward(iso, &DiscreteMeasure::dirac(q.clone()))?;
        let b = push_forward(iso, &DiscreteMeasure::dirac(qp.clone()))?;
        match match_dirac_pair_form(&a, &b)? {
            Some(form) if form.eta.is_none() => {
                let related = tilde_related(norm, &form.q, &form.q_prime, DEFAULT_HORIZONTAL_TOL)?;
                dirac_ok &= related;
            }
            _ => dirac_ok = false,
        }
    }
    rows.push(DemoRow { check_name: "dirac_to_dirac".into(), passed: dirac_ok, worst_deviation: dirac_dev });
    rows.push(DemoRow { check_name: "induced_point_map".into(), passed: map_ok, worst_deviation: map_dev });

    for eps in DEMO_EPSILONS {
        let (mut ok, mut worst) = (true, 0.0f64);
        for _ in 0..small {
            let atoms = rng.random_range(2..=6);
            let xi = random_measure(&mut rng, g, atoms);
            let moved = perturb_to_tilde_position(norm, xi.points(), eps, rng.random())?;
            let xi2 = DiscreteMeasure::new(moved.clone(), xi.weights().to_vec())?;
            let d = w1(norm, &xi, &xi2)?;
            worst = worst.max(d);
            ok &= d < eps && xi2.len() == xi.len();
            for i in 0..moved.len() {
                for j in (i + 1)..moved.len() {
                    ok &= tilde_related(norm, &moved[i], &moved[j], DEFAULT_HORIZONTAL_TOL)?;
                }
            }
        }
        rows.push(DemoRow { check_name: format!("f_tilde_density_{eps}"), passed: ok, worst_deviation: worst });
    }

    let (mut ok, mut worst) = (true, 0.0f64);
    for _ in 0..small {
        let atoms = rng.random_range(2..=5);
        let raw = random_measure(&mut rng, g, atoms);
        let pts = perturb_to_tilde_position(norm, raw.points(), 0.1, rng.random())?;
        let w = raw.weights().to_vec();
        let xi = DiscreteMeasure::new(pts.clone(), w.clone())?;
        let k = pts.len() - 2;
        let (lk, lk1) = (w[k], w[k + 1]);
        let lambda = lk1 / (lk + lk1);
        let merged = |keep: usize| -> Result<DiscreteMeasure> {
            let mut p: Vec<GroupPoint> = pts[..k].to_vec();
            let mut ww: Vec<f64> = w[..k].to_vec();
            p.push(pts[keep].clone());
            ww.push(lk + lk1);
            DiscreteMeasure::new(p, ww)
        };
        let xi1 = push_forward(iso, &merged(k)?)?;
        let xi2 = push_forward(iso, &merged(k + 1)?)?;
        let target = push_forward(iso, &xi)?;
        let Some(form) = match_dirac_pair_form(&xi1, &xi2)? else {
            ok = false;
            continue;
        };
        let sweep = alpha_sweep(norm, &form, lambda, DEMO_W1_TOL)?;
        ok &= sweep.unique_at_candidate();
        let rebuilt = ratio_family_member(&form, sweep.candidate)?;
        let d = w1(norm, &rebuilt, &target)?;
        worst = worst.max(d);
        ok &= d <= DEMO_W1_TOL;
    }
    rows.push(DemoRow { check_name: "reconstruction".into(), passed: ok, worst_deviation: worst });
    Ok(DemoReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormKind;

    fn h1() -> GroupSpec {
        GroupSpec::heisenberg(1).unwrap()
    }

    fn kor() -> NormSpec {
        NormSpec::koranyi(h1()).unwrap()
    }

    fn p(v: [f64; 3]) -> GroupPoint {
        GroupPoint::from(v)
    }

    fn rotation(theta: f64) -> Vec<Vec<f64>> {
        let (s, c) = theta.sin_cos();
        vec![vec![c, -s, 0.0], vec![s, c, 0.0], vec![0.0, 0.0, 1.0]]
    }

    fn swap() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, -1.0]]
    }

    #[test]
    fn left_translation_examples() {
        let g = h1();
        let id = make_left_translation(&g, g.identity()).unwrap();
        assert_eq!(id.apply(&p([1.0, 2.0, 3.0])).unwrap(), p([1.0, 2.0, 3.0]));
        let up = make_left_translation(&g, p([0.0, 0.0, 1.0])).unwrap();
        assert_eq!(up.apply(&p([1.0, 0.0, 0.0])).unwrap(), p([1.0, 0.0, 1.0]));
        let a = make_left_translation(&g, p([1.0, -1.0, 0.5])).unwrap();
        let b = make_left_translation(&g, p([0.3, 2.0, -1.0])).unwrap();
        let ab = a.compose(&b);
        assert_eq!(ab.translation(), &g.mul(&p([1.0, -1.0, 0.5]), &p([0.3, 2.0, -1.0])));
        assert!(make_left_translation(&g, GroupPoint::new(vec![0.0; 2])).is_err());
    }

    #[test]
    fn linear_examples() {
        let k = kor();
        assert!(make_linear_isometry(&k, rotation(0.7)).unwrap().is_validated());
        assert!(make_linear_isometry(&k, swap()).is_ok());
        let scale = vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 4.0]];
        let err = make_linear_isometry(&k, scale).unwrap_err();
        assert!(err.to_string().contains("norm"), "{err}");
        let mixing = vec![vec![1.0, 0.0, 0.1], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(make_linear_isometry(&k, mixing).unwrap_err().to_string().contains("layers"));
        // Swapping x and y without negating z is not a homomorphism.
        let bad = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(make_linear_isometry(&k, bad).unwrap_err().to_string().contains("homomorphism"));
    }

    #[test]
    fn push_forward_examples() {
        let k = kor();
        let g = h1();
        let mu = DiscreteMeasure::new(vec![p([1.0, 0.0, 0.0]), p([0.0, 1.0, 2.0])], vec![0.4, 0.6]).unwrap();
        assert_eq!(push_forward(&IsometrySpec::identity(&g), &mu).unwrap(), mu);
        let rot = make_linear_isometry(&k, rotation(0.3)).unwrap();
        let q = p([0.5, -0.2, 1.0]);
        assert_eq!(push_forward(&rot, &DiscreteMeasure::dirac(q.clone())).unwrap(), DiscreteMeasure::dirac(rot.apply(&q).unwrap()));
        let forced = IsometrySpec::unvalidated(&g, g.identity(), vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 4.0]]).unwrap();
        assert!(push_forward(&forced, &mu).is_err());
        assert!(verify_pushforward_isometry(&forced, &k, 1, 0, 1e-9).is_err());
    }

    #[test]
    fn push_forward_is_a_homomorphism() {
        let k = kor();
        let g = h1();
        let a = make_left_translation(&g, p([0.3, 0.1, -2.0])).unwrap().compose(&make_linear_isometry(&k, rotation(1.1)).unwrap());
        let b = make_left_translation(&g, p([-1.0, 0.4, 0.5])).unwrap().compose(&make_linear_isometry(&k, swap()).unwrap());
        let mut r = rng::stream(3, 0);
        for _ in 0..50 {
            let mu = random_measure(&mut r, &g, 5);
            let lhs = push_forward(&a.compose(&b), &mu).unwrap();
            let rhs = push_forward(&a, &push_forward(&b, &mu).unwrap()).unwrap();
            assert_eq!(lhs.len(), rhs.len());
            for (x, y) in lhs.points().iter().zip(rhs.points()) {
                assert!(linalg::max_abs_diff(x.coords(), y.coords()) <= 1e-12);
            }
            // Weights are carried over unchanged; only their order moves.
            let sorted = |m: &DiscreteMeasure| {
                let mut w = m.weights().to_vec();
                w.sort_by(f64::total_cmp);
                w
            };
            assert_eq!(sorted(&lhs), sorted(&mu));
        }
    }

    #[test]
    fn pushforward_preserves_w1() {
        let k = kor();
        let g = h1();
        for iso in [
            make_left_translation(&g, p([0.0, 0.0, 1.0])).unwrap(),
            make_linear_isometry(&k, rotation(0.4)).unwrap(),
        ] {
            let rep = verify_pushforward_isometry(&iso, &k, 30, 1, 1e-9).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn perturbation_examples() {
        let k = kor();
        let pts = vec![p([0.0, 0.0, 0.0]), p([1.0, 0.0, 0.0])];
        let out = perturb_to_tilde_position(&k, &pts, 0.1, 0).unwrap();
        for (a, b) in pts.iter().zip(&out) {
            assert!(k.dist(a, b) < 0.1);
        }
        assert!(tilde_related(&k, &out[0], &out[1], 1e-12).unwrap());
        assert_eq!(out[1].coords()[..2], [1.0, 0.0]);

        let one = vec![p([1.0, 2.0, 3.0])];
        assert_eq!(perturb_to_tilde_position(&k, &one, 0.1, 0).unwrap(), one);

        let line = vec![p([0.0, 0.0, 0.0]), p([1.0, 0.0, 0.0]), p([2.0, 0.0, 0.0])];
        let out = perturb_to_tilde_position(&k, &line, 0.01, 5).unwrap();
        for i in 0..3 {
            assert!(k.dist(&line[i], &out[i]) < 0.01);
            for j in (i + 1)..3 {
                assert!(tilde_related(&k, &out[i], &out[j], 1e-12).unwrap());
            }
        }
        let pmax = NormSpec::new(NormKind::PMax { p: 2.0, a: 1.0 }, h1()).unwrap();
        assert!(perturb_to_tilde_position(&pmax, &line, 0.1, 0).is_err());
    }

    #[test]
    fn demo_identity_and_translation() {
        let k = kor();
        let g = h1();
        let rep = rigidity_demo(&k, &IsometrySpec::identity(&g), 20, 0).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.row("induced_point_map").unwrap().worst_deviation, 0.0);
        let tr = make_left_translation(&g, p([0.0, 0.0, 1.0])).unwrap();
        let rep = rigidity_demo(&k, &tr, 20, 1).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.to_csv().starts_with("check_name,status,worst_deviation\n"));
    }
}
