//! Finitely supported measures and the 1-Wasserstein distance `d₁`.
//!
//! Measures may have any positive total mass; `d₁` is defined between
//! measures of equal total. Distances are exact optima of the
//! transportation problem with ground cost `d_N`, solved by
//! [`crate::transport::solve`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::GroupPoint;
use crate::linalg;
use crate::norms::{cmp_coords, NormSpec};
use crate::transport;

/// Euclidean distance below which two support points are identified.
pub const POINT_TOL: f64 = 1e-12;
/// Absolute tolerance on equality of total masses.
pub const MASS_TOL: f64 = 1e-10;
/// Residual weights at or below this are dropped when subtracting measures.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// A finitely supported measure with strictly positive weights. Points are
/// pairwise distinct (up to [`POINT_TOL`]) and sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    points: Vec<GroupPoint>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMeasure::deserialize(d)?;
        DiscreteMeasure::new(raw.points.into_iter().map(GroupPoint::new).collect(), raw.weights)
            .map_err(serde::de::Error::custom)
    }
}

impl DiscreteMeasure {
    pub fn new(points: Vec<GroupPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("measure needs at least one support point"));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        let dim = points[0].dim();
        let mut merged_p: Vec<GroupPoint> = Vec::with_capacity(points.len());
        let mut merged_w: Vec<f64> = Vec::with_capacity(points.len());
        for (p, w) in points.into_iter().zip(weights) {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("weights must be positive and finite, got {w}")));
            }
            if p.coords().iter().any(|c| !c.is_finite()) {
                return Err(invalid("support points must have finite coordinates"));
            }
            match merged_p.iter().position(|q| same_point(q, &p)) {
                Some(k) => merged_w[k] += w,
                None => {
                    merged_p.push(p);
                    merged_w.push(w);
                }
            }
        }
        let mut idx: Vec<usize> = (0..merged_p.len()).collect();
        idx.sort_by(|&a, &b| cmp_coords(merged_p[a].coords(), merged_p[b].coords()));
        Ok(DiscreteMeasure {
            points: idx.iter().map(|&k| merged_p[k].clone()).collect(),
            weights: idx.iter().map(|&k| merged_w[k]).collect(),
        })
    }

    pub fn dirac(p: GroupPoint) -> Self {
        Self::weighted_dirac(p, 1.0).expect("unit weight is valid")
    }

    pub fn weighted_dirac(p: GroupPoint, w: f64) -> Result<Self> {
        Self::new(vec![p], vec![w])
    }

    pub fn points(&self) -> &[GroupPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_dirac(&self) -> bool {
        self.points.len() == 1
    }

    /// Weight of the atom at `p`, or 0.
    pub fn mass_at(&self, p: &GroupPoint) -> f64 {
        self.points
            .iter()
            .position(|q| same_point(q, p))
            .map_or(0.0, |k| self.weights[k])
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&GroupPoint, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.points.clone(), self.weights.iter().map(|w| w * s).collect())
    }

    /// The sum `self + other`.
    pub fn plus(&self, other: &DiscreteMeasure) -> Result<Self> {
        let mut p = self.points.clone();
        p.extend(other.points.iter().cloned());
        let mut w = self.weights.clone();
        w.extend_from_slice(&other.weights);
        Self::new(p, w)
    }

    /// Maps every support point through `f`, keeping the weights.
    pub fn map_points(&self, f: impl Fn(&GroupPoint) -> GroupPoint) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect(), self.weights.clone())
    }
}

pub(crate) fn same_point(a: &GroupPoint, b: &GroupPoint) -> bool {
    a.dim() == b.dim() && linalg::norm(&linalg::sub(a.coords(), b.coords())) <= POINT_TOL
}

/// Sum of optional measures; `None` stands for the zero measure.
pub fn sum_opt(parts: &[Option<&DiscreteMeasure>]) -> Result<Option<DiscreteMeasure>> {
    let mut acc: Option<DiscreteMeasure> = None;
    for m in parts.iter().flatten() {
        acc = Some(match acc {
            None => (*m).clone(),
            Some(a) => a.plus(m)?,
        });
    }
    Ok(acc)
}

/// The measure sum `μ + ξ`.
pub fn translate_measure(mu: &DiscreteMeasure, xi: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    mu.plus(xi)
}

/// A transport plan between the supports of two measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub row_points: Vec<GroupPoint>,
    pub col_points: Vec<GroupPoint>,
    pub flow: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
}

impl Coupling {
    /// Cells with positive flow as `(i, j, flow, cost)`, row-major.
    pub fn edges(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.flow.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                if f > 0.0 {
                    out.push((i, j, f, self.cost[i][j]));
                }
            }
        }
        out
    }

    pub fn value(&self) -> f64 {
        self.edges().iter().map(|e| e.2 * e.3).sum()
    }

    /// Flow between the atoms at `p` (row side) and `q` (column side).
    pub fn flow_between(&self, p: &GroupPoint, q: &GroupPoint) -> f64 {
        let i = self.row_points.iter().position(|a| same_point(a, p));
        let j = self.col_points.iter().position(|b| same_point(b, q));
        match (i, j) {
            (Some(i), Some(j)) => self.flow[i][j],
            _ => 0.0,
        }
    }

    /// CSV with columns `i,j,flow,cost`, positive-flow cells only.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,flow,cost\n");
        for (i, j, f, c) in self.edges() {
            s.push_str(&format!(
                "{i},{j},{},{}\n",
                crate::report::fmt_f64(f),
                crate::report::fmt_f64(c)
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct W1Solution {
    pub value: f64,
    pub plan: Coupling,
    /// Basic cells of the optimal spanning-tree basis.
    pub basis: Vec<(usize, usize)>,
    pub pivots: usize,
}

fn check_measure(norm: &NormSpec, mu: &DiscreteMeasure) -> Result<()> {
    let dim = norm.group().dim();
    if mu.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: mu.dim() });
    }
    Ok(())
}

fn check_totals(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > MASS_TOL {
        return Err(Error::MassMismatch { left: a, right: b, tol: MASS_TOL });
    }
    Ok(())
}

/// Dense cost matrix `d_N(p_i, q_j)`.
pub fn cost_matrix(norm: &NormSpec, rows: &[GroupPoint], cols: &[GroupPoint]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|p| cols.iter().map(|q| norm.dist(p, q)).collect())
        .collect()
}

/// Exact `d₁(μ, ν)` and an optimal basic plan.
pub fn w1_distance(norm: &NormSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<W1Solution> {
    check_measure(norm, mu)?;
    check_measure(norm, nu)?;
    check_totals(mu, nu)?;
    let cost = cost_matrix(norm, &mu.points, &nu.points);
    // Totals agree to MASS_TOL; rescale so the simplex sees exact balance.
    let ratio = mu.total() / nu.total();
    let demand: Vec<f64> = nu.weights.iter().map(|w| w * ratio).collect();
    let sol = transport::solve(&cost, &mu.weights, &demand)?;
    Ok(W1Solution {
        value: sol.value,
        plan: Coupling {
            row_points: mu.points.clone(),
            col_points: nu.points.clone(),
            flow: sol.flow,
            cost,
        },
        basis: sol.basis,
        pivots: sol.pivots,
    })
}

/// `d₁(μ, ν)` only.
pub fn w1(norm: &NormSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(w1_distance(norm, mu, nu)?.value)
}

/// Spanning-tree enumeration oracle for small instances (`m + n ≤ 8`).
pub fn w1_bruteforce(cost: &[Vec<f64>], mu_weights: &[f64], nu_weights: &[f64]) -> Result<f64> {
    let (a, b): (f64, f64) = (mu_weights.iter().sum(), nu_weights.iter().sum());
    if (a - b).abs() > MASS_TOL {
        return Err(Error::MassMismatch { left: a, right: b, tol: MASS_TOL });
    }
    transport::bruteforce(cost, mu_weights, nu_weights)
}

/// A 1-Lipschitz potential on the union of two supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotential {
    pub points: Vec<GroupPoint>,
    pub values: Vec<f64>,
    /// `max |f(u) − f(v)| / d(u, v)` over distinct support pairs.
    pub lipschitz_bound: f64,
}

impl DualPotential {
    pub fn value_at(&self, p: &GroupPoint) -> Option<f64> {
        self.points.iter().position(|q| same_point(q, p)).map(|k| self.values[k])
    }

    /// `∫ f d(ν − μ)`.
    pub fn integrate(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let f = |p: &GroupPoint| self.value_at(p).unwrap_or(f64::NAN);
        nu.atoms().map(|(p, w)| w * f(p)).sum::<f64>() - mu.atoms().map(|(p, w)| w * f(p)).sum::<f64>()
    }
}

/// Kantorovich–Rubinstein certificate for a plan.
///
/// The potential is the shortest-path solution of the difference
/// constraints `f(b) ≤ f(a) + d(a, b)` (1-Lipschitz) and
/// `f(p_i) ≤ f(q_j) − c_ij` on cells carrying flow (complementary
/// slackness). It exists iff the plan is optimal; a negative cycle means
/// the plan is not. The potential is shifted so that it vanishes at the
/// first atom of `μ`. Returns the potential and the gap
/// `⟨c, π⟩ − ∫ f d(ν − μ)`.
pub fn kr_dual(
    norm: &NormSpec,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &Coupling,
) -> Result<(DualPotential, f64)> {
    check_measure(norm, mu)?;
    check_measure(norm, nu)?;
    check_totals(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    if plan.flow.len() != m || plan.flow.iter().any(|r| r.len() != n) {
        return Err(invalid("plan shape does not match the measures"));
    }
    for (i, row) in plan.flow.iter().enumerate() {
        if !same_point(&plan.row_points[i], &mu.points[i]) {
            return Err(invalid("plan rows are not the support of mu"));
        }
        if (row.iter().sum::<f64>() - mu.weights[i]).abs() > MASS_TOL || row.iter().any(|f| *f < -1e-12) {
            return Err(invalid(format!("plan row {i} does not match mu")));
        }
    }
    for j in 0..n {
        if !same_point(&plan.col_points[j], &nu.points[j]) {
            return Err(invalid("plan columns are not the support of nu"));
        }
        let s: f64 = plan.flow.iter().map(|r| r[j]).sum();
        if (s - nu.weights[j]).abs() > MASS_TOL {
            return Err(invalid(format!("plan column {j} does not match nu")));
        }
    }

    let mut nodes: Vec<GroupPoint> = Vec::new();
    let index = |p: &GroupPoint, nodes: &mut Vec<GroupPoint>| match nodes.iter().position(|q| same_point(q, p)) {
        Some(k) => k,
        None => {
            nodes.push(p.clone());
            nodes.len() - 1
        }
    };
    let row_ix: Vec<usize> = mu.points.iter().map(|p| index(p, &mut nodes)).collect();
    let col_ix: Vec<usize> = nu.points.iter().map(|p| index(p, &mut nodes)).collect();
    let k = nodes.len();
    let dmat: Vec<Vec<f64>> = nodes.iter().map(|a| nodes.iter().map(|b| norm.dist(a, b)).collect()).collect();

    // Edge (a, b, w) encodes f(b) ≤ f(a) + w.
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(k * k + m * n);
    for a in 0..k {
        for b in 0..k {
            if a != b {
                edges.push((a, b, dmat[a][b]));
            }
        }
    }
    for (i, row) in plan.flow.iter().enumerate() {
        for (j, &f) in row.iter().enumerate() {
            if f > 0.0 {
                edges.push((col_ix[j], row_ix[i], -plan.cost[i][j]));
            }
        }
    }
    let scale = dmat.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
    let eps = 1e-12 * (1.0 + scale);
    let mut f = vec![0.0f64; k];
    let mut converged = false;
    for _ in 0..=k {
        let mut changed = false;
        for &(a, b, w) in &edges {
            if f[a] + w < f[b] - eps {
                f[b] = f[a] + w;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Suboptimal(
            "complementary slackness admits no 1-Lipschitz potential (negative cycle)".into(),
        ));
    }
    let shift = f[row_ix[0]];
    f.iter_mut().for_each(|v| *v -= shift);

    for (i, row) in plan.flow.iter().enumerate() {
        for (j, &fl) in row.iter().enumerate() {
            let slack = plan.cost[i][j] - (f[col_ix[j]] - f[row_ix[i]]);
            if fl > 0.0 && slack.abs() > 1e-9 {
                return Err(Error::Suboptimal(format!(
                    "cell ({i}, {j}) carries flow but has reduced cost {slack:e}"
                )));
            }
        }
    }
    let mut lip = 0.0f64;
    for a in 0..k {
        for b in (a + 1)..k {
            if dmat[a][b] > 0.0 {
                lip = lip.max((f[a] - f[b]).abs() / dmat[a][b]);
            }
        }
    }
    let pot = DualPotential {
        points: nodes,
        values: f,
        lipschitz_bound: lip,
    };
    let gap = plan.value() - pot.integrate(mu, nu);
    Ok((pot, gap))
}

/// Common part and signed remainders of two measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Pointwise minimum `η`.
    pub eta: Option<DiscreteMeasure>,
    /// `μ′ = μ − η`.
    pub mu_pos: Option<DiscreteMeasure>,
    /// `ν′ = ν − η`.
    pub nu_neg: Option<DiscreteMeasure>,
}

/// Splits `μ = η + μ′`, `ν = η + ν′` with `η = min(μ, ν)`, so `μ′` and `ν′`
/// have disjoint supports. `None` parts are zero measures. Remainders at
/// most [`RESIDUAL_TOL`] are treated as zero.
pub fn decompose(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Decomposition> {
    check_totals(mu, nu)?;
    let (mut ep, mut ew) = (Vec::new(), Vec::new());
    let (mut mp, mut mw) = (Vec::new(), Vec::new());
    let (mut np, mut nw) = (Vec::new(), Vec::new());
    for (p, a) in mu.atoms() {
        let b = nu.mass_at(p);
        let e = a.min(b);
        if e > RESIDUAL_TOL {
            ep.push(p.clone());
            ew.push(e);
        }
        if a - e > RESIDUAL_TOL {
            mp.push(p.clone());
            mw.push(a - e);
        }
    }
    for (q, b) in nu.atoms() {
        let a = mu.mass_at(q);
        let e = a.min(b);
        if b - e > RESIDUAL_TOL {
            np.push(q.clone());
            nw.push(b - e);
        }
    }
    let build = |p: Vec<GroupPoint>, w: Vec<f64>| -> Result<Option<DiscreteMeasure>> {
        if p.is_empty() { Ok(None) } else { DiscreteMeasure::new(p, w).map(Some) }
    };
    Ok(Decomposition {
        eta: build(ep, ew)?,
        mu_pos: build(mp, mw)?,
        nu_neg: build(np, nw)?,
    })
}

/// `μ = η + c δ_q`, `ν = η + c δ_{q′}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracPairForm {
    pub eta: Option<DiscreteMeasure>,
    pub c: f64,
    pub q: GroupPoint,
    pub q_prime: GroupPoint,
}

/// Recognises `μ − ν = c δ_q − c δ_{q′}`; `None` when the remainders are not
/// single atoms (including `μ = ν`).
pub fn match_dirac_pair_form(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Option<DiracPairForm>> {
    let d = decompose(mu, nu)?;
    match (d.mu_pos, d.nu_neg) {
        (Some(a), Some(b)) if a.is_dirac() && b.is_dirac() => Ok(Some(DiracPairForm {
            eta: d.eta,
            c: a.weights[0],
            q: a.points[0].clone(),
            q_prime: b.points[0].clone(),
        })),
        _ => Ok(None),
    }
}
