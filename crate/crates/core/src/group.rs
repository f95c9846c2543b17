//! Step-two Carnot groups in exponential coordinates of the first kind.
//!
//! A point is stored as its coordinate vector `(x, y)` with `x` in the first
//! (horizontal) layer and `y` in the second layer. In these coordinates the
//! identity is the zero vector and inversion is negation. The product is
//!
//! ```text
//! (x, y) · (x', y') = (x + x', y + y' + P(x, x'))
//! ```
//!
//! where `P` is bilinear and skew-symmetric:
//!
//! * Heisenberg `H^n` (coordinates `(x_1..x_n, y_1..y_n, z)`):
//!   `P = 2 Σ (x'_i y_i - x_i y'_i)`.
//! * generic step two with bracket tensor `B`: `P_k = ½ Σ_ab B[a][b][k] x_a x'_b`
//!   (the truncated Baker–Campbell–Hausdorff product).
//!
//! The two conventions give isomorphic groups; the Heisenberg one is kept
//! verbatim because the norm formulas below are written against it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Default absolute tolerance for horizontality tests.
pub const DEFAULT_HORIZONTAL_TOL: f64 = 1e-12;

/// A point of a Carnot group, in first-kind coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupPoint(Vec<f64>);

impl GroupPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        GroupPoint(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        GroupPoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

impl From<Vec<f64>> for GroupPoint {
    fn from(v: Vec<f64>) -> Self {
        GroupPoint(v)
    }
}

impl<const N: usize> From<[f64; N]> for GroupPoint {
    fn from(v: [f64; N]) -> Self {
        GroupPoint(v.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupKind {
    Heisenberg {
        n: usize,
    },
    Step2 {
        n1: usize,
        n2: usize,
        /// Flattened `B[a][b][k]` at `(a * n1 + b) * n2 + k`.
        bracket: Vec<f64>,
    },
}

/// A stratified group of step two together with its dilation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    kind: GroupKind,
    layer_dims: [usize; 2],
    weights: Vec<u8>,
}

impl GroupSpec {
    /// The Heisenberg group `H^n`, of topological dimension `2n + 1`.
    pub fn heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Heisenberg dimension n must be at least 1"));
        }
        Ok(Self::from_layers(GroupKind::Heisenberg { n }, 2 * n, 1))
    }

    /// A step-two group from its bracket tensor, given as nested arrays
    /// indexed `[a][b][k]` with `a, b < n1` and `k < n2`.
    pub fn step2(n1: usize, n2: usize, bracket: &[Vec<Vec<f64>>]) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("layer dimensions n1 and n2 must be positive"));
        }
        if bracket.len() != n1
            || bracket.iter().any(|row| {
                row.len() != n1 || row.iter().any(|col| col.len() != n2)
            })
        {
            return Err(invalid(format!(
                "bracket shape: expected a {n1}x{n1}x{n2} tensor"
            )));
        }
        let mut flat = vec![0.0; n1 * n1 * n2];
        for a in 0..n1 {
            for b in 0..n1 {
                for k in 0..n2 {
                    flat[(a * n1 + b) * n2 + k] = bracket[a][b][k];
                }
            }
        }
        Self::step2_flat(n1, n2, flat)
    }

    /// As [`GroupSpec::step2`], with the tensor already flattened as
    /// `(a * n1 + b) * n2 + k`.
    pub fn step2_flat(n1: usize, n2: usize, bracket: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("layer dimensions n1 and n2 must be positive"));
        }
        if bracket.len() != n1 * n1 * n2 {
            return Err(invalid(format!(
                "bracket shape: expected {} entries for a {n1}x{n1}x{n2} tensor, found {}",
                n1 * n1 * n2,
                bracket.len()
            )));
        }
        if bracket.iter().any(|v| !v.is_finite()) {
            return Err(invalid("bracket entries must be finite"));
        }
        for a in 0..n1 {
            for b in 0..n1 {
                for k in 0..n2 {
                    let ab = bracket[(a * n1 + b) * n2 + k];
                    let ba = bracket[(b * n1 + a) * n2 + k];
                    if ab != -ba {
                        return Err(invalid(format!(
                            "bracket skew-symmetry: B[{a}][{b}][{k}] = {ab} but B[{b}][{a}][{k}] = {ba}"
                        )));
                    }
                }
            }
        }
        if bracket.iter().all(|&v| v == 0.0) {
            return Err(invalid(
                "bracket non-degeneracy: [V1, V1] must be nonzero but the tensor is identically zero",
            ));
        }
        Ok(Self::from_layers(GroupKind::Step2 { n1, n2, bracket }, n1, n2))
    }

    fn from_layers(kind: GroupKind, n1: usize, n2: usize) -> Self {
        let mut weights = vec![1u8; n1];
        weights.extend(std::iter::repeat_n(2u8, n2));
        GroupSpec {
            kind,
            layer_dims: [n1, n2],
            weights,
        }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn layer_dims(&self) -> [usize; 2] {
        self.layer_dims
    }

    pub fn dim(&self) -> usize {
        self.layer_dims[0] + self.layer_dims[1]
    }

    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn vertical_dim(&self) -> usize {
        self.layer_dims[1]
    }

    /// Dilation weight `σ_i ∈ {1, 2}` of each coordinate.
    pub fn weights(&self) -> &[u8] {
        &self.weights
    }

    pub fn is_heisenberg(&self) -> bool {
        matches!(self.kind, GroupKind::Heisenberg { .. })
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint::zeros(self.dim())
    }

    pub fn check(&self, p: &GroupPoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok(())
    }

    /// Splits coordinates into the horizontal and vertical parts.
    pub fn split<'a>(&self, p: &'a GroupPoint) -> (&'a [f64], &'a [f64]) {
        p.coords().split_at(self.layer_dims[0])
    }

    /// The bilinear second-layer correction `P(x, x')` of the product of two
    /// points with horizontal parts `x` and `x'`.
    pub fn bracket_term(&self, x: &[f64], xp: &[f64]) -> Vec<f64> {
        match &self.kind {
            GroupKind::Heisenberg { n } => {
                let n = *n;
                let mut s = 0.0;
                for i in 0..n {
                    s += xp[i] * x[n + i] - x[i] * xp[n + i];
                }
                vec![2.0 * s]
            }
            GroupKind::Step2 { n1, n2, bracket } => {
                let (n1, n2) = (*n1, *n2);
                // Summed over a < b using skew-symmetry, so that P(x, -x)
                // vanishes exactly in floating point.
                let mut out = vec![0.0; n2];
                for a in 0..n1 {
                    for b in (a + 1)..n1 {
                        let w = x[a] * xp[b] - x[b] * xp[a];
                        if w == 0.0 {
                            continue;
                        }
                        let base = (a * n1 + b) * n2;
                        for (k, o) in out.iter_mut().enumerate() {
                            *o += bracket[base + k] * w;
                        }
                    }
                }
                for o in &mut out {
                    *o *= 0.5;
                }
                out
            }
        }
    }

    /// Group product `p · q`.
    pub fn multiply(&self, p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.mul(p, q))
    }

    pub(crate) fn mul(&self, p: &GroupPoint, q: &GroupPoint) -> GroupPoint {
        let n1 = self.layer_dims[0];
        let (xp, _) = self.split(p);
        let (xq, _) = self.split(q);
        let corr = self.bracket_term(xp, xq);
        let mut out: Vec<f64> = p.coords().iter().zip(q.coords()).map(|(a, b)| a + b).collect();
        for (k, c) in corr.into_iter().enumerate() {
            out[n1 + k] += c;
        }
        GroupPoint(out)
    }

    /// Group inverse; coordinate-wise negation in first-kind coordinates.
    pub fn inverse(&self, p: &GroupPoint) -> Result<GroupPoint> {
        self.check(p)?;
        Ok(self.inv(p))
    }

    pub(crate) fn inv(&self, p: &GroupPoint) -> GroupPoint {
        GroupPoint(p.coords().iter().map(|c| -c).collect())
    }

    /// `p^{-1} · q`.
    pub(crate) fn between(&self, p: &GroupPoint, q: &GroupPoint) -> GroupPoint {
        self.mul(&self.inv(p), q)
    }

    /// Anisotropic dilation `δ_λ`.
    pub fn dilate(&self, lambda: f64, p: &GroupPoint) -> Result<GroupPoint> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("dilation factor must be positive, got {lambda}")));
        }
        self.check(p)?;
        Ok(self.dil(lambda, p))
    }

    pub(crate) fn dil(&self, lambda: f64, p: &GroupPoint) -> GroupPoint {
        let l2 = lambda * lambda;
        GroupPoint(
            p.coords()
                .iter()
                .zip(&self.weights)
                .map(|(c, &w)| if w == 1 { c * lambda } else { c * l2 })
                .collect(),
        )
    }

    /// True iff every second-layer coordinate is within `tol` of zero.
    pub fn is_horizontal(&self, p: &GroupPoint, tol: f64) -> Result<bool> {
        self.check(p)?;
        Ok(self.horizontal(p, tol))
    }

    pub(crate) fn horizontal(&self, p: &GroupPoint, tol: f64) -> bool {
        self.split(p).1.iter().all(|c| c.abs() <= tol)
    }

    /// Whether `p` and `q` are horizontal and their horizontal parts are
    /// parallel (with either orientation). Both points must differ from the
    /// identity.
    pub fn same_horizontal_line_through_origin(
        &self,
        p: &GroupPoint,
        q: &GroupPoint,
        tol: f64,
    ) -> Result<bool> {
        self.line_test(p, q, tol, false)
    }

    /// As [`Self::same_horizontal_line_through_origin`], restricted to
    /// horizontal parts pointing the same way.
    pub fn same_horizontal_ray(&self, p: &GroupPoint, q: &GroupPoint, tol: f64) -> Result<bool> {
        self.line_test(p, q, tol, true)
    }

    fn line_test(&self, p: &GroupPoint, q: &GroupPoint, tol: f64, ray_only: bool) -> Result<bool> {
        self.check(p)?;
        self.check(q)?;
        if p.is_zero() || q.is_zero() {
            return Err(invalid("horizontal line test requires points different from the identity"));
        }
        Ok(self.aligned(p, q, tol, ray_only))
    }

    pub(crate) fn aligned(&self, p: &GroupPoint, q: &GroupPoint, tol: f64, ray_only: bool) -> bool {
        if !self.horizontal(p, tol) || !self.horizontal(q, tol) {
            return false;
        }
        let (xp, _) = self.split(p);
        let (xq, _) = self.split(q);
        let np = linalg::norm(xp);
        let nq = linalg::norm(xq);
        if np == 0.0 || nq == 0.0 {
            return false;
        }
        let scale = tol * (np * nq).max(1.0);
        let signs: &[f64] = if ray_only { &[1.0] } else { &[1.0, -1.0] };
        signs.iter().any(|&s| {
            let resid: Vec<f64> = xp
                .iter()
                .zip(xq)
                .map(|(a, b)| np * b - s * nq * a)
                .collect();
            linalg::norm(&resid) <= scale
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn h1() -> GroupSpec {
        GroupSpec::heisenberg(1).unwrap()
    }

    fn p(v: &[f64]) -> GroupPoint {
        GroupPoint::new(v.to_vec())
    }

    /// A rank-two bracket on a 3-dimensional first layer with a
    /// 2-dimensional second layer.
    pub(crate) fn sample_step2() -> GroupSpec {
        let mut b = vec![vec![vec![0.0; 2]; 3]; 3];
        b[0][1] = vec![1.0, 0.0];
        b[1][0] = vec![-1.0, 0.0];
        b[0][2] = vec![0.5, 2.0];
        b[2][0] = vec![-0.5, -2.0];
        b[1][2] = vec![0.0, -1.5];
        b[2][1] = vec![0.0, 1.5];
        GroupSpec::step2(3, 2, &b).unwrap()
    }

    fn heis_like_bracket(v: f64) -> GroupSpec {
        let b = vec![
            vec![vec![0.0], vec![v]],
            vec![vec![-v], vec![0.0]],
        ];
        GroupSpec::step2(2, 1, &b).unwrap()
    }

    #[test]
    fn heisenberg_layers() {
        let g = h1();
        assert_eq!(g.dim(), 3);
        assert_eq!(g.weights(), &[1, 1, 2]);
        let g2 = GroupSpec::heisenberg(2).unwrap();
        assert_eq!(g2.dim(), 5);
        assert_eq!(g2.weights(), &[1, 1, 1, 1, 2]);
        assert!(GroupSpec::heisenberg(0).is_err());
    }

    #[test]
    fn step2_rejects_bad_brackets() {
        let zero = vec![vec![vec![0.0], vec![0.0]], vec![vec![0.0], vec![0.0]]];
        let e = GroupSpec::step2(2, 1, &zero).unwrap_err();
        assert!(e.to_string().contains("non-degeneracy"));

        let not_skew = vec![vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![0.0]]];
        let e = GroupSpec::step2(2, 1, &not_skew).unwrap_err();
        assert!(e.to_string().contains("skew-symmetry"));

        let wrong_shape = vec![vec![vec![0.0], vec![1.0]]];
        let e = GroupSpec::step2(2, 1, &wrong_shape).unwrap_err();
        assert!(e.to_string().contains("shape"));
    }

    #[test]
    fn heisenberg_product_by_hand() {
        let g = h1();
        let r = g.multiply(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(r.coords(), &[1.0, 1.0, -2.0]);
        let r = g.multiply(&p(&[1.0, 2.0, 3.0]), &p(&[-1.0, -2.0, -3.0])).unwrap();
        assert_eq!(r.coords(), &[0.0, 0.0, 0.0]);
        let q = p(&[0.3, -1.2, 4.0]);
        assert_eq!(g.multiply(&q, &g.identity()).unwrap(), q);
        assert_eq!(g.multiply(&g.identity(), &q).unwrap(), q);
    }

    #[test]
    fn inverse_examples() {
        let g = h1();
        assert_eq!(g.inverse(&p(&[1.0, 2.0, 3.0])).unwrap().coords(), &[-1.0, -2.0, -3.0]);
        assert_eq!(g.inverse(&g.identity()).unwrap(), g.identity());
        assert!(g.inverse(&p(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn dilation_examples() {
        let g = h1();
        assert_eq!(g.dilate(2.0, &p(&[1.0, 1.0, 1.0])).unwrap().coords(), &[2.0, 2.0, 4.0]);
        assert_eq!(g.dilate(0.5, &p(&[2.0, 2.0, 4.0])).unwrap().coords(), &[1.0, 1.0, 1.0]);
        let q = p(&[0.7, -3.0, 2.5]);
        assert_eq!(g.dilate(1.0, &q).unwrap(), q);
        assert!(g.dilate(0.0, &q).is_err());
        assert!(g.dilate(-1.0, &q).is_err());
    }

    #[test]
    fn horizontality() {
        let g = h1();
        assert!(g.is_horizontal(&p(&[3.0, -1.0, 0.0]), 0.0).unwrap());
        assert!(!g.is_horizontal(&p(&[0.0, 0.0, 1e-3]), 0.0).unwrap());
        assert!(g.is_horizontal(&p(&[1.0, 0.0, 1e-15]), 1e-12).unwrap());
    }

    #[test]
    fn horizontal_lines() {
        let g = h1();
        let t = DEFAULT_HORIZONTAL_TOL;
        assert!(g.same_horizontal_line_through_origin(&p(&[1.0, 0.0, 0.0]), &p(&[-2.0, 0.0, 0.0]), t).unwrap());
        assert!(!g.same_horizontal_line_through_origin(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0]), t).unwrap());
        assert!(!g.same_horizontal_line_through_origin(&p(&[1.0, 0.0, 0.1]), &p(&[2.0, 0.0, 0.0]), t).unwrap());
        assert!(g.same_horizontal_line_through_origin(&g.identity(), &p(&[2.0, 0.0, 0.0]), t).is_err());
        assert!(!g.same_horizontal_ray(&p(&[1.0, 0.0, 0.0]), &p(&[-2.0, 0.0, 0.0]), t).unwrap());
        assert!(g.same_horizontal_ray(&p(&[1.0, 1.0, 0.0]), &p(&[2.0, 2.0, 0.0]), t).unwrap());
    }

    #[test]
    fn step2_bracket_two_is_heisenberg_up_to_rescaling_the_centre() {
        // B[0][1][0] = 2 gives correction x y' - x' y, which is the
        // Heisenberg correction times -1/2; (x, y, z) -> (x, y, -z/2)
        // intertwines the two products.
        let h = h1();
        let s = heis_like_bracket(2.0);
        let phi = |q: &GroupPoint| p(&[q.coords()[0], q.coords()[1], -0.5 * q.coords()[2]]);
        let mut rng = rng::stream(11, 0);
        for _ in 0..1000 {
            let a = p(&rng::uniform_vec(&mut rng, 3, -5.0, 5.0));
            let b = p(&rng::uniform_vec(&mut rng, 3, -5.0, 5.0));
            let lhs = phi(&h.mul(&a, &b));
            let rhs = s.mul(&phi(&a), &phi(&b));
            assert!(linalg::max_abs_diff(lhs.coords(), rhs.coords()) <= 1e-14 * 50.0);
        }
    }

    #[test]
    fn step2_bracket_minus_four_matches_heisenberg_literally() {
        let h = h1();
        let s = heis_like_bracket(-4.0);
        let mut rng = rng::stream(12, 0);
        for _ in 0..1000 {
            let a = p(&rng::uniform_vec(&mut rng, 3, -5.0, 5.0));
            let b = p(&rng::uniform_vec(&mut rng, 3, -5.0, 5.0));
            let lhs = h.mul(&a, &b);
            let rhs = s.mul(&a, &b);
            let tol = 1e-14 * (1.0 + linalg::norm(lhs.coords()));
            assert!(linalg::max_abs_diff(lhs.coords(), rhs.coords()) <= tol);
        }
    }

    #[test]
    fn group_axioms_on_random_triples() {
        for g in [h1(), GroupSpec::heisenberg(2).unwrap(), sample_step2()] {
            let mut rng = rng::stream(3, 0);
            let n = g.dim();
            for _ in 0..1000 {
                let a = p(&rng::uniform_vec(&mut rng, n, -3.0, 3.0));
                let b = p(&rng::uniform_vec(&mut rng, n, -3.0, 3.0));
                let c = p(&rng::uniform_vec(&mut rng, n, -3.0, 3.0));
                let l = g.mul(&g.mul(&a, &b), &c);
                let r = g.mul(&a, &g.mul(&b, &c));
                assert!(linalg::max_abs_diff(l.coords(), r.coords()) <= 1e-12);

                let lam: f64 = rng.random_range(0.1..10.0);
                let l = g.dil(lam, &g.mul(&a, &b));
                let r = g.mul(&g.dil(lam, &a), &g.dil(lam, &b));
                let scale = 1.0 + linalg::norm(l.coords());
                assert!(linalg::max_abs_diff(l.coords(), r.coords()) <= 1e-12 * scale);

                let e = g.mul(&a, &g.inv(&a));
                let bound = 1e-14 * linalg::norm_sq(a.coords()).max(1.0);
                assert!(e.coords().iter().all(|c| c.abs() <= bound));
            }
        }
    }

    proptest! {
        #[test]
        fn dilation_semigroup(
            coords in proptest::collection::vec(-100.0f64..100.0, 3),
            l1 in 0.01f64..100.0,
            l2 in 0.01f64..100.0,
        ) {
            let g = h1();
            let q = GroupPoint::new(coords);
            let a = g.dil(l1, &g.dil(l2, &q));
            let b = g.dil(l1 * l2, &q);
            for (x, y) in a.coords().iter().zip(b.coords()) {
                prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(y.abs()).max(1e-300) * 4.0);
            }
        }

        #[test]
        fn step2_inverse_cancels(coords in proptest::collection::vec(-10.0f64..10.0, 5)) {
            let g = sample_step2();
            let q = GroupPoint::new(coords);
            let e = g.mul(&q, &g.inv(&q));
            for c in e.coords() {
                prop_assert!(c.abs() <= 1e-15);
            }
        }
    }
}
