//! Roots of complex polynomials.
//!
//! Coefficients are stored in ascending order: `c[k]` multiplies `z^k`.
//!
//! Two routes are available. The companion-matrix route takes the eigenvalues of
//! the Frobenius companion matrix of the monic polynomial and needs no starting
//! points. The Aberth–Ehrlich route iterates all roots simultaneously in
//! `O(n²)` per sweep; for degrees in the hundreds this is one to two orders of
//! magnitude cheaper than the dense eigenvalue problem. [`roots`] uses the
//! companion matrix up to [`COMPANION_MAX_DEGREE`] and Aberth above it, falling
//! back to the companion matrix if Aberth fails to converge.

use nalgebra::{DMatrix, Schur};

use crate::{Error, Result, C64};

pub const COMPANION_MAX_DEGREE: usize = 64;

const ABERTH_MAX_SWEEPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMethod {
    Companion,
    Aberth,
    /// Companion up to [`COMPANION_MAX_DEGREE`], Aberth above.
    Auto,
}

/// Evaluates the polynomial at `z` by Horner's rule.
pub fn eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// `[p(z), p'(z), p''(z)]` by Horner's rule.
pub fn eval_derivatives(coeffs: &[C64], z: C64) -> [C64; 3] {
    let zero = C64::new(0.0, 0.0);
    let (mut p, mut d1, mut d2) = (zero, zero, zero);
    for &c in coeffs.iter().rev() {
        d2 = d2 * z + d1 * 2.0;
        d1 = d1 * z + p;
        p = p * z + c;
    }
    [p, d1, d2]
}

/// Strips negligible leading and trailing coefficients.
///
/// Returns the trimmed slice and the number of roots at the origin removed from
/// the low end. Leading zeros correspond to roots at infinity and are dropped.
fn trim(coeffs: &[C64]) -> Result<(&[C64], usize)> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate("polynomial has no finite nonzero coefficients".into()));
    }
    let tol = scale * 1e-14;
    let lo = coeffs.iter().position(|c| c.norm() > tol).unwrap();
    let hi = coeffs.iter().rposition(|c| c.norm() > tol).unwrap();
    Ok((&coeffs[lo..=hi], lo))
}

/// All finite roots, with multiplicity. Roots are returned unordered.
pub fn roots(coeffs: &[C64], method: RootMethod) -> Result<Vec<C64>> {
    let (core, zeros) = trim(coeffs)?;
    let degree = core.len() - 1;
    let mut out = vec![C64::new(0.0, 0.0); zeros];
    if degree == 0 {
        return Ok(out);
    }
    let found = match method {
        RootMethod::Companion => companion_roots(core)?,
        RootMethod::Aberth => aberth_roots(core)?,
        RootMethod::Auto if degree <= COMPANION_MAX_DEGREE => companion_roots(core)?,
        RootMethod::Auto => match aberth_roots(core) {
            Ok(r) => r,
            Err(_) => companion_roots(core)?,
        },
    };
    out.extend(found);
    Ok(out)
}

/// Eigenvalues of the companion matrix of `coeffs` (leading coefficient nonzero).
pub fn companion_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    if n == 1 {
        return Ok(vec![-coeffs[0] / lead]);
    }
    let mut c = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        c[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        c[(i, n - 1)] = -coeffs[i] / lead;
    }
    let schur = Schur::try_new(c, f64::EPSILON, 100 * n)
        .ok_or_else(|| Error::Degenerate("companion-matrix QR iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Ratio `p(z)/p'(z)`, evaluated on the reversed polynomial outside the unit disk
/// so that high powers of `|z|` never overflow.
fn newton_ratio(coeffs: &[C64], z: C64) -> C64 {
    let n = coeffs.len() - 1;
    let horner = |it: &mut dyn Iterator<Item = &C64>, x: C64| {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in it {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    if z.norm() <= 1.0 {
        let (p, dp) = horner(&mut coeffs.iter().rev(), z);
        p / dp
    } else {
        // p(z) = zⁿ q(1/z) with q the reversed polynomial.
        let w = z.inv();
        let (q, dq) = horner(&mut coeffs.iter(), w);
        let denom = w * (C64::new(n as f64, 0.0) - w * dq / q);
        denom.inv()
    }
}

/// `|p(z)|` is within `factor·ε` of the rounding bound `Σ|cₖ||z|ᵏ`, i.e. `z` is
/// an exact root of a relatively tiny perturbation of `p`.
fn backward_stable(coeffs: &[C64], z: C64, factor: f64) -> bool {
    let (w, forward) = if z.norm() <= 1.0 { (z, false) } else { (z.inv(), true) };
    let r = w.norm();
    let mut p = C64::new(0.0, 0.0);
    let mut bound = 0.0;
    let mut step = |c: &C64| {
        p = p * w + c;
        bound = bound * r + c.norm();
    };
    if forward {
        coeffs.iter().for_each(&mut step);
    } else {
        coeffs.iter().rev().for_each(&mut step);
    }
    p.norm() <= factor * f64::EPSILON * bound
}

/// Aberth–Ehrlich simultaneous iteration (Gauss–Seidel updates).
pub fn aberth_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    if n == 1 {
        return Ok(vec![-coeffs[0] / lead]);
    }
    // Start on a circle at the geometric mean of the root moduli.
    let radius = (coeffs[0].norm() / lead.norm()).powf(1.0 / n as f64);
    let radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];

    for _ in 0..ABERTH_MAX_SWEEPS {
        let mut active = 0;
        for k in 0..n {
            if done[k] {
                continue;
            }
            active += 1;
            let ratio = newton_ratio(coeffs, z[k]);
            if !ratio.is_finite() {
                // p' vanished: nudge off the critical point.
                let bump = C64::new(1e-8, 1e-8) * (1.0 + z[k].norm());
                z[k] += bump;
                continue;
            }
            let step = aberth_step(coeffs, &z, k).expect("finite Newton ratio");
            z[k] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[k].norm().max(1e-300)
                || backward_stable(coeffs, z[k], 4.0 * n as f64)
            {
                done[k] = true;
            }
        }
        if active == 0 {
            return Ok(z);
        }
    }
    // Clustered roots stall before their steps reach rounding level; accept
    // them once every residual is at the rounding bound.
    if z.iter().all(|&zk| backward_stable(coeffs, zk, 64.0 * n as f64)) {
        Ok(z)
    } else {
        Err(Error::Degenerate("Aberth iteration did not converge".into()))
    }
}

fn aberth_step(coeffs: &[C64], z: &[C64], k: usize) -> Option<C64> {
    let ratio = newton_ratio(coeffs, z[k]);
    if !ratio.is_finite() {
        return None;
    }
    let mut repulsion = C64::new(0.0, 0.0);
    for (j, &zj) in z.iter().enumerate() {
        if j != k {
            let d = z[k] - zj;
            repulsion += d.conj() * (1.0 / d.norm_sqr());
        }
    }
    Some(ratio / (C64::new(1.0, 0.0) - ratio * repulsion))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(roots: &[C64]) -> Vec<C64> {
        let mut c = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        c
    }

    fn assert_same_multiset(mut got: Vec<C64>, want: &[C64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for w in want {
            let (i, d) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < tol, "root {w} missing (closest distance {d:e})");
            got.swap_remove(i);
        }
    }

    fn sample_roots(n: usize) -> Vec<C64> {
        (0..n)
            .map(|k| {
                let t = k as f64;
                C64::from_polar(0.5 + 0.1 * (t * 1.3).sin().abs() * 8.0, t * 2.399)
            })
            .collect()
    }

    #[test]
    fn quadratic_roots() {
        // z² + 1
        let c = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        for m in [RootMethod::Companion, RootMethod::Aberth] {
            assert_same_multiset(roots(&c, m).unwrap(), &[C64::i(), -C64::i()], 1e-12);
        }
    }

    #[test]
    fn both_methods_recover_known_roots() {
        let want = sample_roots(12);
        let c = from_roots(&want);
        assert_same_multiset(roots(&c, RootMethod::Companion).unwrap(), &want, 1e-8);
        assert_same_multiset(roots(&c, RootMethod::Aberth).unwrap(), &want, 1e-8);
    }

    #[test]
    fn aberth_handles_high_degree_unit_circle_roots() {
        // z^200 - 1
        let mut c = vec![C64::new(0.0, 0.0); 201];
        c[0] = C64::new(-1.0, 0.0);
        c[200] = C64::new(1.0, 0.0);
        let want: Vec<C64> = (0..200)
            .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 200.0))
            .collect();
        assert_same_multiset(roots(&c, RootMethod::Auto).unwrap(), &want, 1e-10);
    }

    #[test]
    fn derivatives_by_horner() {
        // p = 1 + 2z + 3z², at z = 2: 17, 14, 6.
        let c = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let [p, d1, d2] = eval_derivatives(&c, C64::new(2.0, 0.0));
        assert_eq!((p.re, d1.re, d2.re), (17.0, 14.0, 6.0));
        assert_eq!(eval(&c, C64::new(2.0, 0.0)), p);
    }

    #[test]
    fn double_root_is_resolved() {
        let r = C64::from_polar(1.0, 0.9);
        let c = from_roots(&[r, r, C64::new(0.3, 0.1), C64::new(-2.0, 1.0)]);
        for m in [RootMethod::Companion, RootMethod::Aberth] {
            let got = roots(&c, m).unwrap();
            let near = got.iter().filter(|z| (*z - r).norm() < 1e-6).count();
            assert_eq!(near, 2, "{m:?}");
        }
    }

    #[test]
    fn trimming_counts_origin_roots() {
        // z²(z - 2)
        let c = [
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-2.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        let got = roots(&c, RootMethod::Auto).unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(got.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(got.iter().any(|z| (z - 2.0).norm() < 1e-12));
    }

    #[test]
    fn constant_and_zero_polynomials() {
        assert!(roots(&[C64::new(0.0, 0.0); 3], RootMethod::Auto).is_err());
        let mono = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(3.0, 0.0)];
        let got = roots(&mono, RootMethod::Auto).unwrap();
        assert_eq!(got, vec![C64::new(0.0, 0.0); 2]);
    }

    #[test]
    fn methods_agree_on_random_polynomial() {
        use rand::Rng;
        let mut rng = crate::rng::stream(3);
        let c: Vec<C64> = (0..40)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let a = roots(&c, RootMethod::Companion).unwrap();
        let b = roots(&c, RootMethod::Aberth).unwrap();
        assert_same_multiset(a, &b, 1e-8);
        for z in b {
            assert!(eval(&c, z).norm() < 1e-9 * (1.0 + z.norm()).powi(39));
        }
    }
}
