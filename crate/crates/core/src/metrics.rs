//! Error metrics and spectral diagnostics.
//!
//! The central metric is the rotation-invariant factor distance
//! `dist(U, V) = min_R ||U R - V||_F` over orthogonal `R`, computed by the
//! orthogonal-Procrustes closed form. The module also provides condition
//! numbers, principal-angle distances between subspaces, the deviation norm
//! `||A*A(X) - X||` of a measurement operator on a fixed matrix, and
//! checkers for two perturbation inequalities (a Procrustes bound relating
//! factor distance to Gram distance, and the Davis-Kahan sin-theta bound).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mat::{eigh_by_magnitude, FactorMatrix, SymMatrix};
use crate::measurement::{gram_operator, GoeEnsemble};

/// Relative threshold below which singular values count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Descending singular values with the derived condition number over the
/// nonzero part of the spectrum.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    /// Ratio of the largest singular value to the smallest one above the
    /// rank tolerance; `1` for the zero matrix by convention.
    pub condition_number: f64,
    /// Number of singular values above `RANK_TOLERANCE * sigma_max`.
    pub rank_numerical: usize,
}

/// Spectral summary of a symmetric matrix (singular values are eigenvalue
/// magnitudes).
pub fn spectral_summary(x: &SymMatrix) -> SpectralSummary {
    let (vals, _) = eigh_by_magnitude(x);
    let singular_values: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let threshold = RANK_TOLERANCE * sigma_max;
    let rank_numerical = singular_values.iter().filter(|&&s| s > threshold).count();
    let sigma_min_nonzero = singular_values
        .iter()
        .copied()
        .filter(|&s| s > threshold)
        .last()
        .unwrap_or(sigma_max);
    let condition_number = if sigma_max == 0.0 { 1.0 } else { sigma_max / sigma_min_nonzero };
    SpectralSummary { singular_values, condition_number, rank_numerical }
}

/// Optimal orthogonal alignment of `U` onto `V`: the polar factor of
/// `Uᵀ V`, via SVD. Any completion is accepted on the rank-deficient part;
/// the objective value is unaffected.
fn procrustes_rotation(u: &FactorMatrix, v: &FactorMatrix) -> DMatrix<f64> {
    let cross = u.as_dmatrix().transpose() * v.as_dmatrix();
    let svd = cross.svd(true, true);
    let p = svd.u.expect("svd with vectors");
    let qt = svd.v_t.expect("svd with vectors");
    p * qt
}

/// Rotation-invariant distance `min_R ||U R - V||_F` over orthogonal `R`.
pub fn procrustes_dist(u: &FactorMatrix, v: &FactorMatrix) -> Result<f64> {
    if u.dim() != v.dim() || u.rank() != v.rank() {
        return Err(Error::DimensionMismatch {
            expected: u.dim() * u.rank(),
            got: v.dim() * v.rank(),
            what: "factor pair",
        });
    }
    let r = procrustes_rotation(u, v);
    let aligned = u.as_dmatrix() * r;
    Ok((aligned - v.as_dmatrix()).norm())
}

/// Result of evaluating a two-sided inequality.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `dist²(U, V) <= ||U Uᵀ - V Vᵀ||_F² / (2 (√2 - 1) σ_min²(U))`,
/// valid for any full-column-rank `U`.
pub fn procrustes_bound_check(u: &FactorMatrix, v: &FactorMatrix) -> Result<BoundCheck> {
    let sv = u.singular_values();
    let sigma_max = sv[0];
    let sigma_min = sv[sv.len() - 1];
    if sigma_min <= RANK_TOLERANCE * sigma_max {
        return Err(Error::RankDeficient { what: "procrustes bound reference factor" });
    }
    let dist = procrustes_dist(u, v)?;
    let lhs = dist * dist;
    let gram_gap = u.gram().sub(&v.gram()).frobenius_norm();
    let rhs = gram_gap * gram_gap / (2.0 * (core::f64::consts::SQRT_2 - 1.0) * sigma_min * sigma_min);
    let holds = lhs <= rhs * (1.0 + 1e-10) + 1e-12;
    Ok(BoundCheck { lhs, rhs, holds })
}

fn orthonormality_defect(basis: &DMatrix<f64>) -> f64 {
    let k = basis.ncols();
    let gram = basis.transpose() * basis;
    let mut defect = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

/// Sine of the largest principal angle between the column spans:
/// `||(I - A Aᵀ) B||_2`. Both arguments must have orthonormal columns.
pub fn subspace_angle(a_basis: &DMatrix<f64>, b_basis: &DMatrix<f64>) -> Result<f64> {
    for basis in [a_basis, b_basis] {
        let defect = orthonormality_defect(basis);
        if defect > 1e-10 {
            return Err(Error::NotOrthonormal { defect });
        }
    }
    if a_basis.nrows() != b_basis.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a_basis.nrows(),
            got: b_basis.nrows(),
            what: "subspace ambient dimension",
        });
    }
    let proj = a_basis * (a_basis.transpose() * b_basis);
    let residual = b_basis - proj;
    let sv = residual.svd(false, false).singular_values;
    Ok(sv.iter().fold(0.0f64, |acc, &s| acc.max(s)))
}

/// Outcome of the Davis-Kahan sin-theta check on a matrix pair.
#[derive(Debug, Clone, Copy)]
pub struct DavisKahanCheck {
    /// `||U_{2,r,⊥}ᵀ U_{1,r}||_2`, the sine of the largest principal angle
    /// between the leading invariant subspaces (magnitude ordering).
    pub angle: f64,
    /// `√2 ||(Z1 - Z2) U_{1,r}||_2 / (|λ_r| - |λ_{r+1}|)`.
    pub bound: f64,
    /// Whether the perturbation is small enough for the bound to apply:
    /// `||Z1 - Z2||_2 <= (1 - 1/√2)(|λ_r| - |λ_{r+1}|)`.
    pub applicable: bool,
    /// `angle <= bound` whenever applicable; `true` (no claim) otherwise.
    pub holds: bool,
}

/// Evaluates the Davis-Kahan inequality for the rank-`r` leading eigenspaces
/// of `z1` against those of the perturbed matrix `z2`. Eigenvalues are
/// ordered by magnitude.
pub fn davis_kahan_check(z1: &SymMatrix, z2: &SymMatrix, r: usize) -> Result<DavisKahanCheck> {
    let d = z1.dim();
    if z2.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: z2.dim(), what: "matrix pair" });
    }
    if r == 0 || r >= d {
        return Err(Error::InvalidParameter(format!("rank must satisfy 1 <= r < d, got {r}")));
    }
    let (vals1, vecs1) = eigh_by_magnitude(z1);
    let (_, vecs2) = eigh_by_magnitude(z2);
    let gap = vals1[r - 1].abs() - vals1[r].abs();
    if gap <= RANK_TOLERANCE * vals1[0].abs().max(1e-300) {
        return Err(Error::ZeroEigenGap);
    }
    let u1r = vecs1.columns(0, r).into_owned();
    let u2perp = vecs2.columns(r, d - r).into_owned();
    let prod = u2perp.transpose() * &u1r;
    let angle = prod.svd(false, false).singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let diff = z1.sub(z2);
    let diff_dense = diff.to_dense();
    let numer = (&diff_dense * &u1r).svd(false, false).singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let bound = core::f64::consts::SQRT_2 * numer / gap;
    let applicable = diff.spectral_norm() <= (1.0 - core::f64::consts::FRAC_1_SQRT_2) * gap;
    let holds = !applicable || angle <= bound * (1.0 + 1e-10) + 1e-12;
    Ok(DavisKahanCheck { angle, bound, applicable, holds })
}

/// Spectral norm of `A*(A(X)) - X`: how far the sampled operator is from the
/// identity on the fixed matrix `X`.
pub fn deviation_norm(ens: &GoeEnsemble, x: &SymMatrix) -> Result<f64> {
    let mut dev = gram_operator(ens, x)?;
    dev.axpy(-1.0, x);
    Ok(dev.spectral_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::orthonormalize;
    use crate::measurement::{sample_ensemble, StorageMode};
    use crate::rng::{derive_seed, GaussianStream};

    fn random_factor(d: usize, r: usize, seed: u64) -> FactorMatrix {
        let mut g = GaussianStream::new(seed, 0);
        FactorMatrix::from_dmatrix(DMatrix::from_fn(d, r, |_, _| g.next_gaussian()))
    }

    fn random_orthogonal(r: usize, seed: u64) -> DMatrix<f64> {
        let mut g = GaussianStream::new(seed, 1);
        let raw = DMatrix::from_fn(r, r, |_, _| g.next_gaussian());
        orthonormalize(&raw)
    }

    #[test]
    fn procrustes_dist_is_zero_on_self_and_rotations() {
        let u = random_factor(9, 3, 5);
        assert!(procrustes_dist(&u, &u).unwrap() < 1e-12);
        let r0 = random_orthogonal(3, 6);
        let v = FactorMatrix::from_dmatrix(u.as_dmatrix() * r0);
        assert!(procrustes_dist(&u, &v).unwrap() < 1e-10);
    }

    #[test]
    fn rank_one_distance_matches_sign_enumeration() {
        // r = 1: the only orthogonal transforms are +/-1.
        for seed in 0..20 {
            let u = random_factor(7, 1, 100 + seed);
            let v = random_factor(7, 1, 200 + seed);
            let plus = (u.as_dmatrix() - v.as_dmatrix()).norm();
            let minus = (-u.as_dmatrix() - v.as_dmatrix()).norm();
            let oracle = plus.min(minus);
            let got = procrustes_dist(&u, &v).unwrap();
            assert!((got - oracle).abs() < 1e-12 * (1.0 + oracle));
        }
    }

    #[test]
    fn procrustes_is_symmetric_and_never_beaten_by_sampled_rotations() {
        let u = random_factor(8, 2, 31);
        let v = random_factor(8, 2, 32);
        let duv = procrustes_dist(&u, &v).unwrap();
        let dvu = procrustes_dist(&v, &u).unwrap();
        assert!((duv - dvu).abs() < 1e-10);
        // closed form is the true minimum: random rotations can't do better
        let mut best = f64::INFINITY;
        for k in 0..10_000 {
            let r = random_orthogonal(2, derive_seed(9, 2, k));
            // include reflections by randomizing the sign of one column
            let mut r = r;
            if k % 2 == 1 {
                for i in 0..2 {
                    r[(i, 1)] = -r[(i, 1)];
                }
            }
            let cand = (u.as_dmatrix() * r - v.as_dmatrix()).norm();
            best = best.min(cand);
        }
        assert!(duv <= best + 1e-8, "closed form {duv} vs sampled {best}");
    }

    #[test]
    fn procrustes_bound_trivial_and_random_pairs() {
        let u = random_factor(12, 3, 41);
        let same = procrustes_bound_check(&u, &u).unwrap();
        assert!(same.lhs < 1e-20 && same.holds);
        for seed in 0..1000 {
            let a = random_factor(12, 3, 50_000 + seed);
            let b = random_factor(12, 3, 60_000 + seed);
            let check = procrustes_bound_check(&a, &b).unwrap();
            assert!(check.holds, "seed {seed}: lhs {} rhs {}", check.lhs, check.rhs);
        }
    }

    #[test]
    fn procrustes_bound_near_tightness_probe_is_finite() {
        // informational: perturb orthogonally to the column span and record
        // the ratio; no claimed value, just sanity that it stays in (0, 1].
        let d = 10;
        let u = FactorMatrix::from_dmatrix(orthonormalize(&DMatrix::from_fn(d, 2, |i, j| {
            GaussianStream::new(77 + i as u64, j as u64).next_gaussian()
        })));
        let mut g = GaussianStream::new(78, 0);
        let mut pert = DMatrix::from_fn(d, 2, |_, _| g.next_gaussian());
        // project perturbation away from span(U)
        let proj = u.as_dmatrix() * (u.as_dmatrix().transpose() * &pert);
        pert -= proj;
        let v = FactorMatrix::from_dmatrix(u.as_dmatrix() + 1e-3 * pert);
        let check = procrustes_bound_check(&u, &v).unwrap();
        assert!(check.holds);
        let ratio = check.lhs / check.rhs;
        assert!(ratio > 0.0 && ratio <= 1.0, "ratio {ratio}");
    }

    #[test]
    fn procrustes_bound_rejects_rank_deficient_reference() {
        let mut u = random_factor(6, 2, 91);
        // make column 1 a copy of column 0
        let c0 = u.as_dmatrix().column(0).into_owned();
        u.as_dmatrix_mut().set_column(1, &c0);
        assert!(matches!(
            procrustes_bound_check(&u, &random_factor(6, 2, 92)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn subspace_angle_trivial_cases_and_hand_value() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let e23 = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(subspace_angle(&e1, &e1).unwrap() < 1e-14);
        assert!((subspace_angle(&e1, &e23).unwrap() - 1.0).abs() < 1e-12);
        // e1 vs (e1+e2)/sqrt(2): sin(theta) = 1/sqrt(2)
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mixed = DMatrix::from_column_slice(3, 1, &[s, s, 0.0]);
        let got = subspace_angle(&e1, &mixed).unwrap();
        assert!((got - s).abs() < 1e-12);
    }

    #[test]
    fn subspace_angle_rejects_non_orthonormal_input() {
        let bad = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let good = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(matches!(subspace_angle(&bad, &good), Err(Error::NotOrthonormal { .. })));
    }

    fn random_sym(d: usize, seed: u64, scale: f64) -> SymMatrix {
        let mut g = GaussianStream::new(seed, 0);
        let mut z = SymMatrix::zeros(d);
        for v in z.packed_mut() {
            *v = scale * g.next_gaussian();
        }
        z
    }

    #[test]
    fn davis_kahan_identical_matrices() {
        let z = random_sym(8, 3, 1.0);
        let check = davis_kahan_check(&z, &z, 2).unwrap();
        assert!(check.angle < 1e-10 && check.applicable && check.holds);
    }

    #[test]
    fn davis_kahan_holds_on_in_regime_perturbations() {
        let d = 10;
        let r = 2;
        let mut applicable_seen = 0;
        for seed in 0..500 {
            // well-separated leading spectrum so the gap is healthy
            let mut g = GaussianStream::new(1000 + seed, 0);
            let raw = DMatrix::from_fn(d, d, |_, _| g.next_gaussian());
            let q = orthonormalize(&raw);
            let mut vals = vec![0.0; d];
            vals[0] = 5.0;
            vals[1] = -4.0;
            for (k, v) in vals.iter_mut().enumerate().skip(2) {
                *v = 0.5 / (k as f64);
            }
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
            let z1_dense = &q * lam * q.transpose();
            let z1 = SymMatrix::from_dense(d, z1_dense.transpose().as_slice());
            // perturbation comfortably inside the admissible radius
            let gap: f64 = 4.0 - 0.25;
            let mut pert = random_sym(d, 2000 + seed, 1.0);
            let target = 0.8 * (1.0 - core::f64::consts::FRAC_1_SQRT_2) * gap;
            let norm = pert.spectral_norm();
            pert.scale(target / norm);
            let z2 = z1.add(&pert);
            let check = davis_kahan_check(&z1, &z2, r).unwrap();
            if check.applicable {
                applicable_seen += 1;
                assert!(check.holds, "seed {seed}: angle {} bound {}", check.angle, check.bound);
            }
        }
        assert!(applicable_seen >= 490, "only {applicable_seen} in-regime pairs");
    }

    #[test]
    fn davis_kahan_out_of_regime_makes_no_claim() {
        let z1 = random_sym(6, 7, 1.0);
        let mut big = random_sym(6, 8, 1.0);
        big.scale(100.0 / big.spectral_norm());
        let z2 = z1.add(&big);
        let check = davis_kahan_check(&z1, &z2, 2).unwrap();
        assert!(!check.applicable);
        assert!(check.holds);
    }

    #[test]
    fn davis_kahan_rejects_zero_gap() {
        let mut z = SymMatrix::zeros(4);
        // eigenvalues {1, 1, 0, 0}: gap at r=1 between |1| and |1| is zero
        z.set_entry(0, 0, 1.0);
        z.set_entry(1, 1, 1.0);
        assert!(matches!(davis_kahan_check(&z, &z, 1), Err(Error::ZeroEigenGap)));
    }

    #[test]
    fn deviation_norm_zero_matrix_and_definition() {
        let ens = sample_ensemble(30, 5, 9, StorageMode::Materialized).unwrap();
        assert_eq!(deviation_norm(&ens, &SymMatrix::zeros(5)).unwrap(), 0.0);
        // definition recomputation: (1/m) sum <A_i, X> A_i - X
        let x = random_sym(5, 10, 0.7);
        let m = ens.len();
        let mut direct = SymMatrix::zeros(5);
        for i in 0..m {
            let a = ens.matrix(i);
            direct.axpy(a.inner(&x) / m as f64, &a);
        }
        direct.axpy(-1.0, &x);
        let got = deviation_norm(&ens, &x).unwrap();
        assert!((got - direct.spectral_norm()).abs() < 1e-12 * (1.0 + got));
    }

    #[test]
    fn deviation_norm_shrinks_like_inverse_sqrt_m() {
        // fixed unit rank-2 X at d = 32: quadrupling m roughly halves the mean
        let d = 32;
        let mut x = SymMatrix::zeros(d);
        x.set_entry(0, 0, 1.0);
        x.set_entry(1, 1, -1.0);
        x.scale(1.0 / x.frobenius_norm());
        let trials = 200;
        let mean_dev = |m: usize, tag: u64| -> f64 {
            let mut acc = 0.0;
            for t in 0..trials {
                let ens = sample_ensemble(m, d, derive_seed(3, tag, t), StorageMode::Materialized)
                    .unwrap();
                acc += deviation_norm(&ens, &x).unwrap();
            }
            acc / trials as f64
        };
        let small = mean_dev(128, 0);
        let large = mean_dev(512, 1);
        let ratio = small / large;
        assert!((1.6..=2.6).contains(&ratio), "scaling ratio {ratio}");
    }

    #[test]
    fn condition_number_of_planted_spectrum() {
        // plant eigenvalues {4, 2, 1} and read back kappa = 4
        let d = 9;
        let mut g = GaussianStream::new(55, 0);
        let raw = DMatrix::from_fn(d, 3, |_, _| g.next_gaussian());
        let q = orthonormalize(&raw);
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 2.0, 1.0]));
        let dense = &q * lam * q.transpose();
        let x = SymMatrix::from_dense(d, dense.transpose().as_slice());
        let summary = spectral_summary(&x);
        assert_eq!(summary.rank_numerical, 3);
        assert!((summary.condition_number - 4.0).abs() < 1e-10);
        assert!((summary.singular_values[0] - 4.0).abs() < 1e-10);
    }
}
