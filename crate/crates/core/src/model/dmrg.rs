//! Two-site DMRG ground-state search.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::Chain;
use crate::error::{invalid, numerical, Result};
use crate::mpo::Mpo;
use crate::mps::Mps;
use crate::tensor::{contract, lq, qr, svd_truncate, DenseTensor, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgSettings {
    pub d_max: usize,
    pub max_sweeps: usize,
    /// Stop once a full sweep changes the energy by less than this.
    pub energy_tol: f64,
    pub seed: u64,
    pub lanczos_tol: f64,
    pub lanczos_max_matvecs: usize,
    pub svd_cutoff: f64,
    /// Single-site sweeps run after the two-site phase. They keep the bond
    /// dimensions fixed and relax the state within them.
    pub polish_sweeps: usize,
}

impl DmrgSettings {
    pub fn new(d_max: usize, max_sweeps: usize, energy_tol: f64) -> Self {
        Self {
            d_max,
            max_sweeps,
            energy_tol,
            seed: 0x5eed,
            lanczos_tol: 1e-10,
            lanczos_max_matvecs: 200,
            svd_cutoff: 1e-14,
            polish_sweeps: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub state: Mps,
    pub energy: f64,
    /// Lowest Ritz value at the end of each full sweep, two-site sweeps
    /// first.
    pub sweep_energies: Vec<f64>,
    pub converged: bool,
}

/// Ground state of a Hermitian MPO with default solver settings.
pub fn dmrg_ground_state(h: &Mpo, d_max: usize, sweeps: usize, tol: f64) -> Result<(Mps, f64)> {
    let r = dmrg(h, &DmrgSettings::new(d_max, sweeps, tol))?;
    Ok((r.state, r.energy))
}

pub fn dmrg(h: &Mpo, settings: &DmrgSettings) -> Result<DmrgResult> {
    let n = h.len();
    if n < 2 {
        return Err(invalid!("DMRG needs at least two sites"));
    }
    if settings.d_max < 2 {
        return Err(invalid!("bond cap must be at least 2, got {}", settings.d_max));
    }
    if settings.max_sweeps == 0 {
        return Err(invalid!("at least one sweep is required"));
    }
    let w = h.sites();
    let mut psi: Vec<DenseTensor> = Mps::random(n, settings.d_max, settings.seed)?.sites().to_vec();

    let trivial = DenseTensor::from_fn(&[1, 1, 1], |_| ONE);
    let mut left: Vec<DenseTensor> = vec![trivial.clone(); n];
    let mut right: Vec<DenseTensor> = vec![trivial; n];
    for i in (0..n - 1).rev() {
        right[i] = extend_right(&right[i + 1], &psi[i + 1], &w[i + 1])?;
    }

    let mut sweep_energies = Vec::new();
    let mut energy = f64::INFINITY;
    let mut converged = false;
    for sweep in 0..settings.max_sweeps {
        let ctx = |i: usize| move |e: crate::Error| e.context(format_args!("sweep {sweep}, sites ({i}, {})", i + 1));
        for i in 0..n - 1 {
            energy = optimize_pair(&mut psi, &left, &right, w, i, true, settings).map_err(ctx(i))?;
            left[i + 1] = extend_left(&left[i], &psi[i], &w[i])?;
        }
        for i in (0..n - 1).rev() {
            energy = optimize_pair(&mut psi, &left, &right, w, i, false, settings).map_err(ctx(i))?;
            right[i] = extend_right(&right[i + 1], &psi[i + 1], &w[i + 1])?;
        }
        let prev = sweep_energies.last().copied();
        sweep_energies.push(energy);
        if let Some(p) = prev {
            if (p - energy).abs() < settings.energy_tol {
                converged = true;
                break;
            }
        }
    }

    for sweep in 0..settings.polish_sweeps {
        let ctx = |i: usize| move |e: crate::Error| e.context(format_args!("single-site sweep {sweep}, site {i}"));
        for i in 0..n - 1 {
            optimize_site(&mut psi, &left, &right, w, i, settings).map_err(ctx(i))?;
            shift_right(&mut psi, i)?;
            left[i + 1] = extend_left(&left[i], &psi[i], &w[i])?;
        }
        for i in (1..n).rev() {
            energy = optimize_site(&mut psi, &left, &right, w, i, settings).map_err(ctx(i))?;
            shift_left(&mut psi, i)?;
            right[i - 1] = extend_right(&right[i], &psi[i], &w[i])?;
        }
        sweep_energies.push(energy);
    }

    let mut state = Mps::from_chain(Chain::new(psi, Some(0))?);
    let norm = state.norm();
    state.scale(C64::new(1.0 / norm, 0.0));
    let energy = state.expectation(h)?;
    Ok(DmrgResult {
        state,
        energy,
        sweep_energies,
        converged,
    })
}

/// `<ψ|H²|ψ> - <ψ|H|ψ>²` for a normalized state.
pub fn energy_variance(h: &Mpo, psi: &Mps) -> Result<f64> {
    let h_psi = h.apply(psi)?;
    let e = psi.overlap(&h_psi)?.re;
    let e2 = h_psi.overlap(&h_psi)?.re;
    Ok(e2 - e * e)
}

fn optimize_pair(
    psi: &mut [DenseTensor],
    left: &[DenseTensor],
    right: &[DenseTensor],
    w: &[DenseTensor],
    i: usize,
    moving_right: bool,
    settings: &DmrgSettings,
) -> Result<f64> {
    let theta = contract(&psi[i], &psi[i + 1], &[2], &[0])?;
    let shape = theta.shape().to_vec();
    let (env_l, env_r, w1, w2) = (&left[i], &right[i + 1], &w[i], &w[i + 1]);
    let apply = |v: &[C64]| -> Result<Vec<C64>> {
        let t = DenseTensor::new(shape.clone(), v.to_vec())?;
        Ok(apply_effective(env_l, w1, w2, env_r, &t)?.into_data())
    };
    let (energy, ground) = lanczos_lowest(apply, theta.into_data(), settings.lanczos_tol, settings.lanczos_max_matvecs)?;

    let (a, s0, s1, b) = (shape[0], shape[1], shape[2], shape[3]);
    let m = DenseTensor::new(vec![a * s0, s1 * b], ground)?;
    let split = svd_truncate(&m, settings.d_max, settings.svd_cutoff)?;
    let k = split.s.len();
    let total: f64 = split.s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s: Vec<f64> = split.s.iter().map(|x| x / total).collect();
    let mut u = split.u;
    let mut v = split.v;
    if moving_right {
        for (row, chunk) in v.data_mut().chunks_mut(s1 * b).enumerate() {
            chunk.iter_mut().for_each(|z| *z *= s[row]);
        }
    } else {
        for chunk in u.data_mut().chunks_mut(k) {
            chunk.iter_mut().zip(&s).for_each(|(z, sv)| *z *= sv);
        }
    }
    psi[i] = u.reshape(&[a, s0, k])?;
    psi[i + 1] = v.reshape(&[k, s1, b])?;
    Ok(energy)
}

fn optimize_site(
    psi: &mut [DenseTensor],
    left: &[DenseTensor],
    right: &[DenseTensor],
    w: &[DenseTensor],
    i: usize,
    settings: &DmrgSettings,
) -> Result<f64> {
    let shape = psi[i].shape().to_vec();
    let (env_l, env_r, wi) = (&left[i], &right[i], &w[i]);
    let apply = |v: &[C64]| -> Result<Vec<C64>> {
        let t = DenseTensor::new(shape.clone(), v.to_vec())?;
        let t = contract(env_l, &t, &[2], &[0])?; // (a', w, s, b)
        let t = contract(&t, wi, &[1, 2], &[0, 1])?; // (a', b, s', w')
        let t = contract(&t, env_r, &[1, 3], &[2, 1])?; // (a', s', b')
        Ok(t.into_data())
    };
    let start = psi[i].data().to_vec();
    let (energy, ground) = lanczos_lowest(apply, start, settings.lanczos_tol, settings.lanczos_max_matvecs)?;
    psi[i] = DenseTensor::new(shape, ground)?;
    Ok(energy)
}

/// Left-orthonormalizes site `i`, pushing the remainder into `i + 1`.
fn shift_right(psi: &mut [DenseTensor], i: usize) -> Result<()> {
    let (l, s, r) = (psi[i].shape()[0], psi[i].shape()[1], psi[i].shape()[2]);
    let (q, rm) = qr(&psi[i].clone().reshape(&[l * s, r])?)?;
    let k = q.shape()[1];
    psi[i] = q.reshape(&[l, s, k])?;
    psi[i + 1] = contract(&rm, &psi[i + 1], &[1], &[0])?;
    Ok(())
}

/// Right-orthonormalizes site `i`, pushing the remainder into `i - 1`.
fn shift_left(psi: &mut [DenseTensor], i: usize) -> Result<()> {
    let (l, s, r) = (psi[i].shape()[0], psi[i].shape()[1], psi[i].shape()[2]);
    let (lm, q) = lq(&psi[i].clone().reshape(&[l, s * r])?)?;
    let k = q.shape()[0];
    psi[i] = q.reshape(&[k, s, r])?;
    psi[i - 1] = contract(&psi[i - 1], &lm, &[2], &[0])?;
    Ok(())
}

/// `H_eff θ` for a two-site block `θ(a, s1, s2, b)`.
fn apply_effective(
    env_l: &DenseTensor,
    w1: &DenseTensor,
    w2: &DenseTensor,
    env_r: &DenseTensor,
    theta: &DenseTensor,
) -> Result<DenseTensor> {
    // env_l (a', w, a), w (w, in, out, w'), env_r (b', w, b)
    let t = contract(env_l, theta, &[2], &[0])?; // (a', w, s1, s2, b)
    let t = contract(&t, w1, &[1, 2], &[0, 1])?; // (a', s2, b, s1', w1)
    let t = contract(&t, w2, &[4, 1], &[0, 1])?; // (a', b, s1', s2', w2)
    let t = contract(&t, env_r, &[1, 4], &[2, 1])?; // (a', s1', s2', b')
    Ok(t)
}

fn extend_left(env: &DenseTensor, a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let t = contract(env, a, &[2], &[0])?; // (a', w, s, b)
    let t = contract(&t, w, &[1, 2], &[0, 1])?; // (a', b, s', w')
    let t = contract(&t, &a.conj(), &[0, 2], &[0, 1])?; // (b, w', b')
    t.permute(&[2, 1, 0])
}

fn extend_right(env: &DenseTensor, a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let t = contract(a, env, &[2], &[2])?; // (a, s, b', w')
    let t = contract(&t, w, &[1, 3], &[1, 3])?; // (a, b', w, s')
    let t = contract(&t, &a.conj(), &[1, 3], &[2, 1])?; // (a, w, a')
    t.permute(&[2, 1, 0])
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted Lanczos with full reorthogonalization for the lowest
/// eigenpair of a Hermitian operator.
///
/// Converged when `||H v - θ v|| < tol`. If the matvec budget runs out the
/// best Ritz pair is returned as long as its residual is below `1e-6`;
/// beyond that the solve is reported as a numerical failure.
pub(crate) fn lanczos_lowest<F>(apply: F, start: Vec<C64>, tol: f64, max_matvecs: usize) -> Result<(f64, Vec<C64>)>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let dim = start.len();
    let krylov = dim.min(40);
    let mut v = start;
    let mut nv = norm(&v);
    if !(nv > 1e-300) || !nv.is_finite() {
        v = (0..dim).map(|k| C64::new(1.0 + (k % 7) as f64 * 0.1, 0.0)).collect();
        nv = norm(&v);
    }
    v.iter_mut().for_each(|z| *z /= nv);
    let mut used = 0;
    loop {
        let mut basis: Vec<Vec<C64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut theta = 0.0;
        let mut coeffs = vec![1.0];
        let mut residual = f64::INFINITY;
        let mut invariant = false;
        for k in 0..krylov {
            let mut wv = apply(&basis[k])?;
            used += 1;
            let alpha = dot(&basis[k], &wv).re;
            alphas.push(alpha);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &wv);
                    wv.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = norm(&wv);
            let (t, y) = lowest_tridiagonal(&alphas, &betas);
            theta = t;
            residual = beta * y[k].abs();
            coeffs = y;
            if beta < 1e-13 {
                invariant = true;
            }
            if residual < tol || invariant || used >= max_matvecs {
                break;
            }
            wv.iter_mut().for_each(|z| *z /= beta);
            basis.push(wv);
            betas.push(beta);
        }
        let mut ritz = vec![ZERO; dim];
        for (b, c) in basis.iter().zip(&coeffs) {
            ritz.iter_mut().zip(b).for_each(|(r, x)| *r += x * c);
        }
        let nr = norm(&ritz);
        ritz.iter_mut().for_each(|z| *z /= nr);
        if !theta.is_finite() {
            return Err(numerical!("Lanczos produced a non-finite Ritz value"));
        }
        if residual < tol || invariant {
            return Ok((theta, ritz));
        }
        if used >= max_matvecs {
            if residual < 1e-6 * theta.abs().max(1.0) {
                return Ok((theta, ritz));
            }
            return Err(numerical!("Lanczos did not converge: residual {residual:.3e} after {used} products"));
        }
        v = ritz;
    }
}

/// Lowest eigenpair of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal.
fn lowest_tridiagonal(diag: &[f64], off: &[f64]) -> (f64, Vec<f64>) {
    let k = diag.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
    (val, eig.eigenvectors.column(idx).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian::heisenberg_mpo;

    /// Lowest eigenvalue of a dense Hermitian matrix.
    fn dense_ground_energy(h: &DenseTensor) -> f64 {
        let m = h.to_nalgebra();
        let n = m.nrows();
        // real symmetric embedding [[Re, -Im], [Im, Re]] has doubled spectrum
        let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = m[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        SymmetricEigen::new(big).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn lanczos_on_diagonal() {
        let d: Vec<f64> = (0..60).map(|k| (k as f64 - 10.0).powi(2) * 0.1 + 1.0).collect();
        let apply = |v: &[C64]| Ok(v.iter().zip(&d).map(|(z, x)| z * x).collect());
        let start = vec![ONE; 60];
        let (e, vec) = lanczos_lowest(apply, start, 1e-10, 500).unwrap();
        assert!((e - 1.0).abs() < 1e-10);
        assert!((vec[10].norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn heisenberg_small_chains_match_exact() {
        for n in [2, 4, 6, 8] {
            let h = heisenberg_mpo(n).unwrap();
            let exact = dense_ground_energy(&h.to_dense());
            let r = dmrg(&h, &DmrgSettings::new(16, 20, 1e-12)).unwrap();
            assert!((r.energy - exact).abs() < 1e-9, "n={n}: {} vs {exact}", r.energy);
            assert!((r.state.norm() - 1.0).abs() < 1e-12);
            assert!(energy_variance(&h, &r.state).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn sweep_energies_do_not_increase() {
        let h = heisenberg_mpo(10).unwrap();
        let r = dmrg(&h, &DmrgSettings::new(8, 6, 0.0)).unwrap();
        for w in r.sweep_energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = heisenberg_mpo(4).unwrap();
        assert!(dmrg_ground_state(&h, 1, 5, 1e-10).is_err());
        assert!(dmrg_ground_state(&h, 4, 0, 1e-10).is_err());
    }
}
