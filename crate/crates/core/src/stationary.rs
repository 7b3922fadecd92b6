//! Stationary-phase expansion ∫ q e^{iωf} ≈ e^{iωf(x_s)} det(ωA/2πi)^{-1/2} (q + ω⁻¹ L₁q) for phases
//! with A = ∇∇f(x_s) = 2iS, S real SPD.

use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::jet::TaylorJet3;
use crate::linalg::{im_part, min_sym_eig, re_part, CM3, C64, I, M3};

type T3 = [[[C64; 3]; 3]; 3];

#[derive(Clone, Debug)]
pub struct PhaseData {
    pub a: CM3,
    pub f_jet: TaylorJet3,
    pub f_value: C64,
    a_inv: CM3,
    s: M3,
}

fn admissible_s(a: &CM3) -> Result<M3> {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if re_part(a).amax() > 1e-12 * scale {
        return Err(SimError::input("phase Hessian must be purely imaginary"));
    }
    let s = im_part(a) * 0.5;
    if (s - s.transpose()).amax() > 1e-12 * scale || !(min_sym_eig(&s) > 0.0) {
        return Err(SimError::input("Im of the phase Hessian must be symmetric positive definite"));
    }
    Ok(s)
}

impl PhaseData {
    /// Takes A from the jet's Hessian; the jet must have order ≥ 4 and a stationary point at its center.
    pub fn from_jet(f_jet: TaylorJet3) -> Result<Self> {
        if f_jet.order < 4 {
            return Err(SimError::input(format!("phase jet has order {}, order 4 is required", f_jet.order)));
        }
        let a = f_jet.hess();
        let s = admissible_s(&a)?;
        let g = f_jet.grad();
        if g.iter().any(|z| z.norm() > 1e-10 * a.iter().map(|z| z.norm()).fold(1.0, f64::max)) {
            return Err(SimError::input("phase jet center is not a stationary point"));
        }
        let a_inv = a.try_inverse().ok_or_else(|| SimError::Degenerate("phase Hessian singular".into()))?;
        Ok(PhaseData { a, f_value: f_jet.value(), f_jet, a_inv, s })
    }

    pub fn a_inv(&self) -> &CM3 {
        &self.a_inv
    }

    /// S = Im A / 2.
    pub fn s(&self) -> &M3 {
        &self.s
    }
}

/// 1/√det(ωA/2πi) = (π/ω)^{3/2}/√det S.
pub fn gauss_prefactor(a: &CM3, omega: f64) -> Result<C64> {
    if !(omega > 0.0) {
        return Err(SimError::input("omega must be positive"));
    }
    let s = admissible_s(a)?;
    Ok(C64::new((PI / omega).powf(1.5) / s.determinant().sqrt(), 0.0))
}

/// Σ over the 20 ways of splitting six slots into two triples of ∇³g⊗∇³g, contracted with B⊗B⊗B on
/// the slot pairs (0,1)(2,3)(4,5).
pub fn sixth_derivative_contraction(g3: &T3, b: &CM3) -> C64 {
    let mut splits = Vec::with_capacity(20);
    for mask in 0u32..64 {
        if mask.count_ones() == 3 {
            splits.push(mask);
        }
    }
    let mut total = C64::new(0.0, 0.0);
    let mut idx = [0usize; 6];
    for flat in 0..729usize {
        let mut r = flat;
        for slot in idx.iter_mut() {
            *slot = r % 3;
            r /= 3;
        }
        let w = b[(idx[0], idx[1])] * b[(idx[2], idx[3])] * b[(idx[4], idx[5])];
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        let mut d6 = C64::new(0.0, 0.0);
        for &m in &splits {
            let (mut p, mut q) = ([0usize; 3], [0usize; 3]);
            let (mut np, mut nq) = (0, 0);
            for (s, &ix) in idx.iter().enumerate() {
                if m & (1 << s) != 0 {
                    p[np] = ix;
                    np += 1;
                } else {
                    q[nq] = ix;
                    nq += 1;
                }
            }
            d6 += g3[p[0]][p[1]][p[2]] * g3[q[0]][q[1]][q[2]];
        }
        total += w * d6;
    }
    total
}

/// First stationary-phase correction operator applied to `q` at the stationary point.
pub fn l1_apply(q: &TaylorJet3, phase: &PhaseData) -> Result<C64> {
    if q.order < 2 {
        return Err(SimError::input(format!("amplitude jet has order {}, order 2 is required", q.order)));
    }
    let b = phase.a_inv;
    let q0 = q.value();
    let dq = q.grad();
    let ddq = q.hess();
    let g3 = phase.f_jet.third();
    let g4 = phase.f_jet.fourth();

    let mut t1 = C64::new(0.0, 0.0);
    let mut t2 = C64::new(0.0, 0.0);
    let mut t3 = C64::new(0.0, 0.0);
    for a in 0..3 {
        for bb in 0..3 {
            t1 += b[(a, bb)] * ddq[(a, bb)];
            for c in 0..3 {
                for d in 0..3 {
                    let w = b[(a, bb)] * b[(c, d)];
                    t2 += w * dq[a] * g3[bb][c][d];
                    t3 += w * g4[a][bb][c][d];
                }
            }
        }
    }
    let t4 = sixth_derivative_contraction(&g3, &b);
    Ok(I * 0.5 * t1 - I * 0.5 * t2 - I * (q0 / 8.0) * t3 + I * (q0 / 96.0) * t4)
}

/// e^{iωf(x_s)} det(ωA/2πi)^{-1/2} Σ_{j ≤ max_order} ω^{-j} L_j q.
pub fn expand_integral(q: &TaylorJet3, phase: &PhaseData, omega: f64, max_order: usize) -> Result<C64> {
    let pref = gauss_prefactor(&phase.a, omega)?;
    let mut series = q.value();
    match max_order {
        0 => {}
        1 => series += l1_apply(q, phase)? / omega,
        _ => return Err(SimError::input("only expansion orders 0 and 1 are available")),
    }
    Ok((I * omega * phase.f_value).exp() * pref * series)
}
