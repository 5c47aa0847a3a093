//! Scalar building blocks of the closed-form expressions and an explicit formula
//! for `E{w_{k,k}}` written directly in terms of them.

use crate::channel::{ChannelStatistics, PhaseConfig};
use crate::estimation::{LmmseOperator, PilotAssignment};
use crate::linalg::dotc;
use crate::scalar::{czero, Cx, Real};

#[derive(Clone, Debug)]
pub struct HelperScalars<T> {
    num_aps: usize,
    num_users: usize,
    num_ris: usize,
    /// `a_{r,j}ᴴ A_{j,k} a_{r,j}`, index `(r·J + j)·K + k`.
    g: Vec<Cx<T>>,
    /// `a_{r,j}ᴴ A_{j,k}ᴴ A_{j,k} a_{r,j}`.
    h: Vec<T>,
    /// `b_{r,j}ᴴ Φ_r ḡ_{r,k}`.
    f: Vec<Cx<T>>,
    /// `Tr A_{j,k}`, index `j·K + k`.
    trace_a: Vec<Cx<T>>,
    /// `Tr A_{j,k}ᴴ A_{j,k}`.
    w: Vec<T>,
    /// `ḡ_{r,k}ᴴ ḡ_{r,i}`, index `(r·K + k)·K + i`.
    c: Vec<Cx<T>>,
    /// `a_{r,j}ᴴ a_{r',j}`, index `(j·R + r)·R + r'`.
    b: Vec<Cx<T>>,
}

pub fn helper_scalars<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
) -> HelperScalars<T> {
    let d = stats.dims;
    let (rn, jn, kn) = (d.num_ris, d.num_aps, d.num_users);
    let mut g = Vec::with_capacity(rn * jn * kn);
    let mut h = Vec::with_capacity(rn * jn * kn);
    let mut f = Vec::with_capacity(rn * jn * kn);
    for r in 0..rn {
        for j in 0..jn {
            let a = &stats.ap_steering[r][j];
            for k in 0..kn {
                let aa = operator.a(j, k).mul_vec(a);
                g.push(dotc(a, &aa));
                h.push(crate::linalg::norm_sq(&aa));
                f.push(stats.los_projection(phase, r, j, k));
            }
        }
    }
    let mut trace_a = Vec::with_capacity(jn * kn);
    let mut w = Vec::with_capacity(jn * kn);
    for j in 0..jn {
        for k in 0..kn {
            trace_a.push(operator.a(j, k).trace());
            w.push(operator.a(j, k).frob_norm_sq());
        }
    }
    let mut c = Vec::with_capacity(rn * kn * kn);
    for r in 0..rn {
        for k in 0..kn {
            for i in 0..kn {
                c.push(dotc(&stats.ris_arrival[r][k], &stats.ris_arrival[r][i]));
            }
        }
    }
    let mut b = Vec::with_capacity(jn * rn * rn);
    for j in 0..jn {
        for r in 0..rn {
            for r2 in 0..rn {
                b.push(dotc(&stats.ap_steering[r][j], &stats.ap_steering[r2][j]));
            }
        }
    }
    HelperScalars {
        num_aps: jn,
        num_users: kn,
        num_ris: rn,
        g,
        h,
        f,
        trace_a,
        w,
        c,
        b,
    }
}

impl<T: Real> HelperScalars<T> {
    fn rjk(&self, r: usize, j: usize, k: usize) -> usize {
        (r * self.num_aps + j) * self.num_users + k
    }
    pub fn g(&self, r: usize, j: usize, k: usize) -> Cx<T> {
        self.g[self.rjk(r, j, k)]
    }
    pub fn h(&self, r: usize, j: usize, k: usize) -> T {
        self.h[self.rjk(r, j, k)]
    }
    pub fn f(&self, r: usize, j: usize, k: usize) -> Cx<T> {
        self.f[self.rjk(r, j, k)]
    }
    pub fn trace_a(&self, j: usize, k: usize) -> Cx<T> {
        self.trace_a[j * self.num_users + k]
    }
    pub fn w(&self, j: usize, k: usize) -> T {
        self.w[j * self.num_users + k]
    }
    /// `Tr A_{j,k} · Tr A_{h,k}`.
    pub fn v(&self, j: usize, h: usize, k: usize) -> Cx<T> {
        self.trace_a(j, k) * self.trace_a(h, k)
    }
    pub fn c(&self, r: usize, k: usize, i: usize) -> Cx<T> {
        self.c[(r * self.num_users + k) * self.num_users + i]
    }
    pub fn b(&self, j: usize, r: usize, r2: usize) -> Cx<T> {
        self.b[(j * self.num_ris + r) * self.num_ris + r2]
    }

    /// `m_{j,k}ᴴ m_{j,l}` for the cascaded LoS means.
    pub fn m(&self, stats: &ChannelStatistics<T>, j: usize, k: usize, l: usize) -> Cx<T> {
        let mut s = czero();
        for r in 0..self.num_ris {
            for r2 in 0..self.num_ris {
                let w = stats.eta(1, r, j, k) * stats.eta(1, r2, j, l);
                s += (self.f(r, j, k).conj() * self.b(j, r, r2) * self.f(r2, j, l)).scale(w);
            }
        }
        s
    }
}

/// `E{q̂_{j,k}ᴴ q_{j,k}}` per AP from the helper scalars:
/// `m_{j,k}ᴴm_{j,k} + Σ_r M η₂² g*_{r,j} + Tr Aᴴ (Σ_r M(η₃² + η₄²) + η₅² + Σ_{l∈P_k∖k} Σ_r η₃_k η₃_l c_{r,l,k})`.
pub fn expected_wkk_from_helpers<T: Real>(
    stats: &ChannelStatistics<T>,
    helpers: &HelperScalars<T>,
    assignment: &PilotAssignment,
    k: usize,
) -> Vec<Cx<T>> {
    let d = stats.dims;
    let m = T::from_usize(d.elements).unwrap();
    (0..d.num_aps)
        .map(|j| {
            let mut e = helpers.m(stats, j, k, k);
            let mut noise_like = stats.eta5(j, k).powi(2);
            for r in 0..d.num_ris {
                e += helpers.g(r, j, k).conj().scale(m * stats.eta(2, r, j, k).powi(2));
                noise_like += m * (stats.eta(3, r, j, k).powi(2) + stats.eta(4, r, j, k).powi(2));
            }
            let mut contamination: Cx<T> = czero();
            for l in assignment.others(k) {
                for r in 0..d.num_ris {
                    contamination += helpers.c(r, l, k).scale(stats.eta(3, r, j, k) * stats.eta(3, r, j, l));
                }
            }
            e + helpers.trace_a(j, k).conj() * (contamination + Cx::new(noise_like, T::zero()))
        })
        .collect()
}
