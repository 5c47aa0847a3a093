//! Closed-form moments of the local MRC statistics `w_{k,i}[j] = q̂_{j,k}ᴴ q_{j,i}`
//! and the resulting two-timescale SINR / SE.
//!
//! Conditioned on the user–RIS scattering draws `g̃`, every aggregated channel is
//! Gaussian with white covariance at each AP and independent across APs. The
//! conditional mean and variance of `w` are then affine-sesquilinear forms in the
//! stacked `g̃`, whose expectations are computed exactly by [`quadform`].

pub mod helpers;
pub mod quadform;
pub mod se;
pub mod terms;

use crate::channel::{cascaded_los, ChannelStatistics, ComponentMask, PhaseConfig};
use crate::estimation::{LmmseOperator, PilotAssignment};
use crate::linalg::CMatrix;
use crate::scalar::{czero, Cx, Real};
use quadform::{AffineVec, Form};

/// Closed-form moments for one user `k`.
#[derive(Clone, Debug)]
pub struct MomentSet<T> {
    pub user: usize,
    /// `E{w_{k,k}}` (J entries).
    pub mean_wkk: Vec<Cx<T>>,
    /// `E{w_{k,i} w_{k,i}ᴴ}` for every `i` (J×J each).
    pub second: Vec<CMatrix<T>>,
    /// Diagonal of `V_k`, `Re E{w_{k,k}}[j]`.
    pub v: Vec<T>,
    /// `E{‖q̂_{j,k}‖²}`, equal to `v` by LMMSE orthogonality.
    pub estimate_power: Vec<T>,
}

/// First and second moments of `w_{k,i}` for one `(k, i)` pair.
#[derive(Clone, Debug)]
pub struct PairMoments<T> {
    pub mean: Vec<Cx<T>>,
    pub second: CMatrix<T>,
    pub estimate_power: Vec<T>,
}

/// RIS-stacked vector `X_l = [η₃ ḡ_{r,l} + η₄ g̃_{r,l}]_r`, kept sparse: the linear
/// part maps block `(r, pos)` of `g` onto rows `r·M ..` with weight `η₄`.
struct StackedX<T> {
    c: Vec<Cx<T>>,
    terms: Vec<(usize, Vec<T>)>,
}

struct Layout {
    num_ris: usize,
    elements: usize,
    users: Vec<usize>,
}

impl Layout {
    fn dim(&self) -> usize {
        self.num_ris * self.elements * self.users.len()
    }
    fn pos(&self, l: usize) -> usize {
        self.users.iter().position(|&u| u == l).expect("user in layout")
    }
    fn offset(&self, r: usize, pos: usize) -> usize {
        (r * self.users.len() + pos) * self.elements
    }
}

impl<T: Real> StackedX<T> {
    fn add(&mut self, other: &Self) {
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
        self.terms.extend(other.terms.iter().cloned());
    }

    fn inner(&self, q: &Self, lay: &Layout) -> Form<T> {
        let d = lay.dim();
        let m = lay.elements;
        let mut f = Form::constant(crate::linalg::dotc(&self.c, &q.c), d);
        for (pos, eta) in &q.terms {
            for (r, &e) in eta.iter().enumerate() {
                let off = lay.offset(r, *pos);
                for x in 0..m {
                    f.u[off + x] += self.c[r * m + x].scale(e);
                }
            }
        }
        for (pos, eta) in &self.terms {
            for (r, &e) in eta.iter().enumerate() {
                let off = lay.offset(r, *pos);
                for x in 0..m {
                    f.v[off + x] += q.c[r * m + x].scale(e);
                }
            }
        }
        for (pp, ep) in &self.terms {
            for (pq, eq) in &q.terms {
                for r in 0..lay.num_ris {
                    let w = Cx::new(ep[r] * eq[r], T::zero());
                    let (o1, o2) = (lay.offset(r, *pp), lay.offset(r, *pq));
                    for x in 0..m {
                        f.q[(o1 + x, o2 + x)] += w;
                    }
                }
            }
        }
        f
    }
}

/// Moment engine bound to one set of statistics, estimator and phases. The
/// optional mask zeroes channel components on the sampling side while the
/// estimator `A` stays fixed, which isolates individual contributions.
pub struct MomentEngine<'a, T: Real> {
    stats: &'a ChannelStatistics<T>,
    operator: &'a LmmseOperator<T>,
    phase: &'a PhaseConfig<T>,
    assignment: &'a PilotAssignment,
    mask: Option<&'a ComponentMask>,
    means: Vec<Vec<Vec<Cx<T>>>>,
}

impl<'a, T: Real> MomentEngine<'a, T> {
    pub fn new(
        stats: &'a ChannelStatistics<T>,
        operator: &'a LmmseOperator<T>,
        phase: &'a PhaseConfig<T>,
        assignment: &'a PilotAssignment,
        mask: Option<&'a ComponentMask>,
    ) -> Self {
        let means = cascaded_los(stats, phase, mask);
        Self {
            stats,
            operator,
            phase,
            assignment,
            mask,
            means,
        }
    }

    /// Cascaded LoS means `[j][k]` under the mask.
    pub fn means(&self) -> &[Vec<Vec<Cx<T>>>] {
        &self.means
    }

    fn reflect_row(&self, r: usize, j: usize) -> Vec<Cx<T>> {
        let b = &self.stats.ris_departure[r][j];
        (0..self.stats.dims.elements)
            .map(|x| b[x].conj() * self.phase.entry(r, x))
            .collect()
    }

    /// `m_{j,l} + Σ_{l∈users} Σ_r η₂ (M a_{r,j})(bᴴΦ_r) g̃_{r,l}` with `M = left` applied to `a`.
    fn los_affine(
        &self,
        lay: &Layout,
        j: usize,
        users: &[usize],
        left: Option<&CMatrix<T>>,
        mean: Vec<Cx<T>>,
    ) -> AffineVec<T> {
        let n = self.stats.dims.antennas;
        let mut out = AffineVec {
            c: mean,
            l: CMatrix::zeros(n, lay.dim()),
        };
        for r in 0..self.stats.dims.num_ris {
            let a = &self.stats.ap_steering[r][j];
            let a = match left {
                Some(m) => m.mul_vec(a),
                None => a.clone(),
            };
            let row = self.reflect_row(r, j);
            for &l in users {
                let e2 = self.stats.masked_eta(self.mask, r, j, l)[1];
                if e2 == T::zero() {
                    continue;
                }
                let off = lay.offset(r, lay.pos(l));
                for (ni, an) in a.iter().enumerate() {
                    let s = an.scale(e2);
                    for (x, bx) in row.iter().enumerate() {
                        out.l[(ni, off + x)] += s * bx;
                    }
                }
            }
        }
        out
    }

    fn stacked_x(&self, lay: &Layout, j: usize, l: usize) -> StackedX<T> {
        let (rn, m) = (self.stats.dims.num_ris, self.stats.dims.elements);
        let mut c = Vec::with_capacity(rn * m);
        let mut eta4 = Vec::with_capacity(rn);
        for r in 0..rn {
            let [_, _, e3, e4] = self.stats.masked_eta(self.mask, r, j, l);
            c.extend(self.stats.ris_arrival[r][l].iter().map(|g| g.scale(e3)));
            eta4.push(e4);
        }
        StackedX {
            c,
            terms: vec![(lay.pos(l), eta4)],
        }
    }

    /// First and second moments of `w_{k,i}`.
    pub fn pair(&self, k: usize, i: usize) -> PairMoments<T> {
        let d = self.stats.dims;
        let p = &self.assignment.copilots[k];
        let mut users = p.clone();
        if !users.contains(&i) {
            users.push(i);
        }
        users.sort_unstable();
        let lay = Layout {
            num_ris: d.num_ris,
            elements: d.elements,
            users,
        };
        let dim = lay.dim();
        let noise = if self.mask.is_none_or(|m| m.pilot_noise) {
            self.operator.pilot_noise()
        } else {
            T::zero()
        };
        let i_in_p = p.contains(&i);

        let mut ys = Vec::with_capacity(d.num_aps);
        let mut vars = Vec::with_capacity(d.num_aps);
        let mut powers = Vec::with_capacity(d.num_aps);
        for j in 0..d.num_aps {
            let a = self.operator.a(j, k);
            let mu1 = self.los_affine(&lay, j, p, Some(a), self.means[j][k].clone());
            let mu2 = self.los_affine(&lay, j, &[i], None, self.means[j][i].clone());

            let xi = self.stacked_x(&lay, j, i);
            let mut xp = StackedX {
                c: vec![czero(); d.num_ris * d.elements],
                terms: Vec::new(),
            };
            for &l in p {
                xp.add(&self.stacked_x(&lay, j, l));
            }
            let e5i = self.stats.masked_eta5(self.mask, j, i).powi(2);
            let e5p: T = p.iter().map(|&l| self.stats.masked_eta5(self.mask, j, l).powi(2)).sum();

            // Conditional correlation of the estimator noise with the target fluctuation.
            let mut t = xp.inner(&xi, &lay);
            if i_in_p {
                t.add_const(Cx::new(e5i, T::zero()));
            }
            let tau = a.trace().conj();
            let mut y = mu1.inner(&mu2);
            y.add_scaled(tau, &t);

            let mut s_ii = xi.inner(&xi, &lay);
            s_ii.add_const(Cx::new(e5i, T::zero()));
            let mut s_p = xp.inner(&xp, &lay);
            s_p.add_const(Cx::new(e5p + noise, T::zero()));

            let mu1_sq = mu1.inner(&mu1);
            let ahmu2 = mu2.left_mul_adjoint(a);
            let ahmu2_sq = ahmu2.inner(&ahmu2);
            let a_f = a.frob_norm_sq();
            let var = s_ii.product(&mu1_sq) + s_p.product(&ahmu2_sq) + s_ii.product(&s_p).scale(a_f);
            powers.push(mu1_sq.mean().re + a_f * s_p.mean().re);
            ys.push(y);
            vars.push(var);
        }
        debug_assert!(ys.iter().all(|f| f.dim() == dim));

        let mean = ys.iter().map(Form::mean).collect();
        let mut second = CMatrix::zeros(d.num_aps, d.num_aps);
        for j in 0..d.num_aps {
            for h in j..d.num_aps {
                let mut e = ys[j].cross(&ys[h]);
                if j == h {
                    e = Cx::new((e + vars[j]).re, T::zero());
                }
                second[(j, h)] = e;
                second[(h, j)] = e.conj();
            }
        }
        PairMoments {
            mean,
            second,
            estimate_power: powers,
        }
    }

    pub fn user(&self, k: usize) -> MomentSet<T> {
        let kn = self.stats.dims.num_users;
        let mut second = Vec::with_capacity(kn);
        let mut own = None;
        for i in 0..kn {
            let pm = self.pair(k, i);
            second.push(pm.second.clone());
            if i == k {
                own = Some(pm);
            }
        }
        let own = own.expect("k < K");
        MomentSet {
            user: k,
            v: own.mean.iter().map(|z| z.re).collect(),
            mean_wkk: own.mean,
            second,
            estimate_power: own.estimate_power,
        }
    }
}

/// Closed-form moments of user `k`.
pub fn user_moments<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
) -> MomentSet<T> {
    MomentEngine::new(stats, operator, phase, assignment, None).user(k)
}

/// `E{w_{k,i} w_{k,i}ᴴ}` (J×J).
pub fn moment_matrix<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
) -> CMatrix<T> {
    MomentEngine::new(stats, operator, phase, assignment, None)
        .pair(k, i)
        .second
}

/// `E{w_{k,k}}` (J entries).
pub fn expected_wkk<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
) -> Vec<Cx<T>> {
    MomentEngine::new(stats, operator, phase, assignment, None)
        .pair(k, k)
        .mean
}
